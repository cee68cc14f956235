#include "servoforge/sim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "servoforge/errors.hpp"

namespace servoforge {

SignalSpec SignalSpec::step(double amplitude, double start_time) {
    return {SignalKind::Step, amplitude, 0.0, start_time};
}

SignalSpec SignalSpec::sine(double amplitude, double frequency, double start_time) {
    if (frequency <= 0.0) throw DomainError("SignalSpec: sine frequency must be positive");
    return {SignalKind::Sine, amplitude, frequency, start_time};
}

SignalSpec SignalSpec::parse(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.empty()) throw DomainError("empty signal spec");

    auto num = [&](std::size_t i) {
        try {
            std::size_t used = 0;
            double v = std::stod(parts[i], &used);
            if (used != parts[i].size()) throw std::invalid_argument("trailing junk");
            return v;
        } catch (const std::exception&) {
            throw DomainError("signal spec: cannot parse number \"" + parts[i] + "\"");
        }
    };

    if (parts[0] == "zero") {
        if (parts.size() > 1) throw DomainError("signal spec: zero takes no parameters");
        return zero();
    }
    if (parts[0] == "step") {
        if (parts.size() < 2 || parts.size() > 3)
            throw DomainError("signal spec: expected step:amplitude[:start]");
        return step(num(1), parts.size() > 2 ? num(2) : 0.0);
    }
    if (parts[0] == "sine") {
        if (parts.size() < 3 || parts.size() > 4)
            throw DomainError("signal spec: expected sine:amplitude:frequency[:start]");
        return sine(num(1), num(2), parts.size() > 3 ? num(3) : 0.0);
    }
    throw DomainError("signal spec: unknown kind \"" + parts[0] + "\"");
}

double gen_signal(const SignalSpec& spec, double t) {
    if (t < spec.start_time) return 0.0;
    switch (spec.kind) {
        case SignalKind::Step: return spec.amplitude;
        case SignalKind::Sine: return spec.amplitude * std::sin(spec.frequency * (t - spec.start_time));
        default: return 0.0;
    }
}

SimTrace simulate(const ClosedLoop& sys, const SignalSpec& ref, const SignalSpec& dist, double t_end,
                  double h, const std::vector<double>* x0) {
    if (h <= 0.0) throw DomainError("simulate: step size must be positive");
    if (t_end < h) throw DomainError("simulate: horizon shorter than one step");
    if (!sys.deriv || !sys.taps) throw DomainError("simulate: closed loop has no derivative rule");

    const std::size_t dim = sys.state_dim;
    std::vector<double> state = x0 ? *x0 : sys.initial_state;
    if (state.empty()) state.assign(dim, 0.0);
    if (state.size() != dim) throw DimensionError("simulate: initial state has wrong dimension");

    const std::size_t steps = static_cast<std::size_t>(std::llround(t_end / h));
    SimTrace trace;
    trace.h = h;
    trace.method = "rk4";
    trace.t.reserve(steps + 1);

    std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);

    for (std::size_t step = 0; step <= steps; ++step) {
        const double t = static_cast<double>(step) * h;
        for (double v : state)
            if (!std::isfinite(v))
                throw DivergenceError("simulate: state diverged at t = " + std::to_string(t), t);

        Taps taps = sys.taps(state.data(), gen_signal(ref, t), gen_signal(dist, t));
        trace.t.push_back(t);
        trace.r.push_back(gen_signal(ref, t));
        trace.w.push_back(gen_signal(dist, t));
        trace.y.push_back(taps.y);
        trace.u.push_back(taps.u);
        trace.e.push_back(taps.e);
        if (sys.has_eta) trace.eta.push_back(taps.eta.value_or(0.0));
        if (step == steps) break;

        const double tm = t + 0.5 * h, tp = t + h;
        const double r0 = gen_signal(ref, t), rm = gen_signal(ref, tm), rp = gen_signal(ref, tp);
        const double w0 = gen_signal(dist, t), wm = gen_signal(dist, tm), wp = gen_signal(dist, tp);

        sys.deriv(state.data(), r0, w0, k1.data());
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = state[i] + 0.5 * h * k1[i];
        sys.deriv(tmp.data(), rm, wm, k2.data());
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = state[i] + 0.5 * h * k2[i];
        sys.deriv(tmp.data(), rm, wm, k3.data());
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = state[i] + h * k3[i];
        sys.deriv(tmp.data(), rp, wp, k4.data());
        for (std::size_t i = 0; i < dim; ++i)
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return trace;
}

double steady_state_error(const SimTrace& trace, double window_fraction) {
    if (trace.t.empty()) throw DomainError("steady_state_error: empty trace");
    if (window_fraction <= 0.0 || window_fraction > 1.0)
        throw DomainError("steady_state_error: window fraction must lie in (0, 1]");
    const std::size_t n = trace.e.size();
    std::size_t start = n - std::max<std::size_t>(1, static_cast<std::size_t>(window_fraction * n));
    double m = 0.0;
    for (std::size_t i = start; i < n; ++i) m = std::max(m, std::abs(trace.e[i]));
    return m;
}

void write_csv(const SimTrace& trace, std::ostream& out) {
    const bool with_eta = !trace.eta.empty();
    out << "t,r,w,y,u,e";
    if (with_eta) out << ",eta";
    out << "\n";
    char buf[512];
    for (std::size_t i = 0; i < trace.samples(); ++i) {
        if (with_eta) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", trace.t[i],
                          trace.r[i], trace.w[i], trace.y[i], trace.u[i], trace.e[i], trace.eta[i]);
        } else {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", trace.t[i],
                          trace.r[i], trace.w[i], trace.y[i], trace.u[i], trace.e[i]);
        }
        out << buf;
    }
}

void write_csv(const SimTrace& trace, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("io", "cannot open \"" + path + "\" for writing");
    write_csv(trace, f);
}

} // namespace servoforge
