#include "servoforge/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "servoforge/errors.hpp"

namespace servoforge {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRhpTol = 1e-9;
constexpr double kOmegaMin = 1e-4;
constexpr double kOmegaMax = 1e4;
constexpr double kPanelTol = 1e-4;

using Integrand = std::function<double(double)>;

double adaptive_simpson(const Integrand& f, double a, double b, double fa, double fm, double fb,
                        double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double s1 = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double s2 = (b - a) / 12.0 * (fa + 4.0 * flm + 2.0 * fm + 4.0 * frm + fb);
    if (depth >= 40 || std::abs(s2 - s1) <= 15.0 * tol) return s2 + (s2 - s1) / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth + 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth + 1);
}

double integrate_panel(const Integrand& f, double a, double b, double tol) {
    const double m = 0.5 * (a + b);
    return adaptive_simpson(f, a, b, f(a), f(m), f(b), tol, 0);
}

struct SingularPoint {
    double omega = 0.0;
    int multiplicity = 1;
};

// Integrate f over [lo, hi] on a logarithmic initial grid (8 panels per
// decade). Interior points where the integrand has an integrable log
// singularity (f ~ m*w(s)*ln|w - s| + smooth) are excluded in a 2*delta
// window and patched analytically.
double integrate_log_grid(const Integrand& f, double lo, double hi,
                          const std::vector<SingularPoint>& singular,
                          const Integrand& sing_weight) {
    std::vector<double> edges;
    const int per_decade = 8;
    const double decades = std::log10(hi / lo);
    const int count = std::max(1, static_cast<int>(std::ceil(decades * per_decade)));
    for (int k = 0; k <= count; ++k) edges.push_back(lo * std::pow(10.0, decades * k / count));
    edges.back() = hi;

    struct Gap {
        double a, b;   // excluded window
        double patch;  // analytic contribution of the window
    };
    std::vector<Gap> gaps;
    for (const SingularPoint& s : singular) {
        if (s.omega <= lo || s.omega >= hi) continue;
        const double delta = 1e-7 * (1.0 + s.omega);
        const double fp = f(s.omega + delta), fm = f(s.omega - delta);
        // integral of m*w(s)*ln|w - s| over the window plus the smooth part
        const double patch = delta * (fp + fm) - 2.0 * s.multiplicity * delta * sing_weight(s.omega);
        gaps.push_back({s.omega - delta, s.omega + delta, patch});
        edges.push_back(s.omega - delta);
        edges.push_back(s.omega + delta);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    double total = 0.0;
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
        const double a = edges[k], b = edges[k + 1];
        bool inside_gap = false;
        for (const Gap& g : gaps)
            if (a >= g.a - 1e-300 && b <= g.b + 1e-300) inside_gap = true;
        if (!inside_gap) total += integrate_panel(f, a, b, kPanelTol);
    }
    for (const Gap& g : gaps) total += g.patch;
    return total;
}

// [0, wmin] closure for integrands behaving like a*ln(w) + b near zero.
double log_head(const Integrand& f, double wmin) {
    const double f1 = f(wmin), f2 = f(0.5 * wmin);
    const double a = (f1 - f2) / std::numbers::ln2;
    const double b = f1 - a * std::log(wmin);
    return a * (wmin * std::log(wmin) - wmin) + b * wmin;
}

// [0, wmin] closure for integrands that are even and finite at zero
// (quadratic extrapolation c0 + c2 w^2).
double quadratic_head(const Integrand& f, double wmin) {
    const double f1 = f(wmin), f2 = f(0.5 * wmin);
    const double c2 = (f1 - f2) / (0.75 * wmin * wmin);
    const double c0 = f1 - c2 * wmin * wmin;
    return c0 * wmin + c2 * wmin * wmin * wmin / 3.0;
}

struct LoopFunctions {
    Integrand ln_s;        // ln|S(jw)| or ln|det S(jw)|
    Integrand ln_t_over_w2;
    std::vector<SingularPoint> s_singular; // axis open poles (ln_s -> -inf)
    std::vector<SingularPoint> t_singular; // axis zeros (ln_t -> -inf)
};

std::vector<SingularPoint> axis_frequencies(const std::vector<Complex>& locations) {
    std::vector<SingularPoint> out;
    for (const Complex& p : locations) {
        if (std::abs(p.real()) > kRhpTol) continue;
        const double w0 = p.imag();
        if (w0 <= kRhpTol) continue; // origin handled by the head closure
        bool merged = false;
        for (SingularPoint& s : out)
            if (std::abs(s.omega - w0) < 1e-9 * (1.0 + w0)) {
                ++s.multiplicity;
                merged = true;
            }
        if (!merged) out.push_back({w0, 1});
    }
    return out;
}

// Closed-loop stability gate shared by every numeric integral.
void require_stable(const std::vector<Complex>& closed) {
    for (const Complex& p : closed)
        if (p.real() > -kRhpTol) {
            throw InstabilityError("closed loop is not stable: pole at " + std::to_string(p.real()) +
                                   (p.imag() < 0 ? " - " : " + ") + std::to_string(std::abs(p.imag())) +
                                   "i");
        }
}

LoopFunctions make_loop_functions(const LoopGain& l) {
    LoopFunctions fns;
    if (l.is_siso()) {
        RationalSiso r = l.rational() ? *l.rational() : to_rational(*l.state_space());
        const Polynomial num = r.num(), den = r.den();
        const Polynomial phi_cl = den + num;
        fns.ln_s = [num, den, phi_cl](double w) {
            const Complex s(0.0, w);
            return std::log(std::abs(den.evaluate(s))) - std::log(std::abs(phi_cl.evaluate(s)));
        };
        fns.ln_t_over_w2 = [num, den, phi_cl](double w) {
            const Complex s(0.0, w);
            return (std::log(std::abs(num.evaluate(s))) - std::log(std::abs(phi_cl.evaluate(s)))) /
                   (w * w);
        };
        fns.s_singular = axis_frequencies(poly_roots(den));
        if (num.degree() >= 1) fns.t_singular = axis_frequencies(poly_roots(num));
        return fns;
    }

    const StateSpace ss = *l.state_space();
    auto eval_l = [ss](double w) {
        const std::size_t n = ss.order();
        CMatrix si_f(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t jj = 0; jj < n; ++jj)
                si_f(i, jj) = (i == jj ? Complex(0.0, w) : Complex(0, 0)) - Complex(ss.f(i, jj), 0.0);
        CMatrix x = solve_linear(si_f, CMatrix::from_real(ss.g));
        return CMatrix::from_real(ss.h) * x + CMatrix::from_real(ss.j);
    };
    fns.ln_s = [eval_l](double w) {
        CMatrix lm = eval_l(w);
        return -std::log(std::abs(determinant(CMatrix::identity(lm.rows()) + lm)));
    };
    fns.ln_t_over_w2 = [eval_l](double w) {
        CMatrix lm = eval_l(w);
        const Complex det_l = determinant(lm);
        const Complex det_ipl = determinant(CMatrix::identity(lm.rows()) + lm);
        return (std::log(std::abs(det_l)) - std::log(std::abs(det_ipl))) / (w * w);
    };
    fns.s_singular = axis_frequencies(eigenvalues(ss.f));
    fns.t_singular = axis_frequencies(transmission_zeros(ss));
    return fns;
}

int relative_degree(const LoopGain& l) {
    if (const RationalSiso* r = l.rational())
        return static_cast<int>(r->den().degree()) - static_cast<int>(r->num().degree());
    const StateSpace& ss = *l.state_space();
    if (ss.outputs() == 1) {
        RationalSiso r = to_rational(ss);
        return static_cast<int>(r.den().degree()) - static_cast<int>(r.num().degree());
    }
    return ss.j.max_abs() == 0.0 ? 1 : 0; // strictly proper is what the integrals need
}

double sum_rhp_real(const std::vector<Complex>& poles) {
    double s = 0.0;
    for (const Complex& p : poles)
        if (p.real() > kRhpTol) s += p.real();
    return s;
}

} // namespace

nlohmann::json to_json(const ExtReal& v) {
    if (v.inf) return "inf";
    return v.value;
}

LimitCoefficients limit_coefficients(const RationalSiso& l) {
    const Polynomial& num = l.num();
    const Polynomial& den = l.den();
    const int rel = static_cast<int>(den.degree()) - static_cast<int>(num.degree());
    if (rel < 0) throw DomainError("limit_coefficients: improper loop gain");

    LimitCoefficients out;
    if (rel == 0) out.k_h = ExtReal::infinity();
    else if (rel == 1) out.k_h = ExtReal::finite(num.leading() / den.leading());
    else out.k_h = ExtReal::finite(0.0);

    // k_v from the origin-root structure of the denominator
    std::vector<Complex> den_roots = poly_roots(den);
    std::vector<Complex> off_origin;
    int type = 0;
    for (const Complex& p : den_roots) {
        if (std::abs(p) < 1e-7) ++type;
        else off_origin.push_back(p);
    }
    if (type == 0) out.k_v = ExtReal::finite(0.0);
    else if (type == 1) {
        const double den_rest = Polynomial::from_roots(off_origin, den.leading()).evaluate(0.0);
        out.k_v = ExtReal::finite(num.evaluate(0.0) / den_rest);
    } else {
        out.k_v = ExtReal::infinity();
    }
    return out;
}

double closed_form_sensitivity(std::span<const Complex> open_poles,
                               std::span<const Complex> closed_poles) {
    if (open_poles.size() != closed_poles.size())
        throw DomainError("closed_form_sensitivity: pole lists must have equal length");
    std::vector<Complex> op(open_poles.begin(), open_poles.end());
    std::vector<Complex> cl(closed_poles.begin(), closed_poles.end());
    if (!conjugate_closed(op, 1e-6) || !conjugate_closed(cl, 1e-6))
        throw DomainError("closed_form_sensitivity: pole lists must be conjugate-closed");

    double shift = 0.0;
    for (std::size_t i = 0; i < op.size(); ++i) shift += cl[i].real() - op[i].real();
    double rhp = 0.0;
    for (const Complex& p : op)
        if (p.real() > kRhpTol) rhp += 2.0 * p.real();
    return kPi / 2.0 * (shift + rhp);
}

ExtReal closed_form_complementary(std::span<const Complex> closed_poles,
                                  std::span<const Complex> zeros, int system_type) {
    if (system_type <= 0) return ExtReal::infinity();
    std::vector<Complex> cl(closed_poles.begin(), closed_poles.end());
    std::vector<Complex> zs(zeros.begin(), zeros.end());
    if (!conjugate_closed(cl, 1e-6) || !conjugate_closed(zs, 1e-6))
        throw DomainError("closed_form_complementary: lists must be conjugate-closed");

    double sum = 0.0;
    for (const Complex& p : cl) {
        if (std::abs(p) < 1e-12)
            throw DomainError("closed_form_complementary: closed-loop pole at the origin");
        sum += p.real() / std::norm(p); // Re(1/p), imaginary parts pair off
    }
    for (const Complex& z : zs) {
        if (std::abs(z) < 1e-12)
            throw DomainError("closed_form_complementary: transmission zero at the origin");
        sum -= z.real() / std::norm(z);
    }
    double rhp = 0.0;
    for (const Complex& z : zs)
        if (z.real() > kRhpTol) rhp += z.real() / std::norm(z);
    return ExtReal::finite(kPi / 2.0 * sum + kPi * rhp);
}

IntegralValue numeric_sensitivity_integral(const LoopGain& l) {
    require_stable(closed_loop_poles(l));
    if (relative_degree(l) < 1)
        throw DomainError("numeric_sensitivity_integral: loop must be strictly proper");

    LoopFunctions fns = make_loop_functions(l);
    const Integrand unit_weight = [](double) { return 1.0; };

    IntegralValue out;
    double wmax = kOmegaMax;
    for (;;) {
        const double head = log_head(fns.ln_s, kOmegaMin);
        const double body = integrate_log_grid(fns.ln_s, kOmegaMin, wmax, fns.s_singular, unit_weight);

        // tail model c/w^2, fitted over the last decade
        double c_sum = 0.0, c_min = 0.0, c_max = 0.0;
        const int samples = 9;
        for (int k = 0; k < samples; ++k) {
            const double w = wmax / 10.0 * std::pow(10.0, k / static_cast<double>(samples - 1));
            const double c = fns.ln_s(w) * w * w;
            c_sum += c;
            if (k == 0) { c_min = c_max = c; }
            c_min = std::min(c_min, c);
            c_max = std::max(c_max, c);
        }
        const double c = c_sum / samples;
        if (c_max - c_min <= std::max(0.2 * std::abs(c), 1e-6) || wmax >= 1e7) {
            out.value = head + body + c / wmax;
            return out;
        }
        wmax *= 10.0; // integrand not yet in its asymptotic regime
        out.tail_widened = true;
    }
}

ExtIntegralValue numeric_complementary_integral(const LoopGain& l) {
    require_stable(closed_loop_poles(l));
    const int type = system_type(l);
    ExtIntegralValue out;
    if (type == 0) {
        out.value = ExtReal::infinity();
        return out;
    }

    LoopFunctions fns = make_loop_functions(l);
    const Integrand w2_weight = [](double w0) { return 1.0 / (w0 * w0); };

    double wmax = kOmegaMax;
    for (;;) {
        const double head = quadratic_head(fns.ln_t_over_w2, kOmegaMin);
        const double body =
            integrate_log_grid(fns.ln_t_over_w2, kOmegaMin, wmax, fns.t_singular, w2_weight);

        // tail: ln|T| ~ a + b ln w, so the weighted integrand integrates to
        // (a + b + b ln W)/W beyond the cutoff; least-squares fit of (a, b)
        const int samples = 9;
        double s_1 = 0, s_x = 0, s_xx = 0, s_y = 0, s_xy = 0;
        std::vector<double> ws(samples), ys(samples);
        for (int k = 0; k < samples; ++k) {
            const double w = wmax / 10.0 * std::pow(10.0, k / static_cast<double>(samples - 1));
            const double x = std::log(w);
            const double y = fns.ln_t_over_w2(w) * w * w;
            ws[k] = w; ys[k] = y;
            s_1 += 1; s_x += x; s_xx += x * x; s_y += y; s_xy += x * y;
        }
        const double det = s_1 * s_xx - s_x * s_x;
        const double a = (s_y * s_xx - s_x * s_xy) / det;
        const double b = (s_1 * s_xy - s_x * s_y) / det;
        double max_resid = 0.0, max_y = 0.0;
        for (int k = 0; k < samples; ++k) {
            max_resid = std::max(max_resid, std::abs(ys[k] - (a + b * std::log(ws[k]))));
            max_y = std::max(max_y, std::abs(ys[k]));
        }
        if (max_resid <= std::max(0.05 * max_y, 1e-8) || wmax >= 1e7) {
            out.value = ExtReal::finite(head + body + (a + b + b * std::log(wmax)) / wmax);
            return out;
        }
        wmax *= 10.0;
        out.tail_widened = true;
    }
}

WeightedNmpResult weighted_nmp_integral(const LoopGain& l, Complex z0) {
    if (!l.is_siso()) throw UnsupportedError("weighted_nmp_integral: SISO loops only");
    if (!(z0.real() > 0.0)) throw DomainError("weighted_nmp_integral: z0 must lie in the open RHP");
    bool found = false;
    for (const Complex& z : zeros(l))
        if (std::abs(z - z0) < 1e-6 * (1.0 + std::abs(z0))) found = true;
    if (!found) throw DomainError("weighted_nmp_integral: z0 is not a zero of the loop gain");
    std::vector<Complex> closed = closed_loop_poles(l);
    require_stable(closed);

    WeightedNmpResult out;
    std::vector<Complex> open = poles(l);
    for (const Complex& p : open)
        if (p.real() > kRhpTol) out.closed_form += kPi * std::log(std::abs((std::conj(p) + z0) / (p - z0)));

    const double sigma0 = z0.real(), omega0 = z0.imag();
    auto weight_sym = [sigma0, omega0](double w) {
        return sigma0 / (sigma0 * sigma0 + (w - omega0) * (w - omega0)) +
               sigma0 / (sigma0 * sigma0 + (w + omega0) * (w + omega0));
    };
    LoopFunctions fns = make_loop_functions(l);
    Integrand f = [&](double w) { return fns.ln_s(w) * weight_sym(w); };
    Integrand patch_weight = [&](double w0) { return weight_sym(w0); };

    const double cutoff = 1e4 * std::max(1.0, std::abs(z0));
    // the weight is O(w^-2): the product decays like w^-4 and the remainder
    // beyond the cutoff is negligible, no tail fit needed
    const double head = weight_sym(0.0) * log_head(fns.ln_s, kOmegaMin);
    const double body = integrate_log_grid(f, kOmegaMin, cutoff, fns.s_singular, patch_weight);
    out.numeric = head + body;
    return out;
}

namespace {

SensitivityReport base_report(const std::vector<Complex>& open, const std::vector<Complex>& closed,
                              const std::vector<Complex>& zs, int type) {
    SensitivityReport r;
    r.system_type = type;
    r.open_poles = open;
    r.closed_poles = closed;
    r.zeros = zs;
    for (const Complex& p : open)
        if (p.real() > kRhpTol) ++r.n_p;
    for (const Complex& z : zs)
        if (z.real() > kRhpTol) ++r.n_z;
    r.classification = r.n_p > 0 ? "OLU" : "OLS";
    return r;
}

ExtReal residual_of(const ExtReal& a, const ExtReal& b) {
    if (a.inf && b.inf) return ExtReal::finite(0.0);
    if (a.inf || b.inf) return ExtReal::infinity();
    return ExtReal::finite(std::abs(a.value - b.value));
}

} // namespace

AuditResult audit(const LoopGain& l) {
    std::vector<Complex> open = poles(l);
    std::vector<Complex> closed = closed_loop_poles(l);
    require_stable(closed);
    std::vector<Complex> zs = zeros(l);
    const int type = system_type(l);

    AuditResult res;
    res.sensitivity = base_report(open, closed, zs, type);
    res.sensitivity.integral = "sensitivity";
    IntegralValue sn = numeric_sensitivity_integral(l);
    res.sensitivity.numeric = ExtReal::finite(sn.value);
    res.sensitivity.tail_widened = sn.tail_widened;
    res.sensitivity.closed_form = ExtReal::finite(closed_form_sensitivity(open, closed));
    res.sensitivity.residual = residual_of(res.sensitivity.numeric, res.sensitivity.closed_form);

    res.complementary = base_report(open, closed, zs, type);
    res.complementary.integral = "complementary";
    ExtIntegralValue cn = numeric_complementary_integral(l);
    res.complementary.numeric = cn.value;
    res.complementary.tail_widened = cn.tail_widened;
    res.complementary.closed_form = closed_form_complementary(closed, zs, type);
    res.complementary.residual = residual_of(res.complementary.numeric, res.complementary.closed_form);

    if (l.is_siso()) {
        RationalSiso r = l.rational() ? *l.rational() : to_rational(*l.state_space());
        LimitCoefficients lim = limit_coefficients(r);
        if (!lim.k_h.inf) {
            // strictly proper: pi * sum(RHP open poles) - pi*k_h/2 must agree
            const double via_kh = kPi * sum_rhp_real(open) - kPi * lim.k_h.value / 2.0;
            res.kh_route_residual = std::abs(via_kh - res.sensitivity.closed_form.value);
        }
        if (type == 1 && !lim.k_v.inf && !res.complementary.closed_form.inf) {
            double rhp_inv_zeros = 0.0;
            for (const Complex& z : zs)
                if (z.real() > kRhpTol) rhp_inv_zeros += z.real() / std::norm(z);
            const double via_kv = -kPi / (2.0 * lim.k_v.value) + kPi * rhp_inv_zeros;
            res.kv_route_residual = std::abs(via_kv - res.complementary.closed_form.value);
        }
    }
    return res;
}

namespace {

nlohmann::json complex_list(const std::vector<Complex>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (const Complex& c : v) out.push_back({c.real(), c.imag()});
    return out;
}

} // namespace

nlohmann::json to_json(const SensitivityReport& r) {
    nlohmann::json j;
    j["integral"] = r.integral;
    j["numeric"] = to_json(r.numeric);
    j["closed_form"] = to_json(r.closed_form);
    j["residual"] = to_json(r.residual);
    j["classification"] = r.classification;
    j["type"] = r.system_type;
    j["n_p"] = r.n_p;
    j["n_z"] = r.n_z;
    j["open_poles"] = complex_list(r.open_poles);
    j["closed_poles"] = complex_list(r.closed_poles);
    j["zeros"] = complex_list(r.zeros);
    if (r.tail_widened) j["tail_widened"] = true;
    return j;
}

nlohmann::json to_json(const AuditResult& r) {
    nlohmann::json j;
    j["sensitivity"] = to_json(r.sensitivity);
    j["complementary"] = to_json(r.complementary);
    if (r.kh_route_residual) j["kh_route_residual"] = *r.kh_route_residual;
    if (r.kv_route_residual) j["kv_route_residual"] = *r.kv_route_residual;
    return j;
}

} // namespace servoforge
