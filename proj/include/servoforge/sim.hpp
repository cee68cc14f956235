#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "servoforge/matrix.hpp"

namespace servoforge {

enum class SignalKind { Zero, Step, Sine };

/// Reference/disturbance generator: step, sine or zero, switched on at
/// start_time.
struct SignalSpec {
    SignalKind kind = SignalKind::Zero;
    double amplitude = 0.0;
    double frequency = 0.0; // rad/s, sine only
    double start_time = 0.0;

    static SignalSpec zero() { return {}; }
    static SignalSpec step(double amplitude, double start_time = 0.0);
    static SignalSpec sine(double amplitude, double frequency, double start_time = 0.0);

    /// Parses "kind:amplitude[:frequency][:start]"; frequency is only part
    /// of the syntax for sine ("sine:amp:freq[:start]", "step:amp[:start]",
    /// "zero").
    static SignalSpec parse(const std::string& text);
};

double gen_signal(const SignalSpec& spec, double t);

/// Output taps sampled along a trajectory.
struct Taps {
    double y = 0.0;
    double u = 0.0; // post-saturation
    double e = 0.0;
    std::optional<double> eta; // model output, present for model following
};

/// An immutable simulatable closed loop: a deterministic, time-invariant
/// derivative rule over (state, r, w) plus output taps. The saturation
/// clamp lives inside the derivative rule.
struct ClosedLoop {
    std::size_t state_dim = 0;
    double sat_limit = 1.0;
    std::vector<double> initial_state; // default starting point (may be non-zero)
    bool has_eta = false;
    std::function<void(const double* state, double r, double w, double* dstate)> deriv;
    std::function<Taps(const double* state, double r, double w)> taps;
};

struct SimTrace {
    std::vector<double> t, r, w, y, u, e;
    std::vector<double> eta; // empty unless the loop provides it
    double h = 0.0;
    std::string method;

    std::size_t samples() const { return t.size(); }
};

/// Classical fixed-step 4th-order integration from the loop's initial state
/// (or x0 when given). Taps are sampled at every grid point; a non-finite
/// state aborts with DivergenceError carrying the time stamp.
SimTrace simulate(const ClosedLoop& sys, const SignalSpec& ref, const SignalSpec& dist, double t_end,
                  double h, const std::vector<double>* x0 = nullptr);

/// max |e| over the trailing window_fraction of the horizon.
double steady_state_error(const SimTrace& trace, double window_fraction);

/// CSV with header t,r,w,y,u,e[,eta], 17 significant digits.
void write_csv(const SimTrace& trace, std::ostream& out);
void write_csv(const SimTrace& trace, const std::string& path);

} // namespace servoforge
