#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "servoforge/lti.hpp"

namespace servoforge {

/// A real value or an explicit infinity marker (never a float overflow).
struct ExtReal {
    double value = 0.0;
    bool inf = false;

    static ExtReal infinity() { return {0.0, true}; }
    static ExtReal finite(double v) { return {v, false}; }
};

nlohmann::json to_json(const ExtReal& v); // number or the string "inf"

/// High- and low-frequency loop-gain limits: k_h = lim s->inf s L(s),
/// k_v = lim s->0 s L(s) (velocity constant).
struct LimitCoefficients {
    ExtReal k_h;
    ExtReal k_v;
};

LimitCoefficients limit_coefficients(const RationalSiso& l);

/// Closed form of the sensitivity integral from pole shifts:
/// (pi/2) sum(Re p_cl - Re p_ol), plus pi * sum of RHP open-pole real parts
/// when the open loop is unstable. Real-part pairing keeps the result real.
double closed_form_sensitivity(std::span<const Complex> open_poles,
                               std::span<const Complex> closed_poles);

/// Closed form of the complementary sensitivity integral:
/// infinity for Type 0; otherwise
/// (pi/2)(sum 1/p_cl - sum 1/z) + pi * sum over RHP zeros of 1/z.
ExtReal closed_form_complementary(std::span<const Complex> closed_poles,
                                  std::span<const Complex> zeros, int system_type);

struct IntegralValue {
    double value = 0.0;
    bool tail_widened = false; // the high-frequency cutoff had to be extended
};

/// Quadrature of ln|S(j w)| (SISO) or ln|det S(j w)| (MIMO) over [0, inf):
/// log-singular head closure on [0, 1e-4], adaptive Simpson on the log grid
/// to 1e4 rad/s with analytic patches at imaginary-axis open-loop poles, and
/// a fitted c/w^2 tail.
IntegralValue numeric_sensitivity_integral(const LoopGain& l);

struct ExtIntegralValue {
    ExtReal value;
    bool tail_widened = false;
};

/// Quadrature of ln|T(j w)|/w^2; returns the infinity marker for Type 0
/// loops without integrating. Quadratic head extrapolation, fitted
/// (a + b ln w)/w^2 tail.
ExtIntegralValue numeric_complementary_integral(const LoopGain& l);

struct WeightedNmpResult {
    double numeric = 0.0;
    double closed_form = 0.0;
};

/// Two-sided sensitivity integral weighted by the Poisson kernel of an RHP
/// zero z0: numeric quadrature against the closed form
/// pi * sum over RHP poles of ln|(conj(p) + z0)/(p - z0)|.
WeightedNmpResult weighted_nmp_integral(const LoopGain& l, Complex z0);

struct SensitivityReport {
    std::string integral; // "sensitivity" | "complementary"
    ExtReal numeric;
    ExtReal closed_form;
    ExtReal residual; // |numeric - closed_form|; 0 when both infinite
    std::string classification; // "OLS" | "OLU"
    int system_type = 0;
    std::size_t n_p = 0; // RHP open poles
    std::size_t n_z = 0; // RHP transmission zeros
    std::vector<Complex> open_poles, closed_poles, zeros;
    bool tail_widened = false;
};

nlohmann::json to_json(const SensitivityReport& r);

struct AuditResult {
    SensitivityReport sensitivity;
    SensitivityReport complementary;
    // agreement of the alternative closed-form routes, when they apply:
    // the K_h route for strictly proper SISO loops and the K_v (Truxal)
    // route for Type-1 SISO loops
    std::optional<double> kh_route_residual;
    std::optional<double> kv_route_residual;
};

/// Full audit of a loop gain: both integrals, numeric and closed form, plus
/// pole/zero/Type bookkeeping and the alternative-route cross-checks.
/// InstabilityError when the unity-feedback closure is unstable.
AuditResult audit(const LoopGain& l);

nlohmann::json to_json(const AuditResult& r);

} // namespace servoforge
