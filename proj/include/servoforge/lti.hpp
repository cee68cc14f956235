#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "servoforge/eigen.hpp"
#include "servoforge/matrix.hpp"
#include "servoforge/polynomial.hpp"

namespace servoforge {

/// Continuous-time state-space system
///   x' = F x + G u + Gw w,   y = H x + J u.
/// The disturbance input Gw defaults to G when not supplied.
struct StateSpace {
    Matrix f, g, h, j;
    std::optional<Matrix> gw;

    StateSpace(Matrix f, Matrix g, Matrix h, Matrix j, std::optional<Matrix> gw = std::nullopt);
    static StateSpace siso(Matrix f, Matrix g, Matrix h, double j = 0.0);

    std::size_t order() const { return f.rows(); }
    std::size_t inputs() const { return g.cols(); }
    std::size_t outputs() const { return h.rows(); }
    const Matrix& disturbance_input() const { return gw ? *gw : g; }
};

/// SISO transfer function num(s)/den(s), ascending coefficients. Common
/// num/den roots are cancelled at construction (root tolerance 1e-8).
class RationalSiso {
public:
    RationalSiso(Polynomial num, Polynomial den);

    const Polynomial& num() const noexcept { return num_; }
    const Polynomial& den() const noexcept { return den_; }
    Complex evaluate(Complex s) const { return num_.evaluate(s) / den_.evaluate(s); }

private:
    Polynomial num_, den_;
};

/// A loop gain: SISO rational or a square state-space realization.
class LoopGain {
public:
    LoopGain(RationalSiso siso); // implicit: rationals and realizations are loop gains
    LoopGain(StateSpace mimo);   // implicit

    bool is_siso() const;
    std::size_t size() const; // number of loop channels (1 for rational)

    const RationalSiso* rational() const { return std::get_if<RationalSiso>(&rep_); }
    const StateSpace* state_space() const { return std::get_if<StateSpace>(&rep_); }

private:
    std::variant<RationalSiso, StateSpace> rep_;
};

std::vector<Complex> poles(const LoopGain& l);

/// Finite transmission zeros of a square system: finite generalized
/// eigenvalues of the Rosenbrock pencil [[sI-F, -G],[H, J]]. Reduced to a
/// standard eigenproblem by a real shift; zeros beyond magnitude 1e8 are
/// treated as infinite and discarded.
std::vector<Complex> transmission_zeros(const StateSpace& sys);

/// Finite zeros of a loop gain (numerator roots for rational SISO).
std::vector<Complex> zeros(const LoopGain& l);

/// Poles of the unity negative-feedback closure of l.
std::vector<Complex> closed_loop_poles(const LoopGain& l);

/// L(j*omega); errors when j*omega sits within 1e-9 of a pole.
CMatrix eval_freq(const LoopGain& l, double omega);

struct SensPair {
    CMatrix s; // (I + L)^-1
    CMatrix t; // (I + L)^-1 L
};
SensPair sens_eval(const LoopGain& l, double omega);

/// System Type: origin-pole multiplicity for SISO loops; for MIMO the
/// largest k with s^k L(s) bounded and nonsingular, probed at s = 1e-4 and
/// cross-checked against the origin-pole count (mixed channel Types raise
/// UnsupportedError).
int system_type(const LoopGain& l);

struct InterpolationEntry {
    Complex location;
    bool is_pole = false;   // otherwise a zero
    double s_mag = 0.0;
    double t_mag = 0.0;
    double s_residual = 0.0; // |s_mag - target|
    double t_residual = 0.0;
};

/// |S| and |T| at every RHP pole and zero of the loop, with residuals
/// against the interpolation targets (|T|=1, |S|=0 at poles; |S|=1, |T|=0 at
/// zeros). Violations are reported, never thrown.
std::vector<InterpolationEntry> check_interpolation(const LoopGain& l);

enum class ModelInclusion { Explicit, Implicit, Absent };
std::string to_string(ModelInclusion m);

/// Whether the signal-model polynomial q divides the controller denominator
/// (explicit internal model), the plant denominator (implicit), or neither.
/// Division is checked root-by-root with tolerance 1e-6.
ModelInclusion verify_internal_model(const Polynomial& controller_den, const Polynomial& plant_den,
                                     const Polynomial& q);

/// Control-canonical realization of a proper SISO transfer function.
StateSpace to_state_space(const RationalSiso& r);

/// Transfer function of a SISO state-space system via Leverrier-Faddeev
/// (den = char poly, num = H adj(sI-F) G + J den).
RationalSiso to_rational(const StateSpace& sys);

/// Series interconnection u -> first -> second -> y.
StateSpace series(const StateSpace& first, const StateSpace& second);

// JSON formats:
//   state space: {"f": [[..]], "g": [[..]], "h": [[..]], "j": [[..]], "gw": [[..]]?}
//   rational:    {"num": [a0, a1, ...], "den": [b0, b1, ...]}
nlohmann::json to_json(const StateSpace& sys);
nlohmann::json to_json(const RationalSiso& r);
StateSpace state_space_from_json(const nlohmann::json& j);
RationalSiso rational_from_json(const nlohmann::json& j);
LoopGain loop_gain_from_json(const nlohmann::json& j);

Matrix matrix_from_json(const nlohmann::json& j, const std::string& what);
nlohmann::json matrix_to_json(const Matrix& m);

} // namespace servoforge
