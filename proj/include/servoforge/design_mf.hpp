#pragma once

#include <span>
#include <utility>

#include <json.hpp>

#include "servoforge/lti.hpp"
#include "servoforge/signal_model.hpp"
#include "servoforge/sim.hpp"

namespace servoforge {

/// Model-following controller: feedforward of the reference-model state
/// through (m, n_ff) solving F M - M A + G N = 0 and H M = C, plus
/// stabilizing feedback k. Open loop with respect to the model -- exact
/// only for the nominal plant.
struct MfController {
    Matrix k;    // 1 x n
    Matrix m;    // n x nz
    Matrix n_ff; // 1 x nz
    SignalModel model;
    StateSpace plant_model;

    nlohmann::json to_json() const;
    static MfController from_json(const nlohmann::json& j, const StateSpace& plant);
};

/// Solves the coupled linear equations F M - M A + G N = 0, H M = C for
/// (M, N) by column-major vectorization of M then N. Infeasible when a model
/// eigenvalue coincides with a plant transmission zero.
std::pair<Matrix, Matrix> solve_mf_gains(const StateSpace& plant, const Matrix& model_a,
                                         const Matrix& model_c);

MfController design_mf(const StateSpace& plant, const SignalModel& model,
                       std::span<const Complex> control_poles);

/// Closed loop with state [x; z]: autonomous model z' = A z started from
/// z(0) = B (impulse drive), u = N z - K (x - M z) clamped at the
/// saturation limit. Taps report y, eta = C z and e = y - eta.
ClosedLoop realize_closed_loop_mf(const StateSpace& plant, const MfController& ctrl, double sat_limit);

} // namespace servoforge
