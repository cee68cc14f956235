#pragma once

#include <span>

#include <json.hpp>

#include "servoforge/lti.hpp"
#include "servoforge/signal_model.hpp"
#include "servoforge/sim.hpp"

namespace servoforge {

/// Extended-estimator controller: plant feedback gain k_zx plus an observer
/// over the plant state augmented with the exogenous-generator state; the
/// generator estimate is fed forward to cancel the equivalent input.
struct XestController {
    Matrix k_zx; // 1 x n
    Matrix l_zx; // n x 1
    Matrix l_nx; // m x 1
    SignalModel model;
    StateSpace plant_model;

    nlohmann::json to_json() const;
    static XestController from_json(const nlohmann::json& j, const StateSpace& plant);
};

/// Design system [[F, G C],[0, A]] with input [G; 0], output [H, 0]: the
/// plant driven by the control plus the generator output, measured through
/// the tracking error channel. Raises InfeasibleError when the plant has a
/// transmission zero at an eigenvalue of the generator (that input component
/// could never reach the output).
StateSpace build_extended(const StateSpace& plant, const SignalModel& model);

XestController design_xest(const StateSpace& plant, const SignalModel& model,
                           std::span<const Complex> control_poles,
                           std::span<const Complex> estimator_poles);

/// The estimator rewritten as a controller: state matrix
/// [[F - L_zx H - G K_zx, 0],[L_nx H, A]], driven by the measured error
/// channel, output u = -k_zx z_hat - c eta_hat. Its spectrum contains
/// eig(A): the internal model lives inside the estimator.
StateSpace controller_realization(const XestController& ctrl);

/// Closed loop: physical plant under u_sat; the extended estimator runs on
/// the measured tracking error and the saturated (actually applied) control.
/// State [x; z_hat; eta_hat].
ClosedLoop realize_closed_loop_xest(const StateSpace& plant, const XestController& ctrl,
                                    double sat_limit);

/// Loop transfer at the plant input, loop opened there (for audits).
StateSpace loop_gain_at_input(const StateSpace& plant, const XestController& ctrl);

} // namespace servoforge
