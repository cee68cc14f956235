#pragma once

#include <span>
#include <utility>

#include <json.hpp>

#include "servoforge/lti.hpp"
#include "servoforge/signal_model.hpp"
#include "servoforge/sim.hpp"

namespace servoforge {

/// Internal-model tracking controller: plant-state feedback k_z, error-chain
/// gain k_eta (the c(p) coefficients up to sign), the model polynomial d and
/// a plant-state estimator gain l_x. The realized controller transfer from
/// error to control is c(s)/d(s) -- d(s) is the explicit internal model.
struct ImController {
    Matrix k_z;   // 1 x n
    Matrix k_eta; // 1 x m, ordered like the chain state [e^(m-1) ... e]
    Polynomial d;
    Matrix l_x; // n x 1
    StateSpace plant_model;

    nlohmann::json to_json() const;
    static ImController from_json(const nlohmann::json& j, const StateSpace& plant);
};

/// Control-canonical error chain (a, b) with char(a) = d. b carries the
/// sign making the chain transfer -1/d(s); driving it with -e yields the
/// filtered error states [e^(m-1) ... e]/d(p).
std::pair<Matrix, Matrix> build_error_chain(const Polynomial& d);

/// Composite design system [[F, 0],[B H, A]] with input [G; 0]: the
/// d(p)-filtered plant in series with the error chain.
StateSpace build_composite(const StateSpace& plant, const Polynomial& d);

ImController design_im(const StateSpace& plant, const SignalModel& model,
                       std::span<const Complex> control_poles,
                       std::span<const Complex> estimator_poles);

/// Closed loop of Fig.-4 structure: plant, state estimator fed the saturated
/// control, dynamic error compensator c(p)/d(p); state [x; x_hat; eta_c].
/// The supplied plant may differ from the controller's design model
/// (perturbation studies); the estimator always uses the design model.
ClosedLoop realize_closed_loop_im(const StateSpace& plant, const ImController& ctrl, double sat_limit);

/// Loop transfer seen at the plant input with the loop opened there
/// (controller hanging off the plant output, negative-feedback convention).
StateSpace loop_gain_at_input(const StateSpace& plant, const ImController& ctrl);

} // namespace servoforge
