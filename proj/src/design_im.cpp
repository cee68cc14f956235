#include "servoforge/design_im.hpp"

#include <algorithm>
#include <cmath>

#include "servoforge/errors.hpp"
#include "servoforge/placement.hpp"

namespace servoforge {

std::pair<Matrix, Matrix> build_error_chain(const Polynomial& d) {
    if (d.degree() < 1) throw DomainError("build_error_chain: d must have degree >= 1");
    if (!d.is_monic(1e-12)) throw DomainError("build_error_chain: d must be monic");
    Matrix a = companion(d);
    Matrix b(d.degree(), 1);
    b(0, 0) = -1.0;
    return {a, b};
}

StateSpace build_composite(const StateSpace& plant, const Polynomial& d) {
    if (plant.outputs() != 1 || plant.inputs() != 1)
        throw DimensionError("build_composite: plant must be SISO");
    if (plant.j.max_abs() != 0.0)
        throw DomainError("build_composite: plant must be strictly proper (y = Hx)");
    auto [a, b] = build_error_chain(d);
    const std::size_t n = plant.order(), m = d.degree();
    Matrix f(n + m, n + m);
    f.set_block(0, 0, plant.f);
    f.set_block(n, 0, b * plant.h);
    f.set_block(n, n, a);
    Matrix g = vstack(plant.g, Matrix(m, 1));
    Matrix h = hstack(plant.h, Matrix(1, m)); // y-tap; not used by the design
    return StateSpace(f, g, h, Matrix(1, 1));
}

ImController design_im(const StateSpace& plant, const SignalModel& model,
                       std::span<const Complex> control_poles,
                       std::span<const Complex> estimator_poles) {
    const std::size_t n = plant.order(), m = model.d.degree();
    StateSpace composite = build_composite(plant, model.d);
    Matrix k = place(composite.f, composite.g, control_poles);
    Matrix l_x = place_estimator(plant.f, plant.h, estimator_poles);
    return {k.block(0, 0, 1, n), k.block(0, n, 1, m), model.d, l_x, plant};
}

ClosedLoop realize_closed_loop_im(const StateSpace& plant, const ImController& ctrl, double sat_limit) {
    if (plant.order() != ctrl.plant_model.order() || plant.outputs() != 1 || plant.inputs() != 1)
        throw DimensionError("realize_closed_loop_im: plant does not match the controller dimensions");
    if (!(sat_limit > 0.0)) throw DomainError("realize_closed_loop_im: saturation limit must be positive");

    auto [a, b] = build_error_chain(ctrl.d);
    const std::size_t n = plant.order(), m = ctrl.d.degree();
    const StateSpace est_model = ctrl.plant_model;
    const Matrix gw = plant.disturbance_input();
    const Matrix k_z = ctrl.k_z, k_eta = ctrl.k_eta, l_x = ctrl.l_x;
    const StateSpace plant_copy = plant;

    ClosedLoop loop;
    loop.state_dim = 2 * n + m; // [x; x_hat; eta_c]
    loop.sat_limit = sat_limit;
    loop.initial_state.assign(loop.state_dim, 0.0);

    auto control = [n, m, k_z, k_eta](const double* s) {
        double u = 0.0;
        for (std::size_t i = 0; i < n; ++i) u -= k_z(0, i) * s[n + i];
        for (std::size_t i = 0; i < m; ++i) u -= k_eta(0, i) * s[2 * n + i];
        return u;
    };

    loop.deriv = [=](const double* s, double r, double w, double* ds) {
        double y = 0.0;
        for (std::size_t i = 0; i < n; ++i) y += plant_copy.h(0, i) * s[i];
        double yh = 0.0;
        for (std::size_t i = 0; i < n; ++i) yh += est_model.h(0, i) * s[n + i];
        const double e = r - y;
        const double us = std::clamp(control(s), -sat_limit, sat_limit);

        for (std::size_t i = 0; i < n; ++i) {
            double dx = plant_copy.g(i, 0) * us + gw(i, 0) * w;
            double dxh = est_model.g(i, 0) * us + l_x(i, 0) * (y - yh);
            for (std::size_t jj = 0; jj < n; ++jj) {
                dx += plant_copy.f(i, jj) * s[jj];
                dxh += est_model.f(i, jj) * s[n + jj];
            }
            ds[i] = dx;
            ds[n + i] = dxh;
        }
        for (std::size_t i = 0; i < m; ++i) {
            double de = b(i, 0) * (-e); // chain driven by -e
            for (std::size_t jj = 0; jj < m; ++jj) de += a(i, jj) * s[2 * n + jj];
            ds[2 * n + i] = de;
        }
    };

    loop.taps = [=](const double* s, double r, double) {
        double y = 0.0;
        for (std::size_t i = 0; i < n; ++i) y += plant_copy.h(0, i) * s[i];
        Taps t;
        t.y = y;
        t.e = r - y;
        t.u = std::clamp(control(s), -sat_limit, sat_limit);
        return t;
    };
    return loop;
}

StateSpace loop_gain_at_input(const StateSpace& plant, const ImController& ctrl) {
    auto [a, b] = build_error_chain(ctrl.d);
    const std::size_t n = plant.order(), m = ctrl.d.degree();

    // open the loop at the plant input: the compensator keeps integrating
    // its own output, the plant sees the injected signal
    Matrix f(2 * n + m, 2 * n + m);
    f.set_block(0, 0, plant.f);
    f.set_block(n, 0, ctrl.l_x * plant.h);
    f.set_block(n, n, plant.f - plant.g * ctrl.k_z - ctrl.l_x * plant.h);
    f.set_block(n, 2 * n, -(plant.g * ctrl.k_eta));
    f.set_block(2 * n, 0, b * plant.h); // chain sees -e = y (r = 0)
    f.set_block(2 * n, 2 * n, a);
    Matrix g(2 * n + m, 1);
    g.set_block(0, 0, plant.g);
    // negated return difference: loop gain = -(u_c / u_injected)
    Matrix h(1, 2 * n + m);
    h.set_block(0, n, ctrl.k_z);
    h.set_block(0, 2 * n, ctrl.k_eta);
    return StateSpace(f, g, h, Matrix(1, 1));
}

nlohmann::json ImController::to_json() const {
    nlohmann::json j;
    j["method"] = "im";
    j["kz"] = k_z.data();
    j["keta"] = k_eta.data();
    j["d"] = d.coeffs();
    j["lx"] = l_x.data();
    return j;
}

ImController ImController::from_json(const nlohmann::json& j, const StateSpace& plant) {
    for (const char* key : {"kz", "keta", "d", "lx"})
        if (!j.contains(key)) throw DomainError(std::string("im controller JSON missing \"") + key + "\"");
    auto kz = j["kz"].get<std::vector<double>>();
    auto keta = j["keta"].get<std::vector<double>>();
    auto lx = j["lx"].get<std::vector<double>>();
    Polynomial d(j["d"].get<std::vector<double>>());
    if (kz.size() != plant.order() || lx.size() != plant.order() || keta.size() != d.degree())
        throw DimensionError("im controller JSON dimensions do not match the plant/model");
    Matrix k_z(1, kz.size());
    for (std::size_t i = 0; i < kz.size(); ++i) k_z(0, i) = kz[i];
    Matrix k_eta(1, keta.size());
    for (std::size_t i = 0; i < keta.size(); ++i) k_eta(0, i) = keta[i];
    Matrix l_x(lx.size(), 1);
    for (std::size_t i = 0; i < lx.size(); ++i) l_x(i, 0) = lx[i];
    return {k_z, k_eta, d, l_x, plant};
}

} // namespace servoforge
