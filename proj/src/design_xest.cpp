#include "servoforge/design_xest.hpp"

#include <algorithm>
#include <cmath>

#include "servoforge/errors.hpp"
#include "servoforge/placement.hpp"

namespace servoforge {

StateSpace build_extended(const StateSpace& plant, const SignalModel& model) {
    if (plant.outputs() != 1 || plant.inputs() != 1)
        throw DimensionError("build_extended: plant must be SISO");
    if (plant.j.max_abs() != 0.0)
        throw DomainError("build_extended: plant must be strictly proper (y = Hx)");

    // a plant zero at a generator eigenvalue blocks that signal component
    std::vector<Complex> plant_zeros = transmission_zeros(plant);
    for (const Complex& lam : eigenvalues(model.a))
        for (const Complex& z : plant_zeros)
            if (std::abs(z - lam) < 1e-6)
                throw InfeasibleError(
                    "build_extended: plant has a transmission zero at a generator eigenvalue (" +
                    std::to_string(lam.real()) + (lam.imag() < 0 ? " - " : " + ") +
                    std::to_string(std::abs(lam.imag())) + "i)");

    const std::size_t n = plant.order(), m = model.order();
    Matrix f(n + m, n + m);
    f.set_block(0, 0, plant.f);
    f.set_block(0, n, plant.g * model.c);
    f.set_block(n, n, model.a);
    Matrix g = vstack(plant.g, Matrix(m, 1));
    Matrix h = hstack(plant.h, Matrix(1, m));
    return StateSpace(f, g, h, Matrix(1, 1));
}

XestController design_xest(const StateSpace& plant, const SignalModel& model,
                           std::span<const Complex> control_poles,
                           std::span<const Complex> estimator_poles) {
    const std::size_t n = plant.order(), m = model.order();
    Matrix k_zx = place(plant.f, plant.g, control_poles);
    StateSpace ext = build_extended(plant, model);
    Matrix lt = place_estimator(ext.f, ext.h, estimator_poles);
    return {k_zx, lt.block(0, 0, n, 1), lt.block(n, 0, m, 1), model, plant};
}

StateSpace controller_realization(const XestController& ctrl) {
    const StateSpace& plant = ctrl.plant_model;
    const std::size_t n = plant.order(), m = ctrl.model.order();
    Matrix f(n + m, n + m);
    f.set_block(0, 0, plant.f - ctrl.l_zx * plant.h - plant.g * ctrl.k_zx);
    f.set_block(n, 0, ctrl.l_nx * plant.h);
    f.set_block(n, n, ctrl.model.a);
    Matrix g = vstack(ctrl.l_zx, ctrl.l_nx);
    Matrix h = hstack(-ctrl.k_zx, -ctrl.model.c);
    return StateSpace(f, g, h, Matrix(1, 1));
}

ClosedLoop realize_closed_loop_xest(const StateSpace& plant, const XestController& ctrl,
                                    double sat_limit) {
    if (plant.order() != ctrl.plant_model.order() || plant.outputs() != 1 || plant.inputs() != 1)
        throw DimensionError("realize_closed_loop_xest: plant does not match the controller dimensions");
    if (!(sat_limit > 0.0))
        throw DomainError("realize_closed_loop_xest: saturation limit must be positive");

    const std::size_t n = plant.order(), m = ctrl.model.order();
    const StateSpace est_model = ctrl.plant_model;
    const Matrix gw = plant.disturbance_input();
    const Matrix k_zx = ctrl.k_zx, l_zx = ctrl.l_zx, l_nx = ctrl.l_nx;
    const Matrix a = ctrl.model.a, c = ctrl.model.c;
    const StateSpace plant_copy = plant;
    const Matrix gc = est_model.g * c;

    ClosedLoop loop;
    loop.state_dim = 2 * n + m; // [x; z_hat; eta_hat]
    loop.sat_limit = sat_limit;
    loop.initial_state.assign(loop.state_dim, 0.0);

    auto control = [n, m, k_zx, c](const double* s) {
        double u = 0.0;
        for (std::size_t i = 0; i < n; ++i) u -= k_zx(0, i) * s[n + i];
        for (std::size_t i = 0; i < m; ++i) u -= c(0, i) * s[2 * n + i];
        return u;
    };

    // The estimator observes the error channel: in the design equations the
    // control enters the error-producing system with opposite sign to the
    // physical plant, so the observer is driven by (y - r) to stay
    // consistent with u = -k_zx z_hat - c eta_hat at the physical input.
    loop.deriv = [=](const double* s, double r, double w, double* ds) {
        double y = 0.0;
        for (std::size_t i = 0; i < n; ++i) y += plant_copy.h(0, i) * s[i];
        double zh_out = 0.0;
        for (std::size_t i = 0; i < n; ++i) zh_out += est_model.h(0, i) * s[n + i];
        const double innov = (y - r) - zh_out;
        const double us = std::clamp(control(s), -sat_limit, sat_limit);

        for (std::size_t i = 0; i < n; ++i) {
            double dx = plant_copy.g(i, 0) * us + gw(i, 0) * w;
            double dzh = est_model.g(i, 0) * us + l_zx(i, 0) * innov;
            for (std::size_t jj = 0; jj < n; ++jj) {
                dx += plant_copy.f(i, jj) * s[jj];
                dzh += est_model.f(i, jj) * s[n + jj];
            }
            for (std::size_t jj = 0; jj < m; ++jj) dzh += gc(i, jj) * s[2 * n + jj];
            ds[i] = dx;
            ds[n + i] = dzh;
        }
        for (std::size_t i = 0; i < m; ++i) {
            double de = l_nx(i, 0) * innov;
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

StateSpace loop_gain_at_input(const StateSpace& plant, const XestController& ctrl) {
    const std::size_t n = plant.order(), m = ctrl.model.order();
    Matrix f(2 * n + m, 2 * n + m);
    f.set_block(0, 0, plant.f);
    f.set_block(n, 0, ctrl.l_zx * plant.h);
    f.set_block(n, n, plant.f - plant.g * ctrl.k_zx - ctrl.l_zx * plant.h);
    f.set_block(2 * n, 0, ctrl.l_nx * plant.h);
    f.set_block(2 * n, n, -(ctrl.l_nx * plant.h));
    f.set_block(2 * n, 2 * n, ctrl.model.a);
    Matrix g(2 * n + m, 1);
    g.set_block(0, 0, plant.g);
    Matrix h(1, 2 * n + m);
    h.set_block(0, n, ctrl.k_zx);
    h.set_block(0, 2 * n, ctrl.model.c);
    return StateSpace(f, g, h, Matrix(1, 1));
}

nlohmann::json XestController::to_json() const {
    nlohmann::json j;
    j["method"] = "xest";
    j["kzx"] = k_zx.data();
    j["lzx"] = l_zx.data();
    j["lnx"] = l_nx.data();
    j["a"] = matrix_to_json(model.a);
    j["c"] = model.c.data();
    j["b"] = model.b.data();
    return j;
}

XestController XestController::from_json(const nlohmann::json& j, const StateSpace& plant) {
    for (const char* key : {"kzx", "lzx", "lnx", "a", "c"})
        if (!j.contains(key))
            throw DomainError(std::string("xest controller JSON missing \"") + key + "\"");
    Matrix a = matrix_from_json(j["a"], "a");
    auto cv = j["c"].get<std::vector<double>>();
    Matrix c(1, cv.size());
    for (std::size_t i = 0; i < cv.size(); ++i) c(0, i) = cv[i];
    Matrix b(a.rows(), 1);
    if (j.contains("b")) {
        auto bv = j["b"].get<std::vector<double>>();
        if (bv.size() != a.rows()) throw DimensionError("xest controller JSON: b has wrong length");
        for (std::size_t i = 0; i < bv.size(); ++i) b(i, 0) = bv[i];
    } else {
        b(0, 0) = 1.0;
    }
    SignalModel model = SignalModel::from_matrices(a, b, c);

    auto kzx = j["kzx"].get<std::vector<double>>();
    auto lzx = j["lzx"].get<std::vector<double>>();
    auto lnx = j["lnx"].get<std::vector<double>>();
    if (kzx.size() != plant.order() || lzx.size() != plant.order() || lnx.size() != a.rows())
        throw DimensionError("xest controller JSON dimensions do not match the plant/model");
    Matrix k_zx(1, kzx.size());
    for (std::size_t i = 0; i < kzx.size(); ++i) k_zx(0, i) = kzx[i];
    Matrix l_zx(lzx.size(), 1);
    for (std::size_t i = 0; i < lzx.size(); ++i) l_zx(i, 0) = lzx[i];
    Matrix l_nx(lnx.size(), 1);
    for (std::size_t i = 0; i < lnx.size(); ++i) l_nx(i, 0) = lnx[i];
    return {k_zx, l_zx, l_nx, model, plant};
}

} // namespace servoforge
