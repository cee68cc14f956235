#include "servoforge/design_mf.hpp"

#include <algorithm>
#include <cmath>

#include "servoforge/errors.hpp"
#include "servoforge/placement.hpp"

namespace servoforge {

std::pair<Matrix, Matrix> solve_mf_gains(const StateSpace& plant, const Matrix& model_a,
                                         const Matrix& model_c) {
    if (plant.outputs() != 1 || plant.inputs() != 1)
        throw DimensionError("solve_mf_gains: plant must be SISO");
    if (plant.j.max_abs() != 0.0)
        throw DomainError("solve_mf_gains: plant must be strictly proper (y = Hx)");
    if (!model_a.square() || model_c.rows() != 1 || model_c.cols() != model_a.cols())
        throw DimensionError("solve_mf_gains: model dimensions inconsistent");

    const std::size_t n = plant.order(), nz = model_a.rows();

    // solvability: model eigenvalues must avoid the plant's transmission zeros
    std::vector<Complex> plant_zeros = transmission_zeros(plant);
    for (const Complex& lam : eigenvalues(model_a))
        for (const Complex& z : plant_zeros)
            if (std::abs(z - lam) < 1e-6)
                throw InfeasibleError("solve_mf_gains: model eigenvalue " + std::to_string(lam.real()) +
                                      (lam.imag() < 0 ? " - " : " + ") + std::to_string(std::abs(lam.imag())) +
                                      "i coincides with a plant transmission zero");

    // vectorize column-major, unknowns [vec(M); vec(N)]:
    //   (I (x) F - A^T (x) I) vec(M) + (I (x) G) vec(N) = 0
    //   (I (x) H) vec(M)                                = vec(C)
    const std::size_t rows = n * nz + nz, cols_m = n * nz, cols_n = nz;
    Matrix sys(rows, cols_m + cols_n);
    sys.set_block(0, 0, kron(Matrix::identity(nz), plant.f) - kron(model_a.transpose(), Matrix::identity(n)));
    sys.set_block(0, cols_m, kron(Matrix::identity(nz), plant.g));
    sys.set_block(n * nz, 0, kron(Matrix::identity(nz), plant.h));
    Matrix rhs(rows, 1);
    for (std::size_t col = 0; col < nz; ++col) rhs(n * nz + col, 0) = model_c(0, col);

    Matrix sol;
    try {
        sol = solve_linear(sys, rhs);
    } catch (const SingularityError&) {
        throw InfeasibleError("solve_mf_gains: matching equations are singular for this plant/model pair");
    }

    Matrix m(n, nz), n_ff(1, nz);
    for (std::size_t col = 0; col < nz; ++col) {
        for (std::size_t row = 0; row < n; ++row) m(row, col) = sol(col * n + row, 0);
        n_ff(0, col) = sol(cols_m + col, 0);
    }

    // contract check: both residuals must vanish to solver precision
    double scale1 = 1.0 + plant.f.frobenius_norm() * m.frobenius_norm();
    if ((plant.f * m - m * model_a + plant.g * n_ff).frobenius_norm() > 1e-8 * scale1 ||
        (plant.h * m - model_c).frobenius_norm() > 1e-8)
        throw NumericalError("solve_mf_gains: residuals exceed tolerance after solve");
    return {m, n_ff};
}

MfController design_mf(const StateSpace& plant, const SignalModel& model,
                       std::span<const Complex> control_poles) {
    Matrix k = place(plant.f, plant.g, control_poles);
    auto [m, n_ff] = solve_mf_gains(plant, model.a, model.c);
    return {k, m, n_ff, model, plant};
}

ClosedLoop realize_closed_loop_mf(const StateSpace& plant, const MfController& ctrl, double sat_limit) {
    if (plant.order() != ctrl.plant_model.order() || plant.outputs() != 1 || plant.inputs() != 1)
        throw DimensionError("realize_closed_loop_mf: plant does not match the controller dimensions");
    if (!(sat_limit > 0.0)) throw DomainError("realize_closed_loop_mf: saturation limit must be positive");

    const std::size_t n = plant.order(), nz = ctrl.model.order();
    const Matrix k = ctrl.k, m = ctrl.m, n_ff = ctrl.n_ff;
    const Matrix a = ctrl.model.a, c = ctrl.model.c;
    const Matrix gw = plant.disturbance_input();
    const StateSpace plant_copy = plant;

    ClosedLoop loop;
    loop.state_dim = n + nz; // [x; z]
    loop.sat_limit = sat_limit;
    loop.has_eta = true;
    loop.initial_state.assign(n + nz, 0.0);
    for (std::size_t i = 0; i < nz; ++i) loop.initial_state[n + i] = ctrl.model.b(i, 0);

    auto control = [n, nz, k, m, n_ff](const double* s) {
        // u = N z - K (x - M z)
        double u = 0.0;
        for (std::size_t jj = 0; jj < nz; ++jj) u += n_ff(0, jj) * s[n + jj];
        for (std::size_t i = 0; i < n; ++i) {
            double mz = 0.0;
            for (std::size_t jj = 0; jj < nz; ++jj) mz += m(i, jj) * s[n + jj];
            u -= k(0, i) * (s[i] - mz);
        }
        return u;
    };

    loop.deriv = [=](const double* s, double, double w, double* ds) {
        const double us = std::clamp(control(s), -sat_limit, sat_limit);
        for (std::size_t i = 0; i < n; ++i) {
            double dx = plant_copy.g(i, 0) * us + gw(i, 0) * w;
            for (std::size_t jj = 0; jj < n; ++jj) dx += plant_copy.f(i, jj) * s[jj];
            ds[i] = dx;
        }
        for (std::size_t i = 0; i < nz; ++i) {
            double dz = 0.0;
            for (std::size_t jj = 0; jj < nz; ++jj) dz += a(i, jj) * s[n + jj];
            ds[n + i] = dz;
        }
    };

    loop.taps = [=](const double* s, double, double) {
        double y = 0.0;
        for (std::size_t i = 0; i < n; ++i) y += plant_copy.h(0, i) * s[i];
        double eta = 0.0;
        for (std::size_t jj = 0; jj < nz; ++jj) eta += c(0, jj) * s[n + jj];
        Taps t;
        t.y = y;
        t.eta = eta;
        t.e = y - eta; // tracking error against the model output
        t.u = std::clamp(control(s), -sat_limit, sat_limit);
        return t;
    };
    return loop;
}

nlohmann::json MfController::to_json() const {
    nlohmann::json j;
    j["method"] = "mf";
    j["k"] = k.data();
    j["m"] = matrix_to_json(m);
    j["n"] = n_ff.data();
    j["a"] = matrix_to_json(model.a);
    j["b"] = model.b.data();
    j["c"] = model.c.data();
    return j;
}

MfController MfController::from_json(const nlohmann::json& j, const StateSpace& plant) {
    for (const char* key : {"k", "m", "n", "a", "b", "c"})
        if (!j.contains(key)) throw DomainError(std::string("mf controller JSON missing \"") + key + "\"");
    Matrix a = matrix_from_json(j["a"], "a");
    auto bv = j["b"].get<std::vector<double>>();
    auto cv = j["c"].get<std::vector<double>>();
    Matrix b(bv.size(), 1), c(1, cv.size());
    for (std::size_t i = 0; i < bv.size(); ++i) b(i, 0) = bv[i];
    for (std::size_t i = 0; i < cv.size(); ++i) c(0, i) = cv[i];
    SignalModel model = SignalModel::from_matrices(a, b, c);

    auto kv = j["k"].get<std::vector<double>>();
    Matrix k(1, kv.size());
    for (std::size_t i = 0; i < kv.size(); ++i) k(0, i) = kv[i];
    Matrix m = matrix_from_json(j["m"], "m");
    auto nv = j["n"].get<std::vector<double>>();
    Matrix n_ff(1, nv.size());
    for (std::size_t i = 0; i < nv.size(); ++i) n_ff(0, i) = nv[i];
    if (kv.size() != plant.order() || m.rows() != plant.order() || m.cols() != a.rows() ||
        nv.size() != a.rows())
        throw DimensionError("mf controller JSON dimensions do not match the plant/model");
    return {k, m, n_ff, model, plant};
}

} // namespace servoforge
