#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "servoforge/design_mf.hpp"
#include "servoforge/errors.hpp"

using namespace servoforge;
using servoforge::testing::matches_multiset;
using servoforge::testing::servo_plant;

namespace {

const double kSqrt3 = std::sqrt(3.0);

SignalModel oscillator_model() {
    // unit oscillator: eta = sin(t) from an impulse through b
    return SignalModel::from_matrices(Matrix{{0.0, 1.0}, {-1.0, 0.0}}, Matrix::column_vector({0.0, 1.0}),
                                      Matrix::row_vector({1.0, 0.0}));
}

std::vector<Complex> control_poles() { return {{-1.0, kSqrt3}, {-1.0, -kSqrt3}}; }

MfController oscillator_controller() {
    return design_mf(servo_plant(), oscillator_model(), control_poles());
}

} // namespace

TEST_CASE("matching equations solve with vanishing residuals") {
    StateSpace plant = servo_plant();
    SignalModel model = oscillator_model();
    auto [m, n] = solve_mf_gains(plant, model.a, model.c);
    CHECK((plant.f * m - m * model.a + plant.g * n).frobenius_norm() < 1e-10);
    CHECK((plant.h * m - model.c).frobenius_norm() < 1e-10);
}

TEST_CASE("following the plant itself admits the identity solution") {
    StateSpace plant = servo_plant();
    auto [m, n] = solve_mf_gains(plant, plant.f, plant.h);
    CHECK((plant.f * m - m * plant.f + plant.g * n).frobenius_norm() < 1e-10);
    CHECK((plant.h * m - plant.h).frobenius_norm() < 1e-10);
}

TEST_CASE("model eigenvalue on a plant zero is infeasible") {
    // plant (s^2+1)/(s+1)^3 blocks the unit oscillator
    StateSpace blocked =
        to_state_space(RationalSiso(Polynomial({1.0, 0.0, 1.0}), Polynomial({1.0, 3.0, 3.0, 1.0})));
    SignalModel model = oscillator_model();
    CHECK_THROWS_AS(solve_mf_gains(blocked, model.a, model.c), InfeasibleError);
}

TEST_CASE("design places the feedback poles and keeps the residual contract") {
    MfController ctrl = oscillator_controller();
    StateSpace plant = servo_plant();
    CHECK(matches_multiset(eigenvalues(plant.f - plant.g * ctrl.k), control_poles(), 1e-6));
    CHECK(std::abs(ctrl.k(0, 0) - 4.0) < 1e-9);
    CHECK(std::abs(ctrl.k(0, 1) - 1.0) < 1e-9);
    CHECK((plant.f * ctrl.m - ctrl.m * ctrl.model.a + plant.g * ctrl.n_ff).frobenius_norm() < 1e-8);
    CHECK((plant.h * ctrl.m - ctrl.model.c).frobenius_norm() < 1e-8);
}

TEST_CASE("transform identity holds at sample points off the spectra") {
    // X(s) built from the matched gains equals M (sI-A)^-1 B minus the
    // transient term (sI-F+GK)^-1 M B
    MfController ctrl = oscillator_controller();
    StateSpace plant = servo_plant();
    const std::size_t n = plant.order(), nz = ctrl.model.order();

    std::mt19937 rng(3);
    std::uniform_real_distribution<double> coin(-2.0, 2.0);
    for (int rep = 0; rep < 10; ++rep) {
        Complex s(coin(rng), std::abs(coin(rng)) + 0.25);

        CMatrix si_fgk(n, n), si_a(nz, nz);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                si_fgk(i, j) = (i == j ? s : Complex(0, 0)) -
                               Complex(plant.f(i, j) - (plant.g * ctrl.k)(i, j), 0.0);
        for (std::size_t i = 0; i < nz; ++i)
            for (std::size_t j = 0; j < nz; ++j)
                si_a(i, j) = (i == j ? s : Complex(0, 0)) - Complex(ctrl.model.a(i, j), 0.0);

        CMatrix inv_fgk = inverse(si_fgk);
        CMatrix inv_a = inverse(si_a);
        CMatrix gm = CMatrix::from_real(plant.g * ctrl.n_ff + plant.g * ctrl.k * ctrl.m);
        CMatrix b = CMatrix::from_real(ctrl.model.b);
        CMatrix mm = CMatrix::from_real(ctrl.m);

        CMatrix lhs = inv_fgk * gm * inv_a * b;
        CMatrix rhs = mm * (inv_a * b) - inv_fgk * (mm * b);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(lhs(i, 0) - rhs(i, 0)));
        CHECK(err < 1e-8);
    }
}

TEST_CASE("zero initial conditions stay at rest") {
    ClosedLoop loop = realize_closed_loop_mf(servo_plant(), oscillator_controller(), 1.0);
    std::vector<double> x0(loop.state_dim, 0.0);
    SimTrace tr = simulate(loop, SignalSpec::zero(), SignalSpec::zero(), 2.0, 1e-3, &x0);
    for (double y : tr.y) CHECK(y == 0.0);
    for (double e : tr.e) CHECK(e == 0.0);
}

TEST_CASE("impulse-driven model is followed on the nominal plant") {
    // z(0) = 0.5 B keeps the required control inside the saturation bound
    MfController ctrl = oscillator_controller();
    ClosedLoop loop = realize_closed_loop_mf(servo_plant(), ctrl, 1.0);
    std::vector<double> x0(loop.state_dim, 0.0);
    x0[2] = 0.0;
    x0[3] = 0.5;
    SimTrace tr = simulate(loop, SignalSpec::zero(), SignalSpec::zero(), 25.0, 1e-3, &x0);
    REQUIRE(!tr.eta.empty());
    CHECK(steady_state_error(tr, 0.2) < 1e-3);

    // the default initial state is the full impulse z(0) = B
    CHECK(loop.initial_state[3] == 1.0);
}

TEST_CASE("tracking error decays at the placed feedback rate") {
    MfController ctrl = oscillator_controller();
    ClosedLoop loop = realize_closed_loop_mf(servo_plant(), ctrl, 1e12);
    std::vector<double> x0 = {0.3, -0.2, 0.0, 0.5};
    SimTrace tr = simulate(loop, SignalSpec::zero(), SignalSpec::zero(), 12.0, 1e-3, &x0);

    // |y - eta| <= C exp(max Re lambda t): fit the envelope decay rate over
    // the mid-trace and compare against the placed real part
    auto env_at = [&](double t0) {
        std::size_t i0 = static_cast<std::size_t>(t0 / tr.h);
        double peak = 0.0;
        for (std::size_t i = i0; i < i0 + 4000 && i < tr.e.size(); ++i)
            peak = std::max(peak, std::abs(tr.e[i]));
        return peak;
    };
    double p1 = env_at(2.0), p2 = env_at(6.0);
    REQUIRE(p1 > 0.0);
    REQUIRE(p2 > 0.0);
    double rate = std::log(p2 / p1) / 4.0;
    CHECK(rate < -0.8); // placed poles put Re = -1
}

TEST_CASE("perturbed plant leaves a persistent following error") {
    StateSpace perturbed = servo_plant();
    perturbed.f(1, 1) = -1.1;
    MfController ctrl = oscillator_controller();
    ClosedLoop loop = realize_closed_loop_mf(perturbed, ctrl, 1.0);
    std::vector<double> x0(loop.state_dim, 0.0);
    x0[3] = 0.5;
    SimTrace tr = simulate(loop, SignalSpec::zero(), SignalSpec::zero(), 25.0, 1e-3, &x0);
    CHECK(steady_state_error(tr, 0.2) > 1e-3); // does not converge
}

TEST_CASE("controller JSON round trip") {
    MfController ctrl = oscillator_controller();
    nlohmann::json j = ctrl.to_json();
    CHECK(j["method"] == "mf");
    MfController back = MfController::from_json(j, servo_plant());
    CHECK(back.k(0, 0) == ctrl.k(0, 0));
    CHECK(back.m(1, 1) == ctrl.m(1, 1));
    CHECK(back.n_ff(0, 1) == ctrl.n_ff(0, 1));
}
