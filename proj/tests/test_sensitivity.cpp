#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "servoforge/design_im.hpp"
#include "servoforge/errors.hpp"
#include "servoforge/sensitivity.hpp"

using namespace servoforge;
using servoforge::testing::coupled_type0_loop;
using servoforge::testing::coupled_type1_loop;
using servoforge::testing::servo_plant;

namespace {

constexpr double kPi = std::numbers::pi;

LoopGain lead_over_s2() {
    return LoopGain(RationalSiso(Polynomial({1.0, 1.0}), Polynomial({0.0, 0.0, 1.0})));
}

// random strictly proper SISO loop with a stable closed loop by
// construction: pick stable closed poles, pick a low-order numerator, and
// set den = phi_cl - num so that den + num = phi_cl exactly
RationalSiso random_stable_loop(std::mt19937& rng, std::size_t n) {
    std::uniform_real_distribution<double> re(-3.0, -0.3), im(0.2, 3.0), c(-1.0, 1.0);
    std::vector<Complex> closed;
    while (closed.size() < n) {
        if (n - closed.size() >= 2 && (rng() & 1u)) {
            double a = re(rng), b = im(rng);
            closed.emplace_back(a, b);
            closed.emplace_back(a, -b);
        } else {
            closed.emplace_back(re(rng), 0.0);
        }
    }
    Polynomial phi_cl = Polynomial::from_roots(closed);
    std::vector<double> num_coeffs(n - 1, 0.0); // degree <= n-2: relative degree >= 2
    for (auto& v : num_coeffs) v = c(rng);
    Polynomial num(num_coeffs);
    return {num, phi_cl - num};
}

} // namespace

TEST_CASE("closed-form sensitivity from pole shifts") {
    std::vector<Complex> open = {{0, 0}, {0, 0}};
    std::vector<Complex> closed = {{-0.5, 0.8660254}, {-0.5, -0.8660254}};
    CHECK(closed_form_sensitivity(open, closed) == doctest::Approx(-kPi / 2).epsilon(1e-12));

    std::vector<Complex> open2 = {{-1, 0}, {-2, 0}};
    std::vector<Complex> closed2 = {{-2, 0}, {-4, 0}};
    CHECK(closed_form_sensitivity(open2, closed2) == doctest::Approx(-3 * kPi / 2).epsilon(1e-12));

    CHECK(closed_form_sensitivity(open2, open2) == 0.0);

    // unstable open-loop pole contributes an extra positive area
    std::vector<Complex> open3 = {{1, 0}, {-3, 0}};
    std::vector<Complex> closed3 = {{-1, 0}, {-3, 0}};
    // shift = -1 - 1 = -2, RHP term = 2*1
    CHECK(closed_form_sensitivity(open3, closed3) == doctest::Approx(kPi / 2 * (-2.0 + 2.0)));

    std::vector<Complex> short_list = {{-1, 0}};
    CHECK_THROWS_AS(closed_form_sensitivity(open, short_list), DomainError);
    std::vector<Complex> not_paired = {{-1, 1}, {-2, 0}};
    CHECK_THROWS_AS(closed_form_sensitivity(not_paired, closed3), DomainError);
}

TEST_CASE("closed-form complementary integral") {
    const double h3 = std::sqrt(3.0) / 2.0;
    std::vector<Complex> closed = {{-0.5, h3}, {-0.5, -h3}};
    std::vector<Complex> zs = {{-1.0, 0.0}};
    ExtReal v = closed_form_complementary(closed, zs, 2);
    REQUIRE(!v.inf);
    CHECK(v.value == doctest::Approx(0.0).epsilon(1e-9));

    // Type-[1 1] pair with one RHP zero: value reproduces to 4 decimals
    Polynomial phi({4.0, 4.0, 6.0, 3.0, 1.0});
    std::vector<Complex> closed4 = poly_roots(phi);
    std::vector<Complex> zs4 = {{1.2360680, 0.0}, {-3.2360680, 0.0}};
    ExtReal v4 = closed_form_complementary(closed4, zs4, 1);
    REQUIRE(!v4.inf);
    CHECK(v4.value == doctest::Approx(0.1854).epsilon(1e-3));

    CHECK(closed_form_complementary(closed, zs, 0).inf);
    std::vector<Complex> origin_zero = {{0.0, 0.0}};
    CHECK_THROWS_AS(closed_form_complementary(closed, origin_zero, 1), DomainError);
}

TEST_CASE("numeric sensitivity integral: double-integrator lead loop") {
    IntegralValue v = numeric_sensitivity_integral(lead_over_s2());
    CHECK(std::abs(v.value - (-kPi / 2)) < 1e-2);
}

TEST_CASE("numeric sensitivity integral: coupled two-channel loops") {
    IntegralValue fast = numeric_sensitivity_integral(LoopGain(coupled_type0_loop()));
    CHECK(std::abs(fast.value - (-3 * kPi / 2)) < 2e-2);

    IntegralValue balanced = numeric_sensitivity_integral(LoopGain(coupled_type1_loop()));
    CHECK(std::abs(balanced.value) < 2e-2);
}

TEST_CASE("numeric complementary integral") {
    ExtIntegralValue v = numeric_complementary_integral(lead_over_s2());
    REQUIRE(!v.value.inf);
    CHECK(std::abs(v.value.value) < 1e-2);

    ExtIntegralValue v3 = numeric_complementary_integral(LoopGain(coupled_type1_loop()));
    REQUIRE(!v3.value.inf);
    CHECK(std::abs(v3.value.value - 0.1854) < 5e-3);

    ExtIntegralValue v2 = numeric_complementary_integral(LoopGain(coupled_type0_loop()));
    CHECK(v2.value.inf);
}

TEST_CASE("unstable closed loops are refused") {
    // L = -4/(s+1): 1 + L has a RHP root
    LoopGain bad(RationalSiso(Polynomial({-4.0}), Polynomial({1.0, 1.0})));
    CHECK_THROWS_AS(numeric_sensitivity_integral(bad), InstabilityError);
    CHECK_THROWS_AS(audit(bad), InstabilityError);
}

TEST_CASE("limit coefficients from the loop structure") {
    RationalSiso lead(Polynomial({1.0, 1.0}), Polynomial({0.0, 0.0, 1.0}));
    LimitCoefficients lim = limit_coefficients(lead);
    REQUIRE(!lim.k_h.inf);
    CHECK(lim.k_h.value == doctest::Approx(1.0));
    CHECK(lim.k_v.inf); // double integrator: velocity constant diverges

    RationalSiso type1(Polynomial({2.0}), Polynomial({0.0, 3.0, 1.0})); // 2/(s(s+3))
    LimitCoefficients lim1 = limit_coefficients(type1);
    REQUIRE(!lim1.k_v.inf);
    CHECK(lim1.k_v.value == doctest::Approx(2.0 / 3.0));
    CHECK(lim1.k_h.value == 0.0); // relative degree 2

    RationalSiso type0(Polynomial({2.0}), Polynomial({3.0, 1.0}));
    CHECK(limit_coefficients(type0).k_v.value == 0.0);
    CHECK(!limit_coefficients(type0).k_h.inf); // relative degree 1: k_h = 2

    RationalSiso proper(Polynomial({1.0, 1.0}), Polynomial({2.0, 1.0}));
    CHECK(limit_coefficients(proper).k_h.inf);

    CHECK_THROWS_AS(limit_coefficients(RationalSiso(Polynomial({0.0, 0.0, 1.0}), Polynomial({1.0, 1.0}))),
                    DomainError);
}

TEST_CASE("high-frequency limit equals the pole-sum difference for strictly proper loops") {
    std::mt19937 rng(2024);
    for (int rep = 0; rep < 10; ++rep) {
        // relative degree exactly 1: bump the numerator degree to n-1
        RationalSiso base = random_stable_loop(rng, 3 + rep % 3);
        std::vector<double> nc = base.num().coeffs();
        nc.resize(base.den().degree(), 0.0);
        nc.back() = 0.5 + 0.1 * rep;
        RationalSiso l(Polynomial(nc), base.den());

        LimitCoefficients lim = limit_coefficients(l);
        REQUIRE(!lim.k_h.inf);
        double open_sum = 0.0, closed_sum = 0.0;
        for (const Complex& p : poly_roots(l.den())) open_sum += p.real();
        for (const Complex& p : closed_loop_poles(LoopGain(l))) closed_sum += p.real();
        CHECK(std::abs(lim.k_h.value - (open_sum - closed_sum)) < 1e-8);
    }
}

TEST_CASE("trace preservation: relative degree two keeps the pole sum") {
    std::mt19937 rng(77);
    for (int rep = 0; rep < 10; ++rep) {
        RationalSiso l = random_stable_loop(rng, 3 + rep % 3);
        double open_sum = 0.0, closed_sum = 0.0;
        for (const Complex& p : poly_roots(l.den())) open_sum += p.real();
        for (const Complex& p : closed_loop_poles(LoopGain(l))) closed_sum += p.real();
        CHECK(std::abs(open_sum - closed_sum) < 1e-8);

        // hence the closed form reduces to pi * sum of RHP open poles
        double rhp = 0.0;
        for (const Complex& p : poly_roots(l.den()))
            if (p.real() > 1e-9) rhp += p.real();
        double cf = closed_form_sensitivity(poly_roots(l.den()), closed_loop_poles(LoopGain(l)));
        CHECK(std::abs(cf - kPi * rhp) < 1e-8);
    }
}

TEST_CASE("Truxal route matches the complementary closed form for Type-1 loops") {
    // minimum-phase Type 1: (pi/2)(sum 1/p_cl - sum 1/z) = -pi/(2 k_v)
    for (double gain : {0.5, 1.0, 2.0}) {
        RationalSiso l(Polynomial({2.0 * gain, gain}), Polynomial({0.0, 2.0, 3.0, 1.0}));
        LimitCoefficients lim = limit_coefficients(l);
        REQUIRE(!lim.k_v.inf);
        std::vector<Complex> closed = closed_loop_poles(LoopGain(l));
        for (const Complex& p : closed) REQUIRE(p.real() < 0.0);
        ExtReal cf = closed_form_complementary(closed, poly_roots(l.num()), 1);
        REQUIRE(!cf.inf);
        CHECK(std::abs(cf.value - (-kPi / (2.0 * lim.k_v.value))) < 1e-8);
    }
}

TEST_CASE("randomized numeric against closed form, fifty loops") {
    std::mt19937 rng(424242);
    int checked = 0;
    while (checked < 50) {
        RationalSiso l = random_stable_loop(rng, 2 + checked % 4);
        // discard near-marginal constructions: quadrature effort explodes
        bool usable = true;
        for (const Complex& p : poly_roots(l.den()))
            if (std::abs(p.real()) < 5e-2 && std::abs(p.imag()) > 1e-6) usable = false;
        if (!usable) continue;

        double cf = closed_form_sensitivity(poly_roots(l.den()), closed_loop_poles(LoopGain(l)));
        IntegralValue nm = numeric_sensitivity_integral(LoopGain(l));
        CHECK(std::abs(nm.value - cf) < 5e-3 * (1.0 + std::abs(cf)));
        ++checked;
    }
}

TEST_CASE("waterbed balance for fast-rolloff open-loop-stable designs") {
    // relative degree >= 3, OLS: positive and negative areas cancel exactly
    std::mt19937 rng(31337);
    for (int rep = 0; rep < 5; ++rep) {
        std::uniform_real_distribution<double> re(-2.5, -0.4);
        std::vector<Complex> closed = {{re(rng), 1.0}, {re(rng), -1.0}, {re(rng), 0.0}, {re(rng), 0.0}};
        closed[1] = std::conj(closed[0]);
        Polynomial phi_cl = Polynomial::from_roots(closed);
        Polynomial num({0.7 + 0.1 * rep, 0.2}); // degree 1 on an order-4 loop
        Polynomial den = phi_cl - num;
        // only keep open-loop-stable draws
        bool ols = true;
        for (const Complex& p : poly_roots(den))
            if (p.real() > -1e-6) ols = false;
        if (!ols) continue;

        double open_sum = 0.0, closed_sum = 0.0;
        for (const Complex& p : poly_roots(den)) open_sum += p.real();
        for (const Complex& p : closed) closed_sum += p.real();
        CHECK(std::abs(open_sum - closed_sum) < 1e-8);

        IntegralValue nm = numeric_sensitivity_integral(LoopGain(RationalSiso(num, den)));
        CHECK(std::abs(nm.value) < 1e-2);
    }
}

TEST_CASE("weighted integral around a RHP zero") {
    // L = -1.8 (s-2) / ((s-1)(s+3)): one RHP pole at 1, RHP zero at 2,
    // stable closed loop; closed form is pi ln|(1+2)/(1-2)| = pi ln 3
    Polynomial num = Polynomial({-2.0, 1.0}) * -1.8;
    Polynomial den = Polynomial({-1.0, 1.0}) * Polynomial({3.0, 1.0});
    LoopGain l(RationalSiso(num, den));
    for (const Complex& p : closed_loop_poles(l)) REQUIRE(p.real() < 0.0);

    WeightedNmpResult r = weighted_nmp_integral(l, Complex(2.0, 0.0));
    CHECK(r.closed_form == doctest::Approx(kPi * std::log(3.0)).epsilon(1e-12));
    CHECK(std::abs(r.numeric - r.closed_form) < 1e-2);

    CHECK_THROWS_AS(weighted_nmp_integral(l, Complex(2.5, 0.0)), DomainError);
}

TEST_CASE("weighted integral vanishes without RHP poles") {
    // L = -0.8 (s-2)/(s+1)^2: NMP zero but open-loop stable
    Polynomial num = Polynomial({-2.0, 1.0}) * -0.8;
    Polynomial den = Polynomial({1.0, 1.0}) * Polynomial({1.0, 1.0});
    LoopGain l(RationalSiso(num, den));
    WeightedNmpResult r = weighted_nmp_integral(l, Complex(2.0, 0.0));
    CHECK(r.closed_form == 0.0);
    CHECK(std::abs(r.numeric) < 1e-2);
}

TEST_CASE("full audit: double-integrator lead loop") {
    AuditResult r = audit(lead_over_s2());
    CHECK(r.sensitivity.classification == "OLS");
    CHECK(r.sensitivity.system_type == 2);
    CHECK(r.sensitivity.n_p == 0);
    REQUIRE(!r.sensitivity.numeric.inf);
    CHECK(std::abs(r.sensitivity.numeric.value - (-kPi / 2)) < 1e-2);
    CHECK(std::abs(r.sensitivity.closed_form.value - (-kPi / 2)) < 1e-9);
    CHECK(std::abs(r.complementary.numeric.value) < 1e-2);
    CHECK(std::abs(r.complementary.closed_form.value) < 1e-9);
    REQUIRE(r.kh_route_residual.has_value());
    CHECK(*r.kh_route_residual < 1e-8);

    nlohmann::json j = to_json(r.sensitivity);
    CHECK(j["classification"] == "OLS");
    CHECK(j["type"] == 2);
    CHECK(j["open_poles"].size() == 2);
}

TEST_CASE("full audit: Type-0 coupled loop reports infinity markers") {
    AuditResult r = audit(LoopGain(coupled_type0_loop()));
    CHECK(r.complementary.numeric.inf);
    CHECK(r.complementary.closed_form.inf);
    REQUIRE(!r.complementary.residual.inf);
    CHECK(r.complementary.residual.value == 0.0);
    nlohmann::json j = to_json(r.complementary);
    CHECK(j["numeric"] == "inf");
    CHECK(j["closed_form"] == "inf");
}

TEST_CASE("full audit: Type-1 coupled loop") {
    AuditResult r = audit(LoopGain(coupled_type1_loop()));
    CHECK(std::abs(r.sensitivity.numeric.value) < 2e-2);
    CHECK(std::abs(r.sensitivity.closed_form.value) < 1e-9);
    REQUIRE(!r.complementary.numeric.inf);
    CHECK(std::abs(r.complementary.numeric.value - 0.1854) < 5e-3);
    CHECK(std::abs(r.complementary.closed_form.value - 0.1854) < 1e-3);
    CHECK(r.sensitivity.n_z == 1);
    CHECK(r.sensitivity.system_type == 1);
}

TEST_CASE("weighted integral shrinks when the zero sits far from every pole") {
    // L = -0.05 (s-50)/((s-0.1)(s+3)): RHP pole at 0.1, zero far out at 50
    Polynomial num = Polynomial({-50.0, 1.0}) * -0.05;
    Polynomial den = Polynomial({-0.1, 1.0}) * Polynomial({3.0, 1.0});
    LoopGain l(RationalSiso(num, den));
    WeightedNmpResult r = weighted_nmp_integral(l, Complex(50.0, 0.0));
    CHECK(std::abs(r.closed_form) < 2e-2); // pi ln|50.1/49.9|
    CHECK(std::abs(r.numeric - r.closed_form) < 1e-2);
}

TEST_CASE("audit of a servo loop cut at the plant input") {
    // observer-based compensator in series with the servo plant; the
    // compensator carries an undamped internal oscillator, so the integrand
    // has log singularities on the axis that the quadrature must absorb
    StateSpace plant = servo_plant();
    const double s3 = std::sqrt(3.0);
    ImController ctrl = design_im(
        plant, SignalModel::from_polynomial(Polynomial({1.0, 0.0, 1.0})),
        {{{-1.0, 2.0}, {-1.0, -2.0}, {-s3, 1.0}, {-s3, -1.0}}},
        {{{-5.0, 5.0 * s3}, {-5.0, -5.0 * s3}}});
    LoopGain loop(loop_gain_at_input(plant, ctrl));

    AuditResult r = audit(loop);
    REQUIRE(!r.sensitivity.numeric.inf);
    CHECK(std::abs(r.sensitivity.numeric.value - r.sensitivity.closed_form.value) <
          5e-3 * (1.0 + std::abs(r.sensitivity.closed_form.value)));
    CHECK(r.sensitivity.open_poles.size() == 6); // plant order plus compensator order
}

TEST_CASE("Type-1 audit exercises the velocity-constant route") {
    RationalSiso l(Polynomial({2.0}), Polynomial({0.0, 3.0, 1.0}));
    AuditResult r = audit(LoopGain(l));
    REQUIRE(r.kv_route_residual.has_value());
    CHECK(*r.kv_route_residual < 1e-8);
    REQUIRE(r.kh_route_residual.has_value());
    CHECK(*r.kh_route_residual < 1e-8);
}

TEST_CASE("open-loop-unstable audit takes the augmented branch") {
    // L = -1.8 (s-2)/((s-1)(s+3)): one RHP pole, one RHP zero
    Polynomial num = Polynomial({-2.0, 1.0}) * -1.8;
    Polynomial den = Polynomial({-1.0, 1.0}) * Polynomial({3.0, 1.0});
    AuditResult r = audit(LoopGain(RationalSiso(num, den)));
    CHECK(r.sensitivity.classification == "OLU");
    CHECK(r.sensitivity.n_p == 1);
    CHECK(r.sensitivity.n_z == 1);
    REQUIRE(!r.sensitivity.residual.inf);
    CHECK(r.sensitivity.residual.value < 5e-3 * (1.0 + std::abs(r.sensitivity.closed_form.value)));
}
