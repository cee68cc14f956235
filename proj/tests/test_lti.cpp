#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "servoforge/errors.hpp"
#include "servoforge/lti.hpp"

using namespace servoforge;
using servoforge::testing::coupled_type0_loop;
using servoforge::testing::coupled_type1_loop;
using servoforge::testing::matches_multiset;
using servoforge::testing::servo_plant;

TEST_CASE("poles of rational and state-space loops") {
    LoopGain servo(RationalSiso(Polynomial({1.0}), Polynomial({0.0, 1.0, 1.0}))); // 1/(s(s+1))
    CHECK(matches_multiset(poles(servo), {{0, 0}, {-1, 0}}, 1e-9));

    CHECK(matches_multiset(poles(LoopGain(coupled_type0_loop())), {{-1, 0}, {-2, 0}}, 1e-9));

    LoopGain static_gain(RationalSiso(Polynomial({2.0}), Polynomial({1.0})));
    CHECK(poles(static_gain).empty());
}

TEST_CASE("transmission zeros via the system pencil") {
    CHECK(matches_multiset(transmission_zeros(coupled_type1_loop()),
                           {{1.2360680, 0}, {-3.2360680, 0}}, 1e-3));
    CHECK(transmission_zeros(coupled_type0_loop()).empty());

    // SISO (s+1)/s^2: zeros equal numerator roots
    StateSpace siso = to_state_space(RationalSiso(Polynomial({1.0, 1.0}), Polynomial({0.0, 0.0, 1.0})));
    CHECK(matches_multiset(transmission_zeros(siso), {{-1.0, 0.0}}, 1e-7));
}

TEST_CASE("transmission zeros of a SISO realization equal numerator roots") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> coin(-2.0, 2.0);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> num(3), den(5);
        for (auto& c : num) c = coin(rng);
        for (auto& c : den) c = coin(rng);
        den.back() = 1.0;
        if (std::abs(num.back()) < 0.2) num.back() = 0.7;
        RationalSiso r{Polynomial(num), Polynomial(den)};
        if (r.num().degree() < 1) continue;
        StateSpace ss = to_state_space(r);
        CHECK(matches_multiset(transmission_zeros(ss), poly_roots(r.num()), 1e-6));
    }
}

TEST_CASE("frequency response evaluation") {
    LoopGain lead_over_s2(RationalSiso(Polynomial({1.0, 1.0}), Polynomial({0.0, 0.0, 1.0})));
    CMatrix v = eval_freq(lead_over_s2, 1.0);
    CHECK(v(0, 0).real() == doctest::Approx(-1.0));
    CHECK(v(0, 0).imag() == doctest::Approx(-1.0));

    // far above every pole the response approaches the direct feedthrough
    CMatrix tail = eval_freq(lead_over_s2, 1e8);
    CHECK(std::abs(tail(0, 0)) < 1e-7);

    CMatrix dc = eval_freq(LoopGain(coupled_type0_loop()), 0.0);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(std::abs(dc(i, j) - (i == j ? 1.0 : 0.0)) < 1e-12);

    CHECK_THROWS_AS(eval_freq(LoopGain(RationalSiso(Polynomial({1.0}), Polynomial({1.0, 0.0, 1.0}))), 1.0),
                    PoleProximityError);
}

TEST_CASE("sensitivity pair satisfies S + T = I") {
    LoopGain l(RationalSiso(Polynomial({1.0, 1.0}), Polynomial({0.0, 0.0, 1.0})));
    SensPair p = sens_eval(l, 1.0);
    CHECK(p.s(0, 0).real() == doctest::Approx(0.0));
    CHECK(p.s(0, 0).imag() == doctest::Approx(1.0)); // S(j) = 1/(-j) = j
    CHECK(std::abs(p.s(0, 0)) == doctest::Approx(1.0));

    std::mt19937 rng(17);
    std::uniform_real_distribution<double> coin(-1.0, 1.0);
    for (int loop_idx = 0; loop_idx < 20; ++loop_idx) {
        std::vector<double> num(3), den(4);
        for (auto& c : num) c = coin(rng);
        for (auto& c : den) c = 0.5 + std::abs(coin(rng));
        LoopGain lg{RationalSiso(Polynomial(num), Polynomial(den))};
        for (int k = 0; k < 100; ++k) {
            double w = std::pow(10.0, -3.0 + 6.0 * k / 99.0);
            SensPair st = sens_eval(lg, w);
            CHECK(std::abs(st.s(0, 0) + st.t(0, 0) - Complex(1.0, 0.0)) < 1e-12);
        }
    }
}

TEST_CASE("high-gain loops drive S to zero and T to identity") {
    LoopGain big(RationalSiso(Polynomial({1e9}), Polynomial({1.0, 1.0})));
    SensPair p = sens_eval(big, 1.0);
    CHECK(std::abs(p.s(0, 0)) < 1e-8);
    CHECK(std::abs(p.t(0, 0) - Complex(1.0, 0.0)) < 1e-8);
}

TEST_CASE("system Type identification") {
    CHECK(system_type(LoopGain(RationalSiso(Polynomial({1.0, 1.0}), Polynomial({0.0, 0.0, 1.0})))) == 2);
    CHECK(system_type(LoopGain(coupled_type1_loop())) == 1);
    CHECK(system_type(LoopGain(coupled_type0_loop())) == 0);
    CHECK(system_type(LoopGain(RationalSiso(Polynomial({2.0}), Polynomial({3.0, 1.0})))) == 0);
}

TEST_CASE("system Type is invariant under similarity transformation") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> coin(-1.0, 1.0);
    StateSpace sys = coupled_type1_loop();
    for (int rep = 0; rep < 5; ++rep) {
        Matrix t(4, 4);
        for (;;) {
            for (auto& v : t.data()) v = coin(rng);
            for (std::size_t i = 0; i < 4; ++i) t(i, i) += 2.0;
            if (numerical_rank(t) == 4) break;
        }
        Matrix tinv = solve_linear(t, Matrix::identity(4));
        StateSpace transformed(t * sys.f * tinv, t * sys.g, sys.h * tinv, sys.j);
        CHECK(system_type(LoopGain(transformed)) == 1);
    }
}

TEST_CASE("mixed channel Types are rejected") {
    // diag(1/s, 1): one integrating channel, one static
    Matrix f(1, 1);
    Matrix g{{1.0, 0.0}};
    Matrix h{{1.0}, {0.0}};
    Matrix j{{0.0, 0.0}, {0.0, 1.0}};
    CHECK_THROWS_AS(system_type(LoopGain(StateSpace(f, g, h, j))), UnsupportedError);
}

TEST_CASE("a weak channel still classifies by the origin-pole structure") {
    // diag(0.001, 1)/(s+1): Type 0, but the small channel falls below the
    // probe's absolute floor
    Matrix f{{-1.0, 0.0}, {0.0, -1.0}};
    Matrix h{{0.001, 0.0}, {0.0, 1.0}};
    CHECK(system_type(LoopGain(StateSpace(f, Matrix::identity(2), h, Matrix(2, 2)))) == 0);
}

TEST_CASE("interpolation conditions at RHP poles and zeros") {
    // stabilized unstable pole: L = 1/(s-1), T = 1/s, |T(1)| = 1
    LoopGain unstable(RationalSiso(Polynomial({1.0}), Polynomial({-1.0, 1.0})));
    auto report = check_interpolation(unstable);
    REQUIRE(report.size() == 1);
    CHECK(report[0].is_pole);
    CHECK(report[0].t_mag == doctest::Approx(1.0));
    CHECK(report[0].s_mag == doctest::Approx(0.0));
    CHECK(report[0].t_residual < 1e-6);
    CHECK(report[0].s_residual < 1e-6);

    // RHP zero: L = (s-2)/(s+1)^2, |S(2)| = 1
    LoopGain nmp(RationalSiso(Polynomial({-2.0, 1.0}), Polynomial({1.0, 2.0, 1.0})));
    auto zr = check_interpolation(nmp);
    REQUIRE(zr.size() == 1);
    CHECK(!zr[0].is_pole);
    CHECK(zr[0].s_mag == doctest::Approx(1.0));
    CHECK(zr[0].t_mag == doctest::Approx(0.0));

    // nothing in the RHP: empty report
    LoopGain tame(RationalSiso(Polynomial({1.0, 1.0}), Polynomial({0.0, 0.0, 1.0})));
    CHECK(check_interpolation(tame).empty());
}

TEST_CASE("interpolation report for coupled loops uses determinant conditions") {
    // the Type-1 pair has one RHP transmission zero; det T must vanish there
    auto report = check_interpolation(LoopGain(coupled_type1_loop()));
    REQUIRE(report.size() == 1);
    CHECK(!report[0].is_pole);
    CHECK(std::abs(report[0].location - Complex(1.2360680, 0.0)) < 1e-6);
    CHECK(report[0].t_mag < 1e-9);
}

TEST_CASE("internal model classification") {
    Polynomial q_osc({1.0, 0.0, 1.0});
    CHECK(verify_internal_model(q_osc, Polynomial({0.0, 1.0, 1.0}), q_osc) == ModelInclusion::Explicit);

    Polynomial q_step({0.0, 1.0});
    CHECK(verify_internal_model(Polynomial({2.0, 1.0}), Polynomial({0.0, 1.0, 1.0}), q_step) ==
          ModelInclusion::Implicit);

    CHECK(verify_internal_model(Polynomial({2.0, 1.0}), Polynomial({1.0, 2.0, 1.0}), q_step) ==
          ModelInclusion::Absent);
    CHECK_THROWS_AS(verify_internal_model(Polynomial({1.0}), Polynomial({1.0}), Polynomial()), DomainError);

    CHECK(to_string(ModelInclusion::Explicit) == "explicit");
    CHECK(to_string(ModelInclusion::Implicit) == "implicit");
    CHECK(to_string(ModelInclusion::Absent) == "absent");
}

TEST_CASE("rational-state space round trip preserves poles") {
    RationalSiso r(Polynomial({1.0, 0.5}), Polynomial({2.0, 3.0, 1.0}));
    StateSpace ss = to_state_space(r);
    RationalSiso back = to_rational(ss);
    CHECK(matches_multiset(poly_roots(back.den()), poly_roots(r.den()), 1e-7));
    CHECK(matches_multiset(poly_roots(back.num()), poly_roots(r.num()), 1e-7));
    CHECK(back.num().coeff(0) / back.den().coeff(0) ==
          doctest::Approx(r.num().coeff(0) / r.den().coeff(0)));

    // SISO state-space poles equal the cancelled transfer-function poles
    CHECK(matches_multiset(poles(LoopGain(ss)), poly_roots(r.den()), 1e-7));
}

TEST_CASE("near-common factors cancel at construction") {
    // (s+1)(s+2) / ((s+1)(s+3)) collapses to (s+2)/(s+3)
    Polynomial num = Polynomial({1.0, 1.0}) * Polynomial({2.0, 1.0});
    Polynomial den = Polynomial({1.0, 1.0}) * Polynomial({3.0, 1.0});
    RationalSiso r(num, den);
    CHECK(r.num().degree() == 1);
    CHECK(r.den().degree() == 1);
    CHECK(matches_multiset(poly_roots(r.den()), {{-3.0, 0.0}}, 1e-7));
}

TEST_CASE("series interconnection multiplies transfer functions") {
    StateSpace a = to_state_space(RationalSiso(Polynomial({1.0}), Polynomial({1.0, 1.0})));
    StateSpace b = to_state_space(RationalSiso(Polynomial({2.0}), Polynomial({3.0, 1.0})));
    RationalSiso ab = to_rational(series(a, b));
    // 2/((s+1)(s+3))
    CHECK(ab.num().evaluate(0.0) / ab.den().evaluate(0.0) == doctest::Approx(2.0 / 3.0));
    CHECK(matches_multiset(poly_roots(ab.den()), {{-1.0, 0.0}, {-3.0, 0.0}}, 1e-9));
}

TEST_CASE("JSON round trips") {
    StateSpace sys = servo_plant();
    StateSpace back = state_space_from_json(to_json(sys));
    CHECK(back.f(0, 1) == 1.0);
    CHECK(back.f(1, 1) == -1.0);
    CHECK(back.order() == 2);
    CHECK(!back.gw.has_value());
    CHECK(back.disturbance_input()(1, 0) == 1.0); // falls back to g

    sys.gw = Matrix::column_vector({1.0, 0.0});
    StateSpace with_gw = state_space_from_json(to_json(sys));
    REQUIRE(with_gw.gw.has_value());
    CHECK(with_gw.disturbance_input()(0, 0) == 1.0);

    RationalSiso r(Polynomial({1.0, 1.0}), Polynomial({0.0, 0.0, 1.0}));
    RationalSiso rb = rational_from_json(to_json(r));
    CHECK(rb.den().degree() == 2);
    CHECK(rb.num().coeff(1) == 1.0);

    LoopGain from_rational = loop_gain_from_json(to_json(r));
    CHECK(from_rational.is_siso());
    LoopGain from_ss = loop_gain_from_json(to_json(coupled_type0_loop()));
    CHECK(from_ss.size() == 2);

    CHECK_THROWS_AS(state_space_from_json(nlohmann::json{{"f", {{0.0}}}}), DomainError);
}
