#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "posafe/bounds.hpp"

using namespace posafe;

TEST_CASE("exit probability examples") {
    // Case-study constants, horizon 10: branch 1, delta = 1 - 0.88 * 0.999^10.
    auto r = exit_probability_delta(0.12, 1.0, 0.95, 0.001, 10);
    CHECK(r.branch == 1);
    CHECK(r.value == doctest::Approx(1.0 - 0.88 * std::pow(0.999, 10)).epsilon(1e-12));
    CHECK(r.value == doctest::Approx(0.12876).epsilon(1e-4));
    CHECK(r.warnings.empty());

    // Zero initial level and zero drift: no exit mass at all.
    CHECK(exit_probability_delta(0.0, 1.0, 0.5, 0.0, 25).value == 0.0);

    // Branch 2 example: lambda < psi/kappa, horizon 1.
    auto r2 = exit_probability_delta(0.1, 1.0, 0.5, 0.6, 1);
    CHECK(r2.branch == 2);
    CHECK(r2.value == doctest::Approx(0.1 * 0.5 + 1.2 * 0.5).epsilon(1e-12));

    CHECK_THROWS_AS(exit_probability_delta(0.1, 0.0, 0.5, 0.1, 5), InvalidParameterError);
    CHECK_THROWS_AS(exit_probability_delta(0.1, 1.0, 1.0, 0.1, 5), InvalidParameterError);
    CHECK_THROWS_AS(exit_probability_delta(-0.1, 1.0, 0.5, 0.1, 5), InvalidParameterError);

    // Vacuous input warns instead of throwing.
    auto vac = exit_probability_delta(2.0, 1.0, 0.5, 0.0, 5);
    CHECK(vac.value == 1.0);
    CHECK_FALSE(vac.warnings.empty());
}

TEST_CASE("estimation accuracy examples") {
    // No drift, no initial error: zero tail for any horizon.
    CHECK(estimation_accuracy_theta(0.0, GainFn(0.3, 2.0), 0.01, 0.4, 0.0, 50).value == 0.0);

    // Initial value already at the threshold level: tail 1.
    GainFn eps(0.3, 2.0);
    auto at = estimation_accuracy_theta(eps(0.01), eps, 0.01, 0.4, 1e-5, 10);
    CHECK(at.value == doctest::Approx(1.0));
    CHECK(at.warnings.empty());  // vacuity warning requires phi0 strictly above the level

    // Case-study values: the formula gives 1 - (2/3)^10, not the reported
    // 3.61%; the implementation returns the formula value.
    auto r = estimation_accuracy_theta(0.0, eps, 0.01, 0.4, 1e-5, 10);
    CHECK(r.branch == 1);
    CHECK(r.value == doctest::Approx(1.0 - std::pow(2.0 / 3.0, 10)).epsilon(1e-12));
    CHECK(r.value == doctest::Approx(0.9827).epsilon(1e-3));

    CHECK_THROWS_AS(estimation_accuracy_theta(0.0, GainFn::zero(), 0.01, 0.4, 0.0, 5),
                    InvalidParameterError);
    CHECK_THROWS_AS(estimation_accuracy_theta(0.0, eps, 0.0, 0.4, 0.0, 5),
                    InvalidParameterError);
    CHECK_THROWS_AS(estimation_accuracy_theta(0.0, eps, 0.01, 1.0, 0.0, 5),
                    InvalidParameterError);
}

TEST_CASE("combined bound examples") {
    CHECK(combined_bound(0.0, 0.0) == 0.0);
    CHECK(combined_bound(0.1288, 0.0361) == doctest::Approx(0.1649).epsilon(1e-12));
    CHECK(combined_bound(0.7, 0.6) == 1.0);
    CHECK_THROWS_AS(combined_bound(-0.1, 0.5), InvalidParameterError);
    CHECK_THROWS_AS(combined_bound(0.5, 1.5), InvalidParameterError);
}

namespace {

struct RandomTuple {
    double gamma, lambda, kappa, psi;
    long horizon;
};

RandomTuple draw(std::mt19937_64& gen) {
    std::uniform_real_distribution<double> unit(0.0, 1.0), pos(1e-6, 10.0);
    std::uniform_int_distribution<long> hor(0, 200);
    RandomTuple t;
    t.lambda = pos(gen);
    t.gamma = unit(gen) * t.lambda;  // non-vacuous by construction
    t.kappa = 0.01 + 0.98 * unit(gen);
    t.psi = unit(gen) * pos(gen);
    t.horizon = hor(gen);
    return t;
}

}  // namespace

TEST_CASE("property: bounds stay in [0,1]" * doctest::timeout(60)) {
    std::mt19937_64 gen(41);
    std::uniform_real_distribution<double> unit(0.0, 1.0), pos(1e-6, 10.0);
    for (int t = 0; t < 1000; ++t) {
        RandomTuple a = draw(gen);
        auto d = exit_probability_delta(a.gamma, a.lambda, a.kappa, a.psi, a.horizon);
        CHECK(d.value >= 0.0);
        CHECK(d.value <= 1.0);

        GainFn eps(pos(gen), 0.5 + 3.0 * unit(gen));
        auto th = estimation_accuracy_theta(unit(gen), eps, pos(gen), 0.01 + 0.98 * unit(gen),
                                            unit(gen), a.horizon);
        CHECK(th.value >= 0.0);
        CHECK(th.value <= 1.0);
        CHECK(combined_bound(d.value, th.value) >= std::max(d.value, th.value));
        CHECK(combined_bound(d.value, th.value) <= 1.0);
    }
}

TEST_CASE("property: branch-1 horizon monotonicity" * doctest::timeout(60)) {
    std::mt19937_64 gen(42);
    int tested = 0;
    while (tested < 1000) {
        RandomTuple a = draw(gen);
        if (a.lambda < a.psi / a.kappa) continue;  // want branch 1
        auto d1 = exit_probability_delta(a.gamma, a.lambda, a.kappa, a.psi, a.horizon);
        auto d2 = exit_probability_delta(a.gamma, a.lambda, a.kappa, a.psi, a.horizon + 1);
        REQUIRE(d1.branch == 1);
        CHECK(d2.value >= d1.value - 1e-15);
        ++tested;
    }
}

TEST_CASE("property: branch-1 level monotonicity in lambda" * doctest::timeout(60)) {
    std::mt19937_64 gen(43);
    std::uniform_real_distribution<double> grow(1.0, 3.0);
    int tested = 0;
    while (tested < 1000) {
        RandomTuple a = draw(gen);
        if (a.lambda < a.psi / a.kappa) continue;
        double lambda2 = a.lambda * grow(gen);  // still branch 1
        auto d1 = exit_probability_delta(a.gamma, a.lambda, a.kappa, a.psi, a.horizon);
        auto d2 = exit_probability_delta(a.gamma, lambda2, a.kappa, a.psi, a.horizon);
        CHECK(d2.value <= d1.value + 1e-15);
        ++tested;
    }
}

TEST_CASE("property: both branches agree at horizon zero" * doctest::timeout(60)) {
    // At T_d = 0 both supermartingale cases reduce to gamma / lambda.
    std::mt19937_64 gen(44);
    for (int t = 0; t < 1000; ++t) {
        RandomTuple a = draw(gen);
        auto d = exit_probability_delta(a.gamma, a.lambda, a.kappa, a.psi, 0);
        CHECK(d.value == doctest::Approx(std::min(1.0, a.gamma / a.lambda)).epsilon(1e-12));
    }
}

TEST_CASE("property: branch selection is deterministic at the boundary") {
    // lambda == psi / kappa exactly selects branch 1.
    for (double kappa : {0.25, 0.5, 0.9}) {
        double psi = 0.3, lambda = psi / kappa;
        auto d = exit_probability_delta(0.1 * lambda, lambda, kappa, psi, 7);
        CHECK(d.branch == 1);
    }
}

TEST_CASE("property: theta branch-1 horizon monotonicity" * doctest::timeout(60)) {
    std::mt19937_64 gen(45);
    std::uniform_real_distribution<double> unit(0.0, 1.0), pos(1e-3, 3.0);
    std::uniform_int_distribution<long> hor(0, 100);
    int tested = 0;
    while (tested < 1000) {
        GainFn eps(pos(gen), 0.5 + 2.0 * unit(gen));
        double epsilon = pos(gen), mu = 0.01 + 0.98 * unit(gen);
        double level = eps(epsilon);
        double c = unit(gen) * mu * level;  // forces branch 1
        double phi0 = unit(gen) * level;
        long T = hor(gen);
        auto t1 = estimation_accuracy_theta(phi0, eps, epsilon, mu, c, T);
        auto t2 = estimation_accuracy_theta(phi0, eps, epsilon, mu, c, T + 1);
        REQUIRE(t1.branch == 1);
        CHECK(t2.value >= t1.value - 1e-15);
        ++tested;
    }
}
