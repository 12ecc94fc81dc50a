#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "posafe/gains.hpp"

using namespace posafe;

TEST_CASE("construction and basic classification") {
    GainFn lin = GainFn::linear(0.95);
    CHECK(lin.is_linear());
    CHECK(lin(2.0) == doctest::Approx(1.9));

    GainFn quad(0.3, 2.0);
    CHECK_FALSE(quad.is_linear());
    CHECK(quad(0.01) == doctest::Approx(0.3 * 1e-4));

    GainFn zero = GainFn::zero();
    CHECK(zero.is_zero());
    CHECK(zero(5.0) == 0.0);

    CHECK_THROWS_AS(GainFn(-1.0, 1.0), InvalidParameterError);
    CHECK_THROWS_AS(GainFn(1.0, 0.0), InvalidParameterError);
    CHECK_THROWS_AS(GainFn::linear(1.0)(-0.1), InvalidParameterError);
}

TEST_CASE("less-than-identity is exact for the monomial family") {
    CHECK(GainFn::linear(0.95).less_than_identity());
    CHECK(GainFn::zero().less_than_identity());
    CHECK_FALSE(GainFn::linear(1.0).less_than_identity());
    CHECK_FALSE(GainFn::linear(1.5).less_than_identity());
    // A sublinear-coefficient monomial with exponent != 1 always crosses the
    // identity somewhere, so it is rejected.
    CHECK_FALSE(GainFn(0.5, 2.0).less_than_identity());
    CHECK_FALSE(GainFn(0.5, 0.5).less_than_identity());
}

TEST_CASE("composition and inversion closed forms") {
    GainFn a(2.0, 3.0), b(0.5, 2.0);
    GainFn c = a.compose(b);  // 2 * (0.5 s^2)^3 = 0.25 s^6
    CHECK(c.a == doctest::Approx(0.25));
    CHECK(c.p == doctest::Approx(6.0));

    GainFn inv = b.inverse();
    CHECK(inv(b(1.7)) == doctest::Approx(1.7));

    CHECK(a.compose(GainFn::zero()).is_zero());
    CHECK_THROWS_AS(GainFn::zero().inverse(), InvalidParameterError);
}

TEST_CASE("property: inversion and composition identities" * doctest::timeout(60)) {
    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> coeff(0.01, 10.0), expnt(0.25, 4.0);
    std::uniform_real_distribution<double> arg_exp(-6.0, 6.0);
    for (int t = 0; t < 1000; ++t) {
        GainFn g(coeff(gen), expnt(gen)), h(coeff(gen), expnt(gen));
        double s = std::pow(10.0, arg_exp(gen));

        // (g^-1 o g)(s) = s and (g o g^-1)(s) = s.
        CHECK(g.inverse()(g(s)) == doctest::Approx(s).epsilon(1e-12));
        CHECK(g(g.inverse()(s)) == doctest::Approx(s).epsilon(1e-12));

        // Composition of monomials is the monomial with coefficient a1*a2^p1
        // and exponent p1*p2, and matches numeric composition.
        GainFn gh = g.compose(h);
        CHECK(gh.a == doctest::Approx(g.a * std::pow(h.a, g.p)).epsilon(1e-12));
        CHECK(gh.p == doctest::Approx(g.p * h.p));
        CHECK(gh(s) == doctest::Approx(g(h(s))).epsilon(1e-12));

        // Inverse of a composition is the reversed composition of inverses.
        GainFn lhs = gh.inverse(), rhs = h.inverse().compose(g.inverse());
        CHECK(lhs(s) == doctest::Approx(rhs(s)).epsilon(1e-10));
    }
}
