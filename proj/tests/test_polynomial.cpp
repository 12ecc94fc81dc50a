#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "posafe/polynomial.hpp"

using namespace posafe;

namespace {

std::map<std::string, double> random_point(std::mt19937_64& gen,
                                           const std::vector<std::string>& vars) {
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    std::map<std::string, double> pt;
    for (const auto& v : vars) pt[v] = dist(gen);
    return pt;
}

}  // namespace

TEST_CASE("variable kinds are inferred from the naming convention") {
    CHECK(kind_from_name("x0") == VarKind::State);
    CHECK(kind_from_name("xh3") == VarKind::EstimatorState);
    CHECK(kind_from_name("u0") == VarKind::ExternalInput);
    CHECK(kind_from_name("y1") == VarKind::ExternalInput);
    CHECK(kind_from_name("w0") == VarKind::InternalInput);
    CHECK(kind_from_name("wh2") == VarKind::InternalInputEstimate);
    CHECK(kind_from_name("s1_0") == VarKind::Noise);
    CHECK(kind_from_name("s2_1") == VarKind::Noise);
    CHECK_THROWS_AS(kind_from_name("q7"), InvalidParameterError);
}

TEST_CASE("evaluation") {
    auto x = PolynomialExpr::variable("x0");
    CHECK(((x * x).eval({{"x0", 3.0}})) == doctest::Approx(9.0));

    PolynomialExpr zero;
    CHECK(zero.eval({{"x0", 5.0}}) == 0.0);
    CHECK(zero.is_zero());

    // p = d^2 - d*v at (d, v) = (1.2, 0.3).
    auto d = PolynomialExpr::variable("x0"), v = PolynomialExpr::variable("x1");
    PolynomialExpr p = d * d - d * v;
    CHECK(p.eval({{"x0", 1.2}, {"x1", 0.3}}) == doctest::Approx(1.08));

    // Missing assignment is an error, not a silent zero.
    CHECK_THROWS_AS(p.eval({{"x0", 1.2}}), MissingAssignmentError);
}

TEST_CASE("affine substitution") {
    auto x = PolynomialExpr::variable("x0"), y = PolynomialExpr::variable("x1");

    // x^2 with x <- 2y + 1 expands to 4y^2 + 4y + 1.
    PolynomialExpr sq = (x * x).affine_substitute({{"x0", 2.0 * y + PolynomialExpr(1.0)}});
    CHECK(sq.eval({{"x1", 0.0}}) == doctest::Approx(1.0));
    CHECK(sq.eval({{"x1", 1.0}}) == doctest::Approx(9.0));
    CHECK(sq.eval({{"x1", -1.0}}) == doctest::Approx(1.0));
    CHECK(sq.degree() == 2);
    CHECK(sq.terms().size() == 3);

    // Identity map leaves the polynomial unchanged.
    PolynomialExpr p = x * x * y - 2.0 * y + PolynomialExpr(0.5);
    PolynomialExpr same = p.affine_substitute({{"x0", x}, {"x1", y}});
    CHECK(same.terms() == p.terms());

    // d^2 with d <- d - v + 0.01 w + s expands to the full 10-term square;
    // verified by evaluating both sides at 20 random points.
    auto w = PolynomialExpr::variable("w0"), s = PolynomialExpr::variable("s1_0");
    PolynomialExpr img = x - y + 0.01 * w + s;
    PolynomialExpr expanded = (x * x).affine_substitute({{"x0", img}});
    CHECK(expanded.terms().size() == 10);
    std::mt19937_64 gen(1);
    for (int t = 0; t < 20; ++t) {
        auto pt = random_point(gen, {"x0", "x1", "w0", "s1_0"});
        double lhs = expanded.eval(pt);
        double iv = img.eval(pt);
        CHECK(lhs == doctest::Approx(iv * iv).epsilon(1e-12));
    }
}

TEST_CASE("gaussian expectation closed forms") {
    auto x = PolynomialExpr::variable("x0"), s = PolynomialExpr::variable("s1_0");

    // E[(x + s)^2] = x^2 + sigma^2.
    PolynomialExpr p = (x + s) * (x + s);
    PolynomialExpr e = p.gaussian_expectation({{"s1_0", 0.3}});
    CHECK(e.eval({{"x0", 2.0}}) == doctest::Approx(4.0 + 0.09));
    CHECK(e.free_variables().count("s1_0") == 0);

    // E[s^4] = 3 sigma^4 at sigma = 1.
    PolynomialExpr quart = (s * s) * (s * s);
    CHECK(quart.gaussian_expectation({{"s1_0", 1.0}}).eval({}) == doctest::Approx(3.0));

    // E[(x + s)^4] at sigma = 0.1 is x^4 + 0.06 x^2 + 0.0003.
    PolynomialExpr p4 = p * p;
    PolynomialExpr e4 = p4.gaussian_expectation({{"s1_0", 0.1}});
    CHECK(e4.eval({{"x0", 1.0}}) == doctest::Approx(1.0 + 0.06 + 0.0003).epsilon(1e-12));
    CHECK(e4.eval({{"x0", 0.5}}) ==
          doctest::Approx(0.0625 + 0.06 * 0.25 + 0.0003).epsilon(1e-12));

    // Odd moments vanish.
    CHECK((s * s * s).gaussian_expectation({{"s1_0", 2.0}}).is_zero());
}

TEST_CASE("gaussian expectation against a Monte Carlo oracle") {
    // E[(x + s)^4], sigma = 0.1, x = 0.7, 1e7 draws, agreement within 3 SE.
    auto x = PolynomialExpr::variable("x0"), s = PolynomialExpr::variable("s1_0");
    PolynomialExpr p = (x + s) * (x + s) * (x + s) * (x + s);
    const double sigma = 0.1, x0 = 0.7;
    double closed = p.gaussian_expectation({{"s1_0", sigma}}).eval({{"x0", x0}});

    std::mt19937_64 gen(42);
    std::normal_distribution<double> gauss(0.0, sigma);
    const long n = 10'000'000;
    double sum = 0.0, sumsq = 0.0;
    for (long i = 0; i < n; ++i) {
        double b = x0 + gauss(gen);
        double v = (b * b) * (b * b);
        sum += v;
        sumsq += v * v;
    }
    double mean = sum / double(n);
    double var = sumsq / double(n) - mean * mean;
    double se = std::sqrt(var / double(n));
    CHECK(std::abs(closed - mean) <= 3.0 * se);
}

TEST_CASE("text round-trip preserves terms") {
    std::mt19937_64 gen(7);
    std::vector<std::string> vars{"x0", "x1", "xh0", "s1_0"};
    for (int t = 0; t < 200; ++t) {
        PolynomialExpr p = fixtures::random_poly(gen, vars, 4, 6);
        PolynomialExpr back = PolynomialExpr::from_text(p.to_text());
        CHECK(back.terms() == p.terms());
    }
}

TEST_CASE("property: expectation linearity" * doctest::timeout(120)) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> scalar(-3.0, 3.0);
    std::vector<std::string> vars{"x0", "x1", "s1_0", "s2_0"};
    std::map<std::string, double> sigma{{"s1_0", 0.4}, {"s2_0", 1.1}};
    int checked = 0;
    for (int t = 0; t < 1000; ++t) {
        PolynomialExpr p = fixtures::random_poly(gen, vars, 4, 5);
        PolynomialExpr q = fixtures::random_poly(gen, vars, 4, 5);
        double a = scalar(gen), b = scalar(gen);
        PolynomialExpr lhs = (a * p + b * q).gaussian_expectation(sigma);
        PolynomialExpr rhs = a * p.gaussian_expectation(sigma) + b * q.gaussian_expectation(sigma);
        auto pt = random_point(gen, {"x0", "x1"});
        double l = lhs.eval(pt), r = rhs.eval(pt);
        CHECK(l == doctest::Approx(r).epsilon(1e-10));
        ++checked;
    }
    CHECK(checked == 1000);
}

TEST_CASE("property: noise-free polynomials are expectation fixpoints") {
    std::mt19937_64 gen(12);
    std::vector<std::string> vars{"x0", "x1", "u0"};
    for (int t = 0; t < 1000; ++t) {
        PolynomialExpr p = fixtures::random_poly(gen, vars, 4, 5);
        PolynomialExpr e = p.gaussian_expectation({{"s1_0", 0.7}});
        CHECK(e.terms() == p.terms());
    }
}

TEST_CASE("property: substitution and evaluation commute" * doctest::timeout(120)) {
    std::mt19937_64 gen(13);
    std::vector<std::string> base{"x0", "x1"}, image_vars{"x0", "x1", "w0"};
    std::uniform_real_distribution<double> coeff(-1.5, 1.5);
    for (int t = 0; t < 1000; ++t) {
        PolynomialExpr p = fixtures::random_poly(gen, base, 4, 4);
        // Random affine images for both variables.
        std::map<std::string, PolynomialExpr> images;
        for (const auto& v : base) {
            PolynomialExpr img(coeff(gen));
            for (const auto& iv : image_vars)
                img = img + coeff(gen) * PolynomialExpr::variable(iv);
            images.emplace(v, img);
        }
        auto pt = random_point(gen, image_vars);
        std::map<std::string, double> mapped;
        for (const auto& v : base) mapped[v] = images.at(v).eval(pt);
        double via_subst = p.affine_substitute(images).eval(pt);
        double via_eval = p.eval(mapped);
        CHECK(via_subst ==
              doctest::Approx(via_eval).epsilon(1e-12).scale(1.0 + std::abs(via_eval)));
    }
}
