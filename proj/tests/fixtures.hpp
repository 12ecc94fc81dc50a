#pragma once

// Shared test fixtures: a scalar "toy" subsystem whose certificate arithmetic
// is tractable by hand, chain networks built from it, and small helpers for
// randomized property suites.

#include <cstdint>
#include <random>
#include <vector>

#include "posafe/certificate.hpp"
#include "posafe/composition.hpp"
#include "posafe/polynomial.hpp"
#include "posafe/system.hpp"

namespace fixtures {

using namespace posafe;

// Scalar subsystem x+ = 0.9 x + 0.2 u + 0.05 w + s1, y1 = x, y2 = x + s2,
// with a Luenberger estimator (gain 0.5) and a zero controller.
inline Block toy_block(double sigma1 = 0.01, double sigma2 = 0.01) {
    SubsystemSpec sub;
    sub.state_dim = 1;
    sub.input_dim = 1;
    sub.internal_input_dim = 1;
    sub.internal_output_dim = 1;
    sub.output_dim = 1;
    auto x0 = PolynomialExpr::variable("x0");
    sub.f = {0.9 * x0 + 0.2 * PolynomialExpr::variable("u0") +
             0.05 * PolynomialExpr::variable("w0") + PolynomialExpr::variable("s1_0")};
    sub.h1 = {x0};
    sub.C2 = {{1.0}};
    sub.sigma1 = {sigma1};
    sub.sigma2 = {sigma2};
    sub.X = RegionSpec(BoxRegion({{-1.0, 1.0}}));
    sub.Xa = RegionSpec(BoxRegion({{-0.1, 0.1}}));
    sub.Xb = RegionSpec({BoxRegion({{-1.0, -0.8}}), BoxRegion({{0.8, 1.0}})});
    sub.W = BoxRegion({{-1.0, 1.0}});
    sub.Y2 = BoxRegion({{-1.1, 1.1}});
    EstimatorSpec est;
    est.A = {{0.9}};
    est.B = {{0.2}};
    est.Aw = {{0.05}};
    est.K = {{0.5}};
    est.C2 = {{1.0}};
    ControllerSpec ctrl;
    ctrl.laws = {PolynomialExpr(0.0)};
    ctrl.saturation = {{-1.0, 1.0}};
    return Block{sub, est, ctrl};
}

// Chain of N toy blocks, block i-1's output feeding block i's internal input.
inline NetworkSpec toy_chain(int n) {
    std::vector<Block> blocks(std::size_t(n), toy_block());
    std::vector<Edge> edges;
    for (int i = 1; i < n; ++i) edges.push_back(Edge{i - 1, i, 0, 0, 1});
    return build_interconnection(std::move(blocks), std::move(edges));
}

inline PolynomialExpr toy_barrier_poly() {
    auto x = PolynomialExpr::variable("x0"), xh = PolynomialExpr::variable("xh0");
    return x * x + (x - xh) * (x - xh);
}

// Constants from calibrate_constants on the toy block at resolution 41, with
// gamma rounded up and lambda rounded down so the frozen decimals stay on the
// conservative side of the floating-point grid extrema. The certificate suite
// re-derives them and asserts agreement in the conservative direction.
inline BarrierCertificate toy_barrier() {
    BarrierCertificate c;
    c.B = toy_barrier_poly();
    c.alpha = GainFn::linear(0.4);
    c.rho = GainFn::linear(1.5);
    c.kappa_bar = 0.9;
    c.psi_bar = 3e-4;
    c.gamma_bar = 0.0501;
    c.lambda_bar = 0.6399;
    c.flavor = CertFlavor::Augmented;
    return c;
}

// Random polynomial of bounded degree over the given variables.
inline PolynomialExpr random_poly(std::mt19937_64& gen, const std::vector<std::string>& vars,
                                  int max_degree, int terms) {
    std::uniform_real_distribution<double> coeff(-2.0, 2.0);
    std::uniform_int_distribution<int> deg(0, max_degree);
    std::uniform_int_distribution<std::size_t> pick(0, vars.size() - 1);
    PolynomialExpr p;
    for (int t = 0; t < terms; ++t) {
        PolynomialExpr m(coeff(gen));
        int d = deg(gen);
        for (int k = 0; k < d; ++k) m = m * PolynomialExpr::variable(vars[pick(gen)]);
        p = p + m;
    }
    return p;
}

}  // namespace fixtures
