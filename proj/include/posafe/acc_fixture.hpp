#pragma once

// Recorded certificate fixtures for the adaptive-cruise-control case study.
//
// The original case study reports certificate constants but not the barrier
// polynomial itself, so this repo ships its own calibrated quadratic barrier
// (constants frozen from a calibration run at grid resolution 21; see the
// regression tests) alongside the reference constants as reported, which are
// useful for composition and bound computations but are not claimed to be
// verifiable against the shipped barrier.

#include "posafe/certificate.hpp"
#include "posafe/polynomial.hpp"
#include "posafe/system.hpp"

namespace posafe {

// Quadratic error weight of the calibrated barrier's (x - xh) part.
inline Matrix acc_fixture_error_weight() {
    return {{1.0, 0.73654184}, {0.73654184, 1.50337673}};
}

// Reference estimation-error weight M of the case study's linear SSF.
inline Matrix acc_reference_M() {
    return {{0.0257, 0.0259}, {0.0259, 0.0262}};
}

// Calibrated quadratic barrier over the augmented state:
//   B = 0.015 (0.01 (d - 1.1667)^2 + v^2) + 0.0105 e^T Me e,  e = x - xh.
inline PolynomialExpr acc_fixture_barrier_poly() {
    auto d = PolynomialExpr::variable("x0"), v = PolynomialExpr::variable("x1");
    auto dh = PolynomialExpr::variable("xh0"), vh = PolynomialExpr::variable("xh1");
    PolynomialExpr dc = d - PolynomialExpr(1.1667);
    PolynomialExpr ed = d - dh, ev = v - vh;
    Matrix Me = acc_fixture_error_weight();
    PolynomialExpr equad = Me[0][0] * (ed * ed) + (Me[0][1] + Me[1][0]) * (ed * ev) +
                           Me[1][1] * (ev * ev);
    return 0.015 * (0.01 * (dc * dc) + v * v) + 0.0105 * equad;
}

// Frozen calibration output for the fixture barrier (resolution 21). The
// regression suite re-derives these with calibrate_constants and asserts
// agreement, and verify_lcbf_augmented passes with them.
struct AccFixtureConstants {
    static constexpr double alpha_a = 0.003;   // alpha(s) = 0.003 s
    static constexpr double rho_a = 2e-8;      // rho(s) = 2e-8 s
    static constexpr double kappa_bar = 0.99;
    static constexpr double psi_bar = 0.6;
    static constexpr double gamma_bar = 0.0214;   // >= grid max of B on Xa x Xa (0.0213313...)
    static constexpr double lambda_bar = 0.0338;  // <= grid min of B on Xb x X (0.0338232...)
};

inline BarrierCertificate acc_fixture_barrier() {
    BarrierCertificate c;
    c.B = acc_fixture_barrier_poly();
    c.alpha = GainFn::linear(AccFixtureConstants::alpha_a);
    c.rho = GainFn::linear(AccFixtureConstants::rho_a);
    c.kappa_bar = AccFixtureConstants::kappa_bar;
    c.psi_bar = AccFixtureConstants::psi_bar;
    c.gamma_bar = AccFixtureConstants::gamma_bar;
    c.lambda_bar = AccFixtureConstants::lambda_bar;
    c.flavor = CertFlavor::Augmented;
    return c;
}

// Reference constants as reported for the case study. The attached barrier
// polynomial is the fixture one; only the gains and constants matter for
// composition and bound computation.
inline BarrierCertificate acc_reference_barrier() {
    BarrierCertificate c;
    c.B = acc_fixture_barrier_poly();
    c.alpha = GainFn::linear(1e-5);
    c.rho = GainFn::linear(2e-8);
    c.kappa_bar = 0.95;
    c.psi_bar = 0.001;
    c.gamma_bar = 0.12;
    c.lambda_bar = 1.0;
    c.flavor = CertFlavor::Augmented;
    return c;
}

// Reference linear SSF data: phi = e^T M e with the published-style gain
// bookkeeping (eps(s) = 0.3 s^2, mu_bar = 0.4, c_bar = 1e-5).
inline SimulationCertificate acc_reference_ssf() {
    SimulationCertificate c;
    c.M = acc_reference_M();
    c.eps = GainFn(0.3, 2.0);
    c.varrho = GainFn::linear(2e-5);
    c.mu_bar = 0.4;
    c.c_bar = 1e-5;
    return c;
}

}  // namespace posafe
