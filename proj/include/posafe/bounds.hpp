#pragma once

// Closed-form certified probability bounds: exit probability delta over a
// finite horizon, estimation-accuracy tail theta, and their combination.
// All outputs are clamped to [0,1]; vacuous inputs produce warnings, not
// errors, so parameter exploration never crashes.

#include <cmath>
#include <string>
#include <vector>

#include "posafe/common.hpp"
#include "posafe/gains.hpp"

namespace posafe {

struct BoundResult {
    double value = 0.0;
    int branch = 0;  // 1 or 2, matching the two supermartingale cases
    std::vector<std::string> warnings;
};

namespace detail {
inline double clamp01(double v) { return v < 0 ? 0.0 : (v > 1 ? 1.0 : v); }
}  // namespace detail

// Probability that the network state reaches the unsafe region within T_d
// steps, from a CBF with constants (gamma, lambda, kappa, psi).
inline BoundResult exit_probability_delta(double gamma, double lambda, double kappa, double psi,
                                          long horizon) {
    if (lambda <= 0) throw InvalidParameterError("delta: lambda must be positive");
    if (kappa <= 0 || kappa >= 1) throw InvalidParameterError("delta: kappa must lie in (0,1)");
    if (gamma < 0 || psi < 0) throw InvalidParameterError("delta: gamma, psi must be >= 0");
    if (horizon < 0) throw InvalidParameterError("delta: negative horizon");
    BoundResult r;
    if (gamma > lambda) {
        r.warnings.push_back("gamma > lambda: bound is vacuous (delta = 1)");
    }
    if (lambda >= psi / kappa) {
        r.branch = 1;
        r.value = 1.0 - (1.0 - gamma / lambda) * std::pow(1.0 - psi / lambda, double(horizon));
    } else {
        r.branch = 2;
        const double decay = std::pow(1.0 - kappa, double(horizon));
        r.value = (gamma / lambda) * decay + (psi / (kappa * lambda)) * (1.0 - decay);
        if (psi / (kappa * lambda) > 1)
            r.warnings.push_back("psi/(kappa*lambda) > 1: bound clamped to 1");
    }
    r.value = detail::clamp01(r.value);
    return r;
}

// Probability that the estimation error exceeds epsilon somewhere on the
// horizon, from an SSF with (eps_gain, mu, c) and initial value phi0.
inline BoundResult estimation_accuracy_theta(double phi0, const GainFn& eps_gain, double epsilon,
                                             double mu, double c, long horizon) {
    if (eps_gain.is_zero()) throw InvalidParameterError("theta: eps gain must be K-infinity");
    if (mu <= 0 || mu >= 1) throw InvalidParameterError("theta: mu must lie in (0,1)");
    if (phi0 < 0 || c < 0) throw InvalidParameterError("theta: phi0, c must be >= 0");
    if (epsilon <= 0) throw InvalidParameterError("theta: epsilon must be positive");
    if (horizon < 0) throw InvalidParameterError("theta: negative horizon");
    BoundResult r;
    const double level = eps_gain(epsilon);
    if (phi0 > level) r.warnings.push_back("phi0 > eps_gain(epsilon): bound is vacuous (theta = 1)");
    if (level >= c / mu) {
        r.branch = 1;
        r.value = 1.0 - (1.0 - phi0 / level) * std::pow(1.0 - c / level, double(horizon));
    } else {
        r.branch = 2;
        const double decay = std::pow(1.0 - mu, double(horizon));
        r.value = (phi0 / level) * decay + (c / (mu * level)) * (1.0 - decay);
    }
    r.value = detail::clamp01(r.value);
    return r;
}

inline double combined_bound(double delta, double theta) {
    if (delta < 0 || delta > 1 || theta < 0 || theta > 1)
        throw InvalidParameterError("combined_bound: inputs must lie in [0,1]");
    return detail::clamp01(delta + theta);
}

}  // namespace posafe
