#pragma once

// Class-K-infinity gains restricted to the monomial family a*s^p (a > 0,
// p >= 1), which is closed under composition and inversion. The zero gain
// (a = 0) is admitted where the conditions allow "K-infinity or zero".

#include <cmath>
#include <string>

#include "posafe/common.hpp"

namespace posafe {

struct GainFn {
    double a = 1.0;  // coefficient; 0 denotes the zero gain
    double p = 1.0;  // exponent

    GainFn() = default;
    GainFn(double coeff, double expnt) : a(coeff), p(expnt) {
        if (a < 0) throw InvalidParameterError("GainFn: negative coefficient");
        if (a > 0 && p <= 0) throw InvalidParameterError("GainFn: exponent must be positive");
    }

    static GainFn zero() { return GainFn(0.0, 1.0); }
    static GainFn identity() { return GainFn(1.0, 1.0); }
    static GainFn linear(double coeff) { return GainFn(coeff, 1.0); }

    bool is_zero() const { return a == 0.0; }
    bool is_linear() const { return is_zero() || p == 1.0; }

    double operator()(double s) const {
        if (s < 0) throw InvalidParameterError("GainFn: negative argument");
        return is_zero() ? 0.0 : a * std::pow(s, p);
    }

    // (this . o)(s) = this(o(s)); coefficient a1*a2^p1, exponent p1*p2.
    GainFn compose(const GainFn& o) const {
        if (is_zero() || o.is_zero()) return zero();
        return GainFn(a * std::pow(o.a, p), p * o.p);
    }

    GainFn inverse() const {
        if (is_zero()) throw InvalidParameterError("GainFn: zero gain is not invertible");
        return GainFn(std::pow(1.0 / a, 1.0 / p), 1.0 / p);
    }

    // Exact test for g(s) < s on all s > 0: requires exponent 1 and a < 1.
    bool less_than_identity() const { return is_zero() || (p == 1.0 && a < 1.0); }

    std::string str() const {
        if (is_zero()) return "0";
        std::string s = std::to_string(a) + "*s";
        if (p != 1.0) s += "^" + std::to_string(p);
        return s;
    }
};

}  // namespace posafe
