#pragma once

// Multivariate polynomials over named variables: the numeric engine behind
// every certificate condition. Supports exact evaluation, polynomial
// substitution, closed-form expectation under independent zero-mean Gaussian
// noise, and a textual term format with exact round-trip.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "posafe/common.hpp"

namespace posafe {

enum class VarKind {
    State,
    EstimatorState,
    ExternalInput,
    InternalInput,
    InternalInputEstimate,
    Noise,
};

struct VarId {
    std::string name;
    VarKind kind = VarKind::State;

    friend bool operator<(const VarId& a, const VarId& b) { return a.name < b.name; }
    friend bool operator==(const VarId& a, const VarId& b) {
        return a.name == b.name && a.kind == b.kind;
    }
};

// Canonical naming convention used throughout the toolkit. Parsing infers the
// kind from the prefix: xh -> estimator state, x -> state, u -> external
// input, wh -> internal input estimate, w -> internal input, s -> noise.
inline VarKind kind_from_name(const std::string& name) {
    if (name.rfind("y", 0) == 0) return VarKind::ExternalInput;  // measurement fed to f-hat
    if (name.rfind("xh", 0) == 0) return VarKind::EstimatorState;
    if (name.rfind("x", 0) == 0) return VarKind::State;
    if (name.rfind("u", 0) == 0) return VarKind::ExternalInput;
    if (name.rfind("wh", 0) == 0) return VarKind::InternalInputEstimate;
    if (name.rfind("w", 0) == 0) return VarKind::InternalInput;
    if (name.rfind("s", 0) == 0) return VarKind::Noise;
    throw InvalidParameterError("cannot infer variable kind from name '" + name + "'");
}

inline VarId var(const std::string& name) { return VarId{name, kind_from_name(name)}; }

// Monomial: variable name -> positive exponent. std::map gives the sorted
// canonical ordering required for byte-stable output.
using Monomial = std::map<std::string, int>;

class PolynomialExpr {
  public:
    // Absolute threshold below which coefficients are pruned.
    static constexpr double kZeroThreshold = 1e-15;

    PolynomialExpr() = default;

    explicit PolynomialExpr(double constant) {
        if (std::abs(constant) >= kZeroThreshold) terms_[Monomial{}] = constant;
    }

    static PolynomialExpr variable(const VarId& v) {
        PolynomialExpr p;
        p.terms_[Monomial{{v.name, 1}}] = 1.0;
        p.kinds_[v.name] = v.kind;
        return p;
    }

    static PolynomialExpr variable(const std::string& name) { return variable(var(name)); }

    const std::map<Monomial, double>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    int degree() const {
        int d = 0;
        for (const auto& [m, c] : terms_) {
            int t = 0;
            for (const auto& [v, e] : m) t += e;
            d = std::max(d, t);
        }
        return d;
    }

    std::set<std::string> free_variables() const {
        std::set<std::string> out;
        for (const auto& [m, c] : terms_)
            for (const auto& [v, e] : m) out.insert(v);
        return out;
    }

    VarKind kind_of(const std::string& name) const {
        auto it = kinds_.find(name);
        return it != kinds_.end() ? it->second : kind_from_name(name);
    }

    void add_term(const Monomial& m, double coeff) {
        for (const auto& [v, e] : m) {
            if (e <= 0) throw InvalidParameterError("non-positive exponent for '" + v + "'");
            if (!kinds_.count(v)) kinds_[v] = kind_from_name(v);
        }
        double& slot = terms_[m];
        slot += coeff;
        if (std::abs(slot) < kZeroThreshold) terms_.erase(m);
    }

    double eval(const std::map<std::string, double>& point) const {
        double acc = 0.0;
        for (const auto& [m, c] : terms_) {
            double t = c;
            for (const auto& [v, e] : m) {
                auto it = point.find(v);
                if (it == point.end())
                    throw MissingAssignmentError("eval: variable '" + v + "' unassigned");
                t *= ipow(it->second, e);
            }
            acc += t;
        }
        return acc;
    }

    PolynomialExpr operator+(const PolynomialExpr& o) const {
        PolynomialExpr r = *this;
        r.merge_kinds(o);
        for (const auto& [m, c] : o.terms_) r.add_term(m, c);
        return r;
    }

    PolynomialExpr operator-(const PolynomialExpr& o) const {
        PolynomialExpr r = *this;
        r.merge_kinds(o);
        for (const auto& [m, c] : o.terms_) r.add_term(m, -c);
        return r;
    }

    PolynomialExpr operator*(const PolynomialExpr& o) const {
        PolynomialExpr r;
        r.kinds_ = kinds_;
        r.merge_kinds(o);
        for (const auto& [ma, ca] : terms_) {
            for (const auto& [mb, cb] : o.terms_) {
                Monomial m = ma;
                for (const auto& [v, e] : mb) m[v] += e;
                r.add_term(m, ca * cb);
            }
        }
        return r;
    }

    PolynomialExpr operator*(double k) const {
        PolynomialExpr r;
        r.kinds_ = kinds_;
        for (const auto& [m, c] : terms_) r.add_term(m, c * k);
        return r;
    }

    PolynomialExpr pow(int n) const {
        if (n < 0) throw InvalidParameterError("negative polynomial power");
        PolynomialExpr r(1.0);
        PolynomialExpr base = *this;
        while (n > 0) {
            if (n & 1) r = r * base;
            base = base * base;
            n >>= 1;
        }
        return r;
    }

    // Full polynomial composition: every free variable of *this must have an
    // image. Exact expansion.
    PolynomialExpr substitute(const std::map<std::string, PolynomialExpr>& images) const {
        PolynomialExpr r;
        for (const auto& [m, c] : terms_) {
            PolynomialExpr t(c);
            for (const auto& [v, e] : m) {
                auto it = images.find(v);
                if (it == images.end())
                    throw MissingAssignmentError("substitute: no image for variable '" + v + "'");
                t = t * it->second.pow(e);
            }
            r = r + t;
        }
        return r;
    }

    // Degree-preserving variant: rejects images of degree > 1.
    PolynomialExpr affine_substitute(const std::map<std::string, PolynomialExpr>& images) const {
        for (const auto& [v, img] : images)
            if (img.degree() > 1)
                throw InvalidParameterError("affine_substitute: image of '" + v +
                                            "' has degree > 1");
        return substitute(images);
    }

    // Closes E[p] over the listed noise variables (independent, zero-mean,
    // per-variable standard deviation). Odd moments vanish; even moments are
    // (k-1)!! sigma^k. Exact for any degree.
    PolynomialExpr gaussian_expectation(const std::map<std::string, double>& sigma) const {
        for (const auto& [v, s] : sigma)
            if (s < 0) throw InvalidParameterError("gaussian_expectation: sigma < 0 for '" + v + "'");
        PolynomialExpr r;
        r.kinds_ = kinds_;
        for (const auto& [m, c] : terms_) {
            Monomial rest;
            double factor = 1.0;
            for (const auto& [v, e] : m) {
                auto it = sigma.find(v);
                if (it == sigma.end()) {
                    rest[v] = e;
                } else if (e % 2 == 1) {
                    factor = 0.0;
                } else {
                    factor *= double_factorial(e - 1) * ipow(it->second, e);
                }
            }
            if (factor != 0.0) r.add_term(rest, c * factor);
        }
        return r;
    }

    // Textual term list, one "coeff * var^e * ..." per line. Exact round-trip.
    std::string to_text() const {
        std::ostringstream out;
        for (const auto& [m, c] : terms_) {
            out << format_double(c);
            for (const auto& [v, e] : m) out << " * " << v << "^" << e;
            out << "\n";
        }
        return out.str();
    }

    static PolynomialExpr from_text(const std::string& text) {
        PolynomialExpr r;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            Monomial m;
            double coeff = 0.0;
            std::istringstream ls(line);
            std::string tok;
            bool first = true;
            while (std::getline(ls, tok, '*')) {
                tok.erase(0, tok.find_first_not_of(" \t"));
                tok.erase(tok.find_last_not_of(" \t\r") + 1);
                if (tok.empty()) throw InvalidParameterError("empty factor in term: " + line);
                if (first) {
                    char* end = nullptr;
                    coeff = std::strtod(tok.c_str(), &end);
                    if (end == tok.c_str() || *end != '\0')
                        throw InvalidParameterError("bad coefficient '" + tok + "'");
                    first = false;
                } else {
                    auto caret = tok.find('^');
                    std::string name = caret == std::string::npos ? tok : tok.substr(0, caret);
                    int e = caret == std::string::npos ? 1 : std::atoi(tok.c_str() + caret + 1);
                    if (name.empty() || e <= 0)
                        throw InvalidParameterError("bad factor '" + tok + "'");
                    m[name] += e;
                }
            }
            if (first) throw InvalidParameterError("term without coefficient: " + line);
            r.add_term(m, coeff);
        }
        return r;
    }

    static std::string format_double(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }

    static double ipow(double base, int e) {
        double r = 1.0;
        while (e > 0) {
            if (e & 1) r *= base;
            base *= base;
            e >>= 1;
        }
        return r;
    }

  private:
    static double double_factorial(int n) {
        double r = 1.0;
        for (int k = n; k > 1; k -= 2) r *= k;
        return r;
    }

    void merge_kinds(const PolynomialExpr& o) {
        for (const auto& [v, k] : o.kinds_) kinds_.emplace(v, k);
    }

    std::map<Monomial, double> terms_;
    std::map<std::string, VarKind> kinds_;
};

inline PolynomialExpr operator*(double k, const PolynomialExpr& p) { return p * k; }

}  // namespace posafe
