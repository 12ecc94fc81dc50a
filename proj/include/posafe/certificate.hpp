#pragma once

// Certificate data types (control barrier functions in augmented and
// estimator-only flavor, stochastic (pseudo-)simulation functions), condition
// verification by exact Gaussian expectation plus grid extremization,
// constant calibration, and the linear-system matrix fast path for SSFs.
//
// Grid verification is sound on the grid, not between grid points; an
// optional rigorous mode takes a user-supplied Lipschitz constant for the
// residual and certifies the continuum when the grid margin clears
// L * (half grid spacing).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "posafe/common.hpp"
#include "posafe/gains.hpp"
#include "posafe/grid.hpp"
#include "posafe/polynomial.hpp"
#include "posafe/region.hpp"
#include "posafe/system.hpp"

namespace posafe {

enum class CertFlavor { Augmented, Estimator };

// Candidate barrier B with its gains and constants. Augmented flavor: B over
// (x, xh). Estimator flavor: B over xh only.
struct BarrierCertificate {
    PolynomialExpr B;
    GainFn alpha;             // class-K-infinity lower-bound gain (must not be zero)
    GainFn rho = GainFn::zero();  // internal-input gain, zero allowed
    double kappa_bar = 0.5;   // contraction, in (0,1)
    double psi_bar = 0.0;     // >= 0
    double gamma_bar = 0.0;   // >= 0, initial-set level
    double lambda_bar = 1.0;  // > 0, unsafe-set level
    CertFlavor flavor = CertFlavor::Augmented;

    void validate() const {
        if (alpha.is_zero()) throw InvalidParameterError("BarrierCertificate: alpha must be K-infinity");
        if (kappa_bar <= 0 || kappa_bar >= 1)
            throw InvalidParameterError("BarrierCertificate: kappa_bar must lie in (0,1)");
        if (psi_bar < 0 || gamma_bar < 0)
            throw InvalidParameterError("BarrierCertificate: psi_bar, gamma_bar must be >= 0");
        if (lambda_bar <= 0) throw InvalidParameterError("BarrierCertificate: lambda_bar must be > 0");
        for (const auto& v : B.free_variables()) {
            VarKind k = B.kind_of(v);
            bool ok = flavor == CertFlavor::Augmented
                          ? (k == VarKind::State || k == VarKind::EstimatorState)
                          : k == VarKind::EstimatorState;
            if (!ok)
                throw InvalidParameterError("BarrierCertificate: variable '" + v +
                                            "' not permitted by flavor");
        }
    }
};

// Candidate SPSF/SSF phi with (eps, varrho, mu_bar, c_bar). Either an explicit
// polynomial over (x, xh) or a quadratic form phi = (x-xh)^T M (x-xh).
struct SimulationCertificate {
    PolynomialExpr phi;  // ignored when M nonempty
    Matrix M;            // symmetric positive definite when present
    GainFn eps;          // error lower-bound gain (must not be zero)
    GainFn varrho = GainFn::zero();  // internal-input-mismatch gain, zero allowed
    double mu_bar = 0.5;             // in (0,1)
    double c_bar = 0.0;              // >= 0

    void validate() const {
        if (eps.is_zero()) throw InvalidParameterError("SimulationCertificate: eps must be K-infinity");
        if (mu_bar <= 0 || mu_bar >= 1)
            throw InvalidParameterError("SimulationCertificate: mu_bar must lie in (0,1)");
        if (c_bar < 0) throw InvalidParameterError("SimulationCertificate: c_bar must be >= 0");
    }

    PolynomialExpr phi_poly() const {
        if (M.empty()) return phi;
        const int n = int(M.size());
        check_matrix(M, n, n, "SimulationCertificate M");
        PolynomialExpr out;
        std::vector<PolynomialExpr> e;
        for (int i = 0; i < n; ++i)
            e.push_back(PolynomialExpr::variable(names::x(i)) -
                        PolynomialExpr::variable(names::xh(i)));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (M[i][j] != 0) out = out + M[i][j] * (e[i] * e[j]);
        return out;
    }
};

struct ConditionReport {
    std::string name;
    bool pass = false;
    double margin = 0.0;  // worst residual; <= 0 means the condition holds on the grid
    std::map<std::string, double> witness;
    // Rigorous mode: margin the continuum claim would need, or 0 when unused.
    double rigorous_threshold = 0.0;
    bool rigorous_pass = false;
};

struct VerificationReport {
    std::vector<ConditionReport> conditions;
    int resolution = 0;

    bool pass() const {
        for (const auto& c : conditions)
            if (!c.pass) return false;
        return !conditions.empty();
    }

    std::string render() const {
        std::string out;
        out += "verification report (grid resolution " + std::to_string(resolution) + ")\n";
        for (const auto& c : conditions) {
            out += "  [" + std::string(c.pass ? "pass" : "FAIL") + "] " + c.name +
                   "  margin " + PolynomialExpr::format_double(c.margin);
            if (!c.witness.empty()) {
                out += "  at";
                for (const auto& [k, v] : c.witness)
                    out += " " + k + "=" + PolynomialExpr::format_double(v);
            }
            out += "\n";
        }
        out += std::string("  overall: ") + (pass() ? "pass" : "FAIL") + "\n";
        return out;
    }
};

struct VerifyOptions {
    GridScanOptions scan;
    // Rigorous continuum mode: when lipschitz > 0, a condition additionally
    // passes rigorously if margin <= -lipschitz * (half max grid spacing).
    double lipschitz = 0.0;
};

namespace detail {

inline double inf_norm(const double* v, int n) {
    double m = 0.0;
    for (int i = 0; i < n; ++i) m = std::max(m, std::abs(v[i]));
    return m;
}

// All box-choice combinations for a product of union-of-box regions, as
// MultiGrids over the concatenated coordinates.
inline std::vector<MultiGrid> product_grids(const std::vector<const RegionSpec*>& parts,
                                            int resolution) {
    std::vector<MultiGrid> grids;
    std::vector<std::size_t> choice(parts.size(), 0);
    while (true) {
        MultiGrid g;
        for (std::size_t i = 0; i < parts.size(); ++i)
            g.append_box(parts[i]->boxes[choice[i]], resolution);
        grids.push_back(std::move(g));
        std::size_t i = parts.size();
        while (i-- > 0) {
            if (++choice[i] < parts[i]->boxes.size()) break;
            choice[i] = 0;
            if (i == 0) return grids;
        }
    }
}

// Largest half-spacing over all axes of all grids (rigorous-mode radius).
inline double max_half_spacing(const std::vector<MultiGrid>& grids) {
    double h = 0.0;
    for (const auto& g : grids)
        for (const auto& ax : g.axes)
            for (std::size_t i = 0; i + 1 < ax.size(); ++i)
                h = std::max(h, 0.5 * (ax[i + 1] - ax[i]));
    return h;
}

// Worst-case (maximum) residual of fn over a list of grids, deterministic
// under parallel chunking: ties go to the earlier grid / smaller flat index.
inline Extremum worst_residual(const std::vector<MultiGrid>& grids,
                               const std::function<double(const double*)>& fn,
                               const GridScanOptions& opts) {
    Extremum worst;
    bool first = true;
    for (const auto& g : grids) {
        Extremum m = grid_scan(g, fn, opts).max;
        if (first || m.value > worst.value) worst = m;
        first = false;
    }
    return worst;
}

inline std::map<std::string, double> name_point(const std::vector<std::string>& order,
                                                const std::vector<double>& pt) {
    std::map<std::string, double> m;
    for (std::size_t i = 0; i < order.size(); ++i) m[order[i]] = pt[i];
    return m;
}

inline ConditionReport make_report(std::string name, const Extremum& worst,
                                   const std::vector<std::string>& order,
                                   const VerifyOptions& opts, double half_spacing) {
    ConditionReport r;
    r.name = std::move(name);
    r.margin = worst.value;
    r.pass = worst.value <= 0.0;
    r.witness = name_point(order, worst.point);
    if (opts.lipschitz > 0) {
        r.rigorous_threshold = -opts.lipschitz * half_spacing;
        r.rigorous_pass = worst.value <= r.rigorous_threshold;
    }
    return r;
}

inline void run_chunked(std::uint64_t total, int worker_hint,
                        const std::function<void(int, std::uint64_t, std::uint64_t)>& body) {
    const int workers = effective_workers(worker_hint, total);
    if (workers == 1) {
        body(0, 0, total);
        return;
    }
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back(body, w, total * w / workers, total * (w + 1) / workers);
    for (auto& t : pool) t.join();
}

inline int count_workers(std::uint64_t total, int hint) { return effective_workers(hint, total); }

}  // namespace detail

// phi(x, xh) of one subsystem's barrier after one synchronous step, with the
// measurement eliminated and the expectation over both noise channels closed
// in closed form. Result is a polynomial over (x, xh, u, w, wh).
inline PolynomialExpr expected_next_barrier(const PolynomialExpr& B, const SubsystemSpec& sub,
                                            const EstimatorSpec& est) {
    AugmentedSystem aug = augment(sub, est);
    std::map<std::string, PolynomialExpr> images;
    for (int i = 0; i < sub.state_dim; ++i) {
        images.emplace(names::x(i), aug.joint[i]);
        images.emplace(names::xh(i), aug.joint[sub.state_dim + i]);
    }
    return B.substitute(images).gaussian_expectation(sub.noise_sigmas());
}

// Expected next-step value of an estimator-flavor barrier: xh advances through
// f-hat with the measurement y kept as a free (adversarial) variable.
inline PolynomialExpr expected_next_estimator_barrier(const PolynomialExpr& B,
                                                      const SubsystemSpec& sub,
                                                      const EstimatorSpec& est) {
    auto fhat = est.fhat_polys(sub);
    std::map<std::string, PolynomialExpr> images;
    for (int i = 0; i < sub.state_dim; ++i) images.emplace(names::xh(i), fhat[i]);
    return B.substitute(images).gaussian_expectation(sub.noise_sigmas());
}

// Verifies the four augmented-flavor barrier conditions:
//   (a) B(x,xh) >= alpha(||[h1(x); h1(xh)]||_inf^2) on X x X
//   (b) B <= gamma_bar on Xa x Xa
//   (c) B >= lambda_bar on Xb x X
//   (d) with u = ctrl(xh, wh): for every (xh, wh), the supremum over (x, w)
//       of E[B(next)] - max{kappa_bar B, rho(||[w; wh]||_inf^2), psi_bar} is <= 0
inline VerificationReport verify_lcbf_augmented(const BarrierCertificate& cert,
                                                const SubsystemSpec& sub, const EstimatorSpec& est,
                                                const ControllerSpec& ctrl, int resolution,
                                                const VerifyOptions& opts = {}) {
    cert.validate();
    if (cert.flavor != CertFlavor::Augmented)
        throw InvalidParameterError("verify_lcbf_augmented: certificate flavor is not augmented");
    sub.validate();
    est.validate(sub);
    ctrl.validate(sub);
    const int nx = sub.state_dim, nu = sub.input_dim, nw = sub.internal_input_dim;
    const int nh = sub.internal_output_dim;

    std::vector<std::string> pair_order, full_order;
    for (int i = 0; i < nx; ++i) pair_order.push_back(names::x(i));
    for (int i = 0; i < nx; ++i) pair_order.push_back(names::xh(i));
    full_order = pair_order;
    for (int i = 0; i < nu; ++i) full_order.push_back(names::u(i));
    for (int i = 0; i < nw; ++i) full_order.push_back(names::w(i));
    for (int i = 0; i < nw; ++i) full_order.push_back(names::wh(i));

    CompiledPoly cB(cert.B, pair_order);
    std::vector<std::string> x_order(pair_order.begin(), pair_order.begin() + nx);
    std::vector<CompiledPoly> ch1;
    for (const auto& h : sub.h1) ch1.emplace_back(h, x_order);

    VerificationReport report;
    report.resolution = resolution;

    // (a) output lower bound on X x X.
    {
        auto grids = detail::product_grids({&sub.X, &sub.X}, resolution);
        auto fn = [&](const double* p) {
            double hn = 0.0;
            for (int i = 0; i < nh; ++i) {
                hn = std::max(hn, std::abs(ch1[i].eval(p)));        // h1(x)
                hn = std::max(hn, std::abs(ch1[i].eval(p + nx)));   // h1(xh)
            }
            return cert.alpha(hn * hn) - cB.eval(p);
        };
        report.conditions.push_back(detail::make_report(
            "output-lower-bound", detail::worst_residual(grids, fn, opts.scan), pair_order, opts,
            detail::max_half_spacing(grids)));
    }
    // (b) initial-set upper bound on Xa x Xa.
    {
        auto grids = detail::product_grids({&sub.Xa, &sub.Xa}, resolution);
        auto fn = [&](const double* p) { return cB.eval(p) - cert.gamma_bar; };
        report.conditions.push_back(detail::make_report(
            "initial-upper-bound", detail::worst_residual(grids, fn, opts.scan), pair_order, opts,
            detail::max_half_spacing(grids)));
    }
    // (c) unsafe-set lower bound on Xb x X.
    {
        auto grids = detail::product_grids({&sub.Xb, &sub.X}, resolution);
        auto fn = [&](const double* p) { return cert.lambda_bar - cB.eval(p); };
        report.conditions.push_back(detail::make_report(
            "unsafe-lower-bound", detail::worst_residual(grids, fn, opts.scan), pair_order, opts,
            detail::max_half_spacing(grids)));
    }
    // (d) expectation decrease.
    {
        CompiledPoly cEB(expected_next_barrier(cert.B, sub, est), full_order);
        auto outer = detail::product_grids({&sub.X}, resolution);   // xh
        auto inner = detail::product_grids({&sub.X}, resolution);   // x
        // Append W to both: wh rides with the outer (control-side) grid.
        std::vector<MultiGrid> outer_g, inner_g;
        for (auto g : outer) {
            g.append_box(sub.W, resolution);
            outer_g.push_back(std::move(g));
        }
        for (auto g : inner) {
            g.append_box(sub.W, resolution);
            inner_g.push_back(std::move(g));
        }
        std::uint64_t outer_total = 0, inner_total = 0;
        for (const auto& g : outer_g) outer_total += g.total;
        for (const auto& g : inner_g) inner_total += g.total;
        if (outer_total * inner_total > opts.scan.point_cap)
            throw ResourceError("verify_lcbf_augmented: expectation grid of " +
                                std::to_string(outer_total * inner_total) +
                                " points exceeds cap " + std::to_string(opts.scan.point_cap));

        struct Worst {
            double value = -std::numeric_limits<double>::infinity();
            std::vector<std::uint64_t> key;  // (og, oi, ig, ii) for tie-breaking
            std::vector<double> buf;
        };
        double half = std::max(detail::max_half_spacing(outer_g), detail::max_half_spacing(inner_g));
        Worst global;
        for (std::size_t og = 0; og < outer_g.size(); ++og) {
            const MultiGrid& O = outer_g[og];
            const int workers = detail::count_workers(O.total, opts.scan.workers);
            std::vector<Worst> partial(workers);
            detail::run_chunked(O.total, opts.scan.workers,
                                [&](int w, std::uint64_t begin, std::uint64_t end) {
                std::vector<double> opt_buf(nx + nw);
                std::vector<double> buf(2 * nx + nu + 2 * nw);
                std::vector<double> xh(nx), wh(nw);
                Worst local;
                for (std::uint64_t oi = begin; oi < end; ++oi) {
                    O.point(oi, opt_buf.data());
                    for (int i = 0; i < nx; ++i) xh[i] = opt_buf[i];
                    for (int i = 0; i < nw; ++i) wh[i] = opt_buf[nx + i];
                    std::vector<double> u = ctrl.eval(xh, wh);
                    for (int i = 0; i < nx; ++i) buf[nx + i] = xh[i];
                    for (int i = 0; i < nu; ++i) buf[2 * nx + i] = u[i];
                    for (int i = 0; i < nw; ++i) buf[2 * nx + nu + nw + i] = wh[i];
                    const double whn = detail::inf_norm(wh.data(), nw);
                    for (std::size_t ig = 0; ig < inner_g.size(); ++ig) {
                        const MultiGrid& I = inner_g[ig];
                        std::vector<double> in_buf(nx + nw);
                        for (std::uint64_t ii = 0; ii < I.total; ++ii) {
                            I.point(ii, in_buf.data());
                            for (int i = 0; i < nx; ++i) buf[i] = in_buf[i];
                            for (int i = 0; i < nw; ++i) buf[2 * nx + nu + i] = in_buf[nx + i];
                            const double Bv = cB.eval(buf.data());
                            const double wn =
                                std::max(whn, detail::inf_norm(in_buf.data() + nx, nw));
                            double bound = std::max(cert.kappa_bar * Bv, cert.psi_bar);
                            if (!cert.rho.is_zero()) bound = std::max(bound, cert.rho(wn * wn));
                            const double res = cEB.eval(buf.data()) - bound;
                            if (res > local.value) {
                                local.value = res;
                                local.key = {std::uint64_t(og), oi, std::uint64_t(ig), ii};
                                local.buf = buf;
                            }
                        }
                    }
                }
                partial[w] = std::move(local);
            });
            for (const auto& p : partial)
                if (p.value > global.value || (p.value == global.value && !p.key.empty() &&
                                               (global.key.empty() || p.key < global.key)))
                    global = p;
        }
        ConditionReport r;
        r.name = "expectation-decrease";
        r.margin = global.value;
        r.pass = global.value <= 0.0;
        r.witness = detail::name_point(full_order, global.buf);
        if (opts.lipschitz > 0) {
            r.rigorous_threshold = -opts.lipschitz * half;
            r.rigorous_pass = r.margin <= r.rigorous_threshold;
        }
        report.conditions.push_back(std::move(r));
    }
    return report;
}

// Estimator-flavor barrier conditions: B over xh only, unsafe set inflated by
// the accuracy radius, the measurement quantified adversarially over the
// declared output region.
inline VerificationReport verify_lcbf_estimator(const BarrierCertificate& cert,
                                                const SubsystemSpec& sub, const EstimatorSpec& est,
                                                const ControllerSpec& ctrl, double eps,
                                                int resolution, const VerifyOptions& opts = {}) {
    cert.validate();
    if (cert.flavor != CertFlavor::Estimator)
        throw InvalidParameterError("verify_lcbf_estimator: certificate flavor is not estimator");
    if (eps < 0) throw InvalidParameterError("verify_lcbf_estimator: eps < 0");
    sub.validate();
    est.validate(sub);
    ctrl.validate(sub);
    const int nx = sub.state_dim, nu = sub.input_dim, nw = sub.internal_input_dim;
    const int nh = sub.internal_output_dim, ny = sub.output_dim;
    if (int(sub.Y2.dim()) != ny)
        throw DimensionError("verify_lcbf_estimator: Y2 dimension != output_dim");

    std::vector<std::string> xh_order, full_order;
    for (int i = 0; i < nx; ++i) xh_order.push_back(names::xh(i));
    full_order = xh_order;
    for (int i = 0; i < nu; ++i) full_order.push_back(names::u(i));
    for (int i = 0; i < nw; ++i) full_order.push_back(names::wh(i));
    for (int i = 0; i < ny; ++i) full_order.push_back(names::y(i));

    CompiledPoly cB(cert.B, xh_order);
    std::vector<std::string> x_order;
    for (int i = 0; i < nx; ++i) x_order.push_back(names::x(i));
    std::vector<CompiledPoly> ch1;
    for (const auto& h : sub.h1) ch1.emplace_back(h, x_order);  // positional: fed xh values

    VerificationReport report;
    report.resolution = resolution;

    {
        auto grids = detail::product_grids({&sub.X}, resolution);
        auto fn = [&](const double* p) {
            double hn = 0.0;
            for (int i = 0; i < nh; ++i) hn = std::max(hn, std::abs(ch1[i].eval(p)));
            return cert.alpha(hn * hn) - cB.eval(p);
        };
        report.conditions.push_back(detail::make_report(
            "output-lower-bound", detail::worst_residual(grids, fn, opts.scan), xh_order, opts,
            detail::max_half_spacing(grids)));
    }
    {
        auto grids = detail::product_grids({&sub.Xa}, resolution);
        auto fn = [&](const double* p) { return cB.eval(p) - cert.gamma_bar; };
        report.conditions.push_back(detail::make_report(
            "initial-upper-bound", detail::worst_residual(grids, fn, opts.scan), xh_order, opts,
            detail::max_half_spacing(grids)));
    }
    {
        RegionSpec inflated = inflate_unsafe(sub.Xb, eps, sub.X);
        auto grids = detail::product_grids({&inflated}, resolution);
        auto fn = [&](const double* p) { return cert.lambda_bar - cB.eval(p); };
        report.conditions.push_back(detail::make_report(
            "unsafe-lower-bound", detail::worst_residual(grids, fn, opts.scan), xh_order, opts,
            detail::max_half_spacing(grids)));
    }
    {
        CompiledPoly cEB(expected_next_estimator_barrier(cert.B, sub, est), full_order);
        RegionSpec y_region{sub.Y2};
        auto outer_g = detail::product_grids({&sub.X}, resolution);  // xh
        for (auto& g : outer_g) g.append_box(sub.W, resolution);     // wh
        auto inner_g = detail::product_grids({&y_region}, resolution);
        std::uint64_t outer_total = 0, inner_total = 0;
        for (const auto& g : outer_g) outer_total += g.total;
        for (const auto& g : inner_g) inner_total += g.total;
        if (outer_total * inner_total > opts.scan.point_cap)
            throw ResourceError("verify_lcbf_estimator: grid exceeds point cap");

        struct Worst {
            double value = -std::numeric_limits<double>::infinity();
            std::vector<std::uint64_t> key;
            std::vector<double> buf;
        };
        double half = std::max(detail::max_half_spacing(outer_g), detail::max_half_spacing(inner_g));
        Worst global;
        for (std::size_t og = 0; og < outer_g.size(); ++og) {
            const MultiGrid& O = outer_g[og];
            const int workers = detail::count_workers(O.total, opts.scan.workers);
            std::vector<Worst> partial(workers);
            detail::run_chunked(O.total, opts.scan.workers,
                                [&](int w, std::uint64_t begin, std::uint64_t end) {
                std::vector<double> opt_buf(nx + nw);
                std::vector<double> buf(nx + nu + nw + ny);
                std::vector<double> xh(nx), wh(nw);
                Worst local;
                for (std::uint64_t oi = begin; oi < end; ++oi) {
                    O.point(oi, opt_buf.data());
                    for (int i = 0; i < nx; ++i) xh[i] = buf[i] = opt_buf[i];
                    for (int i = 0; i < nw; ++i) wh[i] = buf[nx + nu + i] = opt_buf[nx + i];
                    std::vector<double> u = ctrl.eval(xh, wh);
                    for (int i = 0; i < nu; ++i) buf[nx + i] = u[i];
                    const double Bv = cB.eval(buf.data());
                    const double whn = detail::inf_norm(wh.data(), nw);
                    double bound = std::max(cert.kappa_bar * Bv, cert.psi_bar);
                    if (!cert.rho.is_zero()) bound = std::max(bound, cert.rho(whn * whn));
                    for (std::size_t ig = 0; ig < inner_g.size(); ++ig) {
                        const MultiGrid& I = inner_g[ig];
                        for (std::uint64_t ii = 0; ii < I.total; ++ii) {
                            I.point(ii, buf.data() + nx + nu + nw);
                            const double res = cEB.eval(buf.data()) - bound;
                            if (res > local.value) {
                                local.value = res;
                                local.key = {std::uint64_t(og), oi, std::uint64_t(ig), ii};
                                local.buf = buf;
                            }
                        }
                    }
                }
                partial[w] = std::move(local);
            });
            for (const auto& p : partial)
                if (p.value > global.value || (p.value == global.value && !p.key.empty() &&
                                               (global.key.empty() || p.key < global.key)))
                    global = p;
        }
        ConditionReport r;
        r.name = "expectation-decrease";
        r.margin = global.value;
        r.pass = global.value <= 0.0;
        r.witness = detail::name_point(full_order, global.buf);
        if (opts.lipschitz > 0) {
            r.rigorous_threshold = -opts.lipschitz * half;
            r.rigorous_pass = r.margin <= r.rigorous_threshold;
        }
        report.conditions.push_back(std::move(r));
    }
    return report;
}

// SPSF conditions:
//   (i)  eps(||x - xh||_inf) <= phi(x, xh) on X x X
//   (ii) E[phi(next)] <= max{mu_bar phi, varrho(||w - wh||_inf), c_bar}
inline VerificationReport verify_spsf(const SimulationCertificate& cert, const SubsystemSpec& sub,
                                      const EstimatorSpec& est, const ControllerSpec& ctrl,
                                      int resolution, const VerifyOptions& opts = {}) {
    cert.validate();
    sub.validate();
    est.validate(sub);
    ctrl.validate(sub);
    const int nx = sub.state_dim, nu = sub.input_dim, nw = sub.internal_input_dim;
    PolynomialExpr phi = cert.phi_poly();

    std::vector<std::string> pair_order, full_order;
    for (int i = 0; i < nx; ++i) pair_order.push_back(names::x(i));
    for (int i = 0; i < nx; ++i) pair_order.push_back(names::xh(i));
    full_order = pair_order;
    for (int i = 0; i < nu; ++i) full_order.push_back(names::u(i));
    for (int i = 0; i < nw; ++i) full_order.push_back(names::w(i));
    for (int i = 0; i < nw; ++i) full_order.push_back(names::wh(i));
    CompiledPoly cphi(phi, pair_order);

    VerificationReport report;
    report.resolution = resolution;

    {
        auto grids = detail::product_grids({&sub.X, &sub.X}, resolution);
        auto fn = [&](const double* p) {
            double en = 0.0;
            for (int i = 0; i < nx; ++i) en = std::max(en, std::abs(p[i] - p[nx + i]));
            return cert.eps(en) - cphi.eval(p);
        };
        report.conditions.push_back(detail::make_report(
            "error-lower-bound", detail::worst_residual(grids, fn, opts.scan), pair_order, opts,
            detail::max_half_spacing(grids)));
    }
    {
        CompiledPoly cEphi(expected_next_barrier(phi, sub, est), full_order);
        auto grids = detail::product_grids({&sub.X, &sub.X}, resolution);
        for (auto& g : grids) {
            g.append_box(sub.W, resolution);
            g.append_box(sub.W, resolution);
        }
        std::vector<double> buf(2 * nx + nu + 2 * nw);
        auto fn = [&, buf](const double* p) mutable {
            // p layout: x, xh, w, wh. Insert the control between xh and w.
            std::vector<double> xh(p + nx, p + 2 * nx), wh(p + 2 * nx + nw, p + 2 * nx + 2 * nw);
            std::vector<double> u = ctrl.eval(xh, wh);
            for (int i = 0; i < 2 * nx; ++i) buf[i] = p[i];
            for (int i = 0; i < nu; ++i) buf[2 * nx + i] = u[i];
            for (int i = 0; i < 2 * nw; ++i) buf[2 * nx + nu + i] = p[2 * nx + i];
            const double phiv = cphi.eval(p);
            double mis = 0.0;
            for (int i = 0; i < nw; ++i) mis = std::max(mis, std::abs(p[2 * nx + i] - wh[i]));
            double bound = std::max(cert.mu_bar * phiv, cert.c_bar);
            if (!cert.varrho.is_zero()) bound = std::max(bound, cert.varrho(mis));
            return cEphi.eval(buf.data()) - bound;
        };
        std::vector<std::string> scan_order = pair_order;
        for (int i = 0; i < nw; ++i) scan_order.push_back(names::w(i));
        for (int i = 0; i < nw; ++i) scan_order.push_back(names::wh(i));
        report.conditions.push_back(detail::make_report(
            "expectation-decrease", detail::worst_residual(grids, fn, opts.scan), scan_order, opts,
            detail::max_half_spacing(grids)));
    }
    return report;
}

struct MatrixSsfResult {
    double margin = 0.0;  // lambda_min(mu M - (1 + 2/pi) N^T M N), N = A - K C2
    double tol = 0.0;
    bool pass = false;
};

/// Linear-system fast path: phi = e^T M e is an SSF with linear-quadratic gain
// bookkeeping iff (1 + 2/pi_tilde) (A - K C2)^T M (A - K C2) <= mu_bar M in
// the semidefinite order. Returns the smallest eigenvalue of the slack.
inline MatrixSsfResult verify_matrix_ssf(const Matrix& M, const Matrix& A, const Matrix& K,
                                         const Matrix& C2, double pi_tilde, double mu_bar,
                                         double tol = -1.0) {
    if (pi_tilde <= 0) throw InvalidParameterError("verify_matrix_ssf: pi_tilde must be > 0");
    // mu_bar in (0,1) is required for a usable certificate, but the matrix
    // slack is well defined for any positive factor; allow exploration.
    if (mu_bar <= 0) throw InvalidParameterError("verify_matrix_ssf: mu_bar must be > 0");
    const int n = int(M.size());
    check_matrix(M, n, n, "verify_matrix_ssf M");
    const int q = int(K.empty() ? 0 : K[0].size());
    check_matrix(A, n, n, "verify_matrix_ssf A");
    check_matrix(K, n, q, "verify_matrix_ssf K");
    check_matrix(C2, q, n, "verify_matrix_ssf C2");
    auto to_eigen = [](const Matrix& m) {
        Eigen::MatrixXd e(m.size(), m.empty() ? 0 : m[0].size());
        for (int i = 0; i < e.rows(); ++i)
            for (int j = 0; j < e.cols(); ++j) e(i, j) = m[i][j];
        return e;
    };
    Eigen::MatrixXd Me = to_eigen(M);
    if ((Me - Me.transpose()).norm() > 1e-12 * (1.0 + Me.norm()))
        throw InvalidParameterError("verify_matrix_ssf: M is not symmetric");
    Eigen::MatrixXd N = to_eigen(A) - to_eigen(K) * to_eigen(C2);
    Eigen::MatrixXd slack = mu_bar * Me - (1.0 + 2.0 / pi_tilde) * N.transpose() * Me * N;
    slack = 0.5 * (slack + slack.transpose());  // symmetrize roundoff
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(slack);
    MatrixSsfResult r;
    r.margin = es.eigenvalues().minCoeff();
    r.tol = tol >= 0 ? tol : 1e-4 * Me.norm();
    r.pass = r.margin >= -r.tol;
    return r;
}

struct CalibrationResult {
    bool feasible = false;
    double gamma_bar = 0.0, lambda_bar = 0.0, kappa_bar = 0.0, psi_bar = 0.0;
    std::map<std::string, double> gamma_witness, lambda_witness, binding_witness;
    std::string message;
};

namespace detail {

inline std::vector<double> kappa_sweep() {
    std::vector<double> ks;
    for (int i = 0; i < 50; ++i) ks.push_back(0.5 + (0.99 - 0.5) * double(i) / 49.0);
    return ks;
}

inline std::vector<double> psi_sweep() {
    std::vector<double> ps;
    for (int e = -6; e <= 0; ++e)
        for (int m = 1; m <= 9; ++m) {
            double v = m * std::pow(10.0, double(e));
            if (v <= 1.0) ps.push_back(v);
        }
    ps.push_back(1.0);
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
    return ps;
}

}  // namespace detail

// Numeric stand-in for certificate synthesis: with B, alpha, rho fixed,
// calibrates the four constants. gamma_bar is the grid max of B over Xa x Xa,
// lambda_bar the grid min over Xb x X. kappa_bar and psi_bar come from fixed
// documented sweeps (50 kappa points in [0.5, 0.99]; psi over decades 1e-6..1
// with 1..9 mantissa refinement), picking the smallest feasible psi_bar and
// then the smallest kappa_bar achieving it, in one pass over the grid.
inline CalibrationResult calibrate_constants(const PolynomialExpr& B, const SubsystemSpec& sub,
                                             const EstimatorSpec& est, const ControllerSpec& ctrl,
                                             const GainFn& alpha, const GainFn& rho, int resolution,
                                             const VerifyOptions& opts = {}) {
    (void)alpha;  // fixed by the caller; enters verification, not calibration
    sub.validate();
    est.validate(sub);
    ctrl.validate(sub);
    const int nx = sub.state_dim, nu = sub.input_dim, nw = sub.internal_input_dim;

    std::vector<std::string> pair_order, full_order;
    for (int i = 0; i < nx; ++i) pair_order.push_back(names::x(i));
    for (int i = 0; i < nx; ++i) pair_order.push_back(names::xh(i));
    full_order = pair_order;
    for (int i = 0; i < nu; ++i) full_order.push_back(names::u(i));
    for (int i = 0; i < nw; ++i) full_order.push_back(names::w(i));
    for (int i = 0; i < nw; ++i) full_order.push_back(names::wh(i));

    CalibrationResult out;
    // gamma_bar over Xa x Xa.
    {
        auto grids = detail::product_grids({&sub.Xa, &sub.Xa}, resolution);
        CompiledPoly cB(B, pair_order);
        Extremum worst = detail::worst_residual(
            grids, [&](const double* p) { return cB.eval(p); }, opts.scan);
        out.gamma_bar = worst.value;
        out.gamma_witness = detail::name_point(pair_order, worst.point);
    }
    // lambda_bar over Xb x X (grid min = -max(-B)).
    {
        auto grids = detail::product_grids({&sub.Xb, &sub.X}, resolution);
        CompiledPoly cB(B, pair_order);
        Extremum worst = detail::worst_residual(
            grids, [&](const double* p) { return -cB.eval(p); }, opts.scan);
        out.lambda_bar = -worst.value;
        out.lambda_witness = detail::name_point(pair_order, worst.point);
    }
    if (out.lambda_bar <= 0) {
        out.message = "infeasible: B does not separate the unsafe set (lambda_bar <= 0)";
        return out;
    }

    // One pass over the expectation grid accumulating, per kappa candidate,
    // the psi level that the worst violation would require.
    const std::vector<double> kappas = detail::kappa_sweep();
    const std::vector<double> psis = detail::psi_sweep();
    const std::size_t nk = kappas.size();
    CompiledPoly cB(B, pair_order);
    CompiledPoly cEB(expected_next_barrier(B, sub, est), full_order);
    auto outer_g = detail::product_grids({&sub.X}, resolution);
    for (auto& g : outer_g) g.append_box(sub.W, resolution);
    auto inner_g = detail::product_grids({&sub.X}, resolution);
    for (auto& g : inner_g) g.append_box(sub.W, resolution);
    std::uint64_t outer_total = 0, inner_total = 0;
    for (const auto& g : outer_g) outer_total += g.total;
    for (const auto& g : inner_g) inner_total += g.total;
    if (outer_total * inner_total > opts.scan.point_cap)
        throw ResourceError("calibrate_constants: grid exceeds point cap");

    struct Acc {
        std::vector<double> psi_need;
        std::vector<std::vector<double>> witness;
        explicit Acc(std::size_t nk)
            : psi_need(nk, 0.0), witness(nk) {}
        Acc() = default;
    };
    Acc global(nk);
    for (std::size_t og = 0; og < outer_g.size(); ++og) {
        const MultiGrid& O = outer_g[og];
        const int workers = detail::count_workers(O.total, opts.scan.workers);
        std::vector<Acc> partial(workers, Acc(nk));
        detail::run_chunked(O.total, opts.scan.workers,
                            [&](int w, std::uint64_t begin, std::uint64_t end) {
            std::vector<double> opt_buf(nx + nw), buf(2 * nx + nu + 2 * nw), in_buf(nx + nw);
            std::vector<double> xh(nx), wh(nw);
            Acc& acc = partial[w];
            for (std::uint64_t oi = begin; oi < end; ++oi) {
                O.point(oi, opt_buf.data());
                for (int i = 0; i < nx; ++i) xh[i] = opt_buf[i];
                for (int i = 0; i < nw; ++i) wh[i] = opt_buf[nx + i];
                std::vector<double> u = ctrl.eval(xh, wh);
                for (int i = 0; i < nx; ++i) buf[nx + i] = xh[i];
                for (int i = 0; i < nu; ++i) buf[2 * nx + i] = u[i];
                for (int i = 0; i < nw; ++i) buf[2 * nx + nu + nw + i] = wh[i];
                const double whn = detail::inf_norm(wh.data(), nw);
                for (const auto& I : inner_g) {
                    for (std::uint64_t ii = 0; ii < I.total; ++ii) {
                        I.point(ii, in_buf.data());
                        for (int i = 0; i < nx; ++i) buf[i] = in_buf[i];
                        for (int i = 0; i < nw; ++i) buf[2 * nx + nu + i] = in_buf[nx + i];
                        const double EBv = cEB.eval(buf.data());
                        const double wn = std::max(whn, detail::inf_norm(in_buf.data() + nx, nw));
                        const double rhov = rho.is_zero() ? 0.0 : rho(wn * wn);
                        if (EBv <= rhov) continue;  // covered regardless of kappa, psi
                        const double Bv = cB.eval(buf.data());
                        for (std::size_t k = 0; k < nk; ++k) {
                            if (EBv <= kappas[k] * Bv) continue;
                            if (EBv > acc.psi_need[k]) {
                                acc.psi_need[k] = EBv;
                                acc.witness[k] = buf;
                            }
                        }
                    }
                }
            }
        });
        for (const auto& p : partial)
            for (std::size_t k = 0; k < nk; ++k)
                if (p.psi_need[k] > global.psi_need[k]) {
                    global.psi_need[k] = p.psi_need[k];
                    global.witness[k] = p.witness[k];
                }
    }

    // Smallest feasible psi from the sweep, then the smallest kappa for it.
    for (double psi : psis) {
        for (std::size_t k = 0; k < nk; ++k) {
            if (global.psi_need[k] <= psi) {
                out.feasible = true;
                out.kappa_bar = kappas[k];
                out.psi_bar = psi;
                if (!global.witness[k].empty())
                    out.binding_witness = detail::name_point(full_order, global.witness[k]);
                return out;
            }
        }
    }
    double best = *std::min_element(global.psi_need.begin(), global.psi_need.end());
    std::size_t bk = std::size_t(std::min_element(global.psi_need.begin(), global.psi_need.end()) -
                                 global.psi_need.begin());
    out.message = "infeasible: expectation condition needs psi_bar >= " +
                  PolynomialExpr::format_double(best) + ", beyond the sweep range";
    if (!global.witness[bk].empty())
        out.binding_witness = detail::name_point(full_order, global.witness[bk]);
    return out;
}

}  // namespace posafe
