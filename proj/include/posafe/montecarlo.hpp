#pragma once

// Deterministic parallel Monte Carlo validation: closed-loop simulation of the
// interconnected network with its estimators, empirical exit-probability and
// estimation-accuracy estimation with exact binomial confidence intervals,
// and consistency verdicts against certified bounds.
//
// Reproducibility contract: all noise is drawn from counter-based streams
// keyed by (master seed, trial, block, step, coordinate), and tallies are
// integer sums, so reports are bit-identical for any worker count.

#include <boost/math/distributions/beta.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "posafe/common.hpp"
#include "posafe/grid.hpp"
#include "posafe/region.hpp"
#include "posafe/rng.hpp"
#include "posafe/system.hpp"

namespace posafe {

enum class InitPolicy { FixedPoint, GridXa, UniformXa };
enum class EstimatorInit { EqualToState, FixedOffset, UniformXa };
// Product: a trial exits only when every block is in its unsafe box
// simultaneously (the composed certificate's unsafe set is the product of the
// local ones). AnyBlock: any single block unsafe counts, the practically
// interesting event; the certified bound covers only the product event.
enum class UnsafeMode { Product, AnyBlock };

struct SimConfig {
    long trials = 1000;
    long horizon = 10;
    std::uint64_t master_seed = 0;
    InitPolicy init_policy = InitPolicy::GridXa;
    int grid_points_per_dim = 3;        // for GridXa
    std::vector<double> fixed_point;    // for FixedPoint, per state coordinate
    EstimatorInit estimator_init = EstimatorInit::EqualToState;
    std::vector<double> estimator_offset;  // for FixedOffset
    int workers = 0;                    // 0 = hardware concurrency
    UnsafeMode unsafe_mode = UnsafeMode::Product;
    // Leaving the modeling region X before reaching the unsafe set is tallied
    // separately; the conservative default counts it as an exit.
    bool left_domain_is_exit = true;

    void validate() const {
        if (trials < 1) throw InvalidParameterError("SimConfig: trials must be >= 1");
        if (horizon < 0) throw InvalidParameterError("SimConfig: horizon must be >= 0");
        if (init_policy == InitPolicy::GridXa && grid_points_per_dim < 1)
            throw InvalidParameterError("SimConfig: grid_points_per_dim must be >= 1");
    }
};

struct InitialConditionResult {
    std::vector<double> point;  // empty for UniformXa
    long trials = 0;
    long events = 0;       // exits (or accuracy exceedances)
    long left_domain = 0;  // subset of the above under the conservative default
    long diverged = 0;
    double frequency = 0.0;
    double ci_low = 0.0, ci_high = 1.0;  // exact two-sided 95% binomial interval
};

struct SafetyReport {
    std::string kind;  // "exit-probability" or "estimation-accuracy"
    std::vector<InitialConditionResult> per_ic;
    long total_trials = 0;
    double certified_bound = 1.0;
    std::size_t worst_ic = 0;  // index of the largest empirical frequency
    std::string verdict;       // "consistent" or "violation"
    std::uint64_t seed = 0;
    double runtime_seconds = 0.0;  // excluded from render() for bit-stability

    std::string render() const {
        std::ostringstream out;
        out << kind << " report (seed " << seed << ", " << total_trials << " trials)\n";
        for (std::size_t i = 0; i < per_ic.size(); ++i) {
            const auto& r = per_ic[i];
            out << "  ic " << i;
            if (!r.point.empty()) {
                out << " (";
                for (std::size_t j = 0; j < r.point.size(); ++j)
                    out << (j ? ", " : "") << PolynomialExpr::format_double(r.point[j]);
                out << ")";
            }
            out << ": " << r.events << "/" << r.trials << " freq "
                << PolynomialExpr::format_double(r.frequency) << " ci ["
                << PolynomialExpr::format_double(r.ci_low) << ", "
                << PolynomialExpr::format_double(r.ci_high) << "]"
                << " left-domain " << r.left_domain << " diverged " << r.diverged << "\n";
        }
        out << "  certified bound " << PolynomialExpr::format_double(certified_bound)
            << ", verdict: " << verdict << "\n";
        return out.str();
    }
};

// Exact two-sided binomial confidence interval via the beta quantile form.
inline std::pair<double, double> clopper_pearson(long events, long trials,
                                                 double confidence = 0.95) {
    if (trials < 1 || events < 0 || events > trials)
        throw InvalidParameterError("clopper_pearson: invalid counts");
    const double alpha = 1.0 - confidence;
    double lo = 0.0, hi = 1.0;
    if (events > 0)
        lo = boost::math::quantile(boost::math::beta_distribution<double>(
                                       double(events), double(trials - events + 1)),
                                   alpha / 2);
    if (events < trials)
        hi = boost::math::quantile(boost::math::beta_distribution<double>(
                                       double(events + 1), double(trials - events)),
                                   1.0 - alpha / 2);
    return {lo, hi};
}

// Consistency verdict: violation iff some initial condition's exact lower
// confidence limit strictly exceeds the certified bound.
inline std::string validate_bound(const SafetyReport& report) {
    for (const auto& r : report.per_ic)
        if (r.ci_low > report.certified_bound) return "violation";
    return "consistent";
}

namespace detail {

// Term-compiled closed-loop network for the simulation hot path. Per-block
// coordinate buffer layout: x | xh | u | w | wh | s1 | s2.
struct CompiledBlock {
    int nx = 0, nu = 0, nw = 0, ny = 0;
    int ou = 0, ow = 0, owh = 0, os1 = 0, os2 = 0, len = 0;
    std::vector<CompiledPoly> f, fhat, h1, laws;
    std::vector<std::pair<double, double>> sat;
};

struct CompiledNetwork {
    const NetworkSpec* net = nullptr;
    std::vector<CompiledBlock> blocks;

    explicit CompiledNetwork(const NetworkSpec& n) : net(&n) {
        for (const auto& b : n.blocks) {
            CompiledBlock c;
            c.nx = b.sub.state_dim;
            c.nu = b.sub.input_dim;
            c.nw = b.sub.internal_input_dim;
            c.ny = b.sub.output_dim;
            c.ou = 2 * c.nx;
            c.ow = c.ou + c.nu;
            c.owh = c.ow + c.nw;
            c.os1 = c.owh + c.nw;
            c.os2 = c.os1 + c.nx;
            c.len = c.os2 + c.ny;
            std::vector<std::string> order;
            for (int i = 0; i < c.nx; ++i) order.push_back(names::x(i));
            for (int i = 0; i < c.nx; ++i) order.push_back(names::xh(i));
            for (int i = 0; i < c.nu; ++i) order.push_back(names::u(i));
            for (int i = 0; i < c.nw; ++i) order.push_back(names::w(i));
            for (int i = 0; i < c.nw; ++i) order.push_back(names::wh(i));
            for (int i = 0; i < c.nx; ++i) order.push_back(names::s1(i));
            for (int i = 0; i < c.ny; ++i) order.push_back(names::s2(i));
            for (const auto& p : b.sub.f) c.f.emplace_back(p, order);
            AugmentedSystem aug = augment(b.sub, b.est);
            for (int i = 0; i < c.nx; ++i) c.fhat.emplace_back(aug.joint[c.nx + i], order);
            std::vector<std::string> x_order(order.begin(), order.begin() + c.nx);
            for (const auto& p : b.sub.h1) c.h1.emplace_back(p, x_order);
            for (const auto& p : b.ctrl.laws) c.laws.emplace_back(p, order);
            c.sat = b.ctrl.saturation;
            blocks.push_back(std::move(c));
        }
    }
};

struct TrialOutcome {
    bool unsafe_product = false, unsafe_any = false;
    bool left_domain = false, diverged = false;
    double sup_err = 0.0;  // sup over the horizon of max-block inf-norm error
};

// Runs one closed-loop trial. `csv` (optional) receives rows
// trial,k,block,d,v,d_hat,v_hat,u for 2-state single-input blocks.
inline TrialOutcome run_trial(const CompiledNetwork& cn, NetworkState st, long trial,
                              const CounterRng& rng, long horizon, std::ostream* csv,
                              bool stop_on_unsafe = true) {
    const NetworkSpec& net = *cn.net;
    const int n = int(cn.blocks.size());
    std::vector<std::vector<double>> buf(n), y1(n), yh1(n);
    for (int i = 0; i < n; ++i) {
        buf[i].assign(cn.blocks[i].len, 0.0);
        y1[i].assign(net.blocks[i].sub.internal_output_dim, 0.0);
        yh1[i].assign(net.blocks[i].sub.internal_output_dim, 0.0);
    }
    TrialOutcome out;
    for (long k = 0;; ++k) {
        // Classify the current state.
        bool all_unsafe = true, any_unsafe = false, left = false;
        double err = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto& sub = net.blocks[i].sub;
            const bool in_b = sub.Xb.contains(st[i].x);
            all_unsafe = all_unsafe && in_b;
            any_unsafe = any_unsafe || in_b;
            left = left || !sub.X.contains(st[i].x);
            for (int j = 0; j < cn.blocks[i].nx; ++j)
                err = std::max(err, std::abs(st[i].x[j] - st[i].xh[j]));
        }
        out.sup_err = std::max(out.sup_err, err);
        if (all_unsafe) out.unsafe_product = true;
        if (any_unsafe) out.unsafe_any = true;
        if (left && !any_unsafe) out.left_domain = true;
        if (out.unsafe_product && stop_on_unsafe) return out;  // nothing more to learn
        if (k >= horizon) return out;

        // Internal outputs from current states, then routing.
        for (int i = 0; i < n; ++i) {
            const CompiledBlock& c = cn.blocks[i];
            for (std::size_t r = 0; r < c.h1.size(); ++r) {
                y1[i][r] = c.h1[r].eval(st[i].x.data());
                yh1[i][r] = c.h1[r].eval(st[i].xh.data());
            }
            double* b = buf[i].data();
            for (int j = 0; j < c.nx; ++j) {
                b[j] = st[i].x[j];
                b[c.nx + j] = st[i].xh[j];
            }
            for (int j = 0; j < c.nw; ++j) b[c.ow + j] = b[c.owh + j] = 0.0;
        }
        for (const auto& e : net.edges) {
            const CompiledBlock& c = cn.blocks[e.to];
            for (int j = 0; j < e.width; ++j) {
                buf[e.to][c.ow + e.dst_offset + j] = y1[e.from][e.src_offset + j];
                buf[e.to][c.owh + e.dst_offset + j] = yh1[e.from][e.src_offset + j];
            }
        }
        // Controls, noise, synchronous advance.
        for (int i = 0; i < n; ++i) {
            const CompiledBlock& c = cn.blocks[i];
            double* b = buf[i].data();
            for (int j = 0; j < c.nu; ++j) {
                double u = c.laws[j].eval(b);
                b[c.ou + j] = std::min(std::max(u, c.sat[j].first), c.sat[j].second);
            }
            const auto& sub = net.blocks[i].sub;
            for (int j = 0; j < c.nx; ++j)
                b[c.os1 + j] = sub.sigma1[j] * rng.normal(trial, i, k, j);
            for (int j = 0; j < c.ny; ++j)
                b[c.os2 + j] = sub.sigma2[j] * rng.normal(trial, i, k, c.nx + j);
            if (csv && c.nx == 2 && c.nu == 1)
                *csv << trial << "," << k << "," << i << "," << b[0] << "," << b[1] << ","
                     << b[2] << "," << b[3] << "," << b[c.ou] << "\n";
        }
        for (int i = 0; i < n; ++i) {
            const CompiledBlock& c = cn.blocks[i];
            const double* b = buf[i].data();
            for (int j = 0; j < c.nx; ++j) {
                st[i].x[j] = c.f[j].eval(b);
                st[i].xh[j] = c.fhat[j].eval(b);
                if (!std::isfinite(st[i].x[j]) || !std::isfinite(st[i].xh[j])) {
                    out.diverged = true;
                    return out;
                }
            }
        }
    }
}

struct InitialCondition {
    std::vector<double> point;  // per-block shared state point; empty = uniform draw
};

inline std::vector<InitialCondition> initial_conditions(const NetworkSpec& net,
                                                        const SimConfig& cfg) {
    std::vector<InitialCondition> ics;
    const SubsystemSpec& sub0 = net.blocks.front().sub;
    switch (cfg.init_policy) {
        case InitPolicy::FixedPoint: {
            if (int(cfg.fixed_point.size()) != sub0.state_dim)
                throw DimensionError("SimConfig: fixed_point dimension != state_dim");
            ics.push_back({cfg.fixed_point});
            break;
        }
        case InitPolicy::GridXa: {
            if (sub0.Xa.boxes.size() != 1)
                throw InvalidParameterError("GridXa policy needs a single-box initial region");
            MultiGrid g;
            g.append_box(sub0.Xa.boxes.front(),
                         std::max(2, cfg.grid_points_per_dim));
            // grid_axis adds the midpoint; for odd counts it coincides with a
            // grid node, keeping exactly grid_points_per_dim per axis.
            std::vector<double> pt(g.dim());
            for (std::uint64_t f = 0; f < g.total; ++f) {
                g.point(f, pt.data());
                ics.push_back({pt});
            }
            break;
        }
        case InitPolicy::UniformXa:
            ics.push_back({{}});
            break;
    }
    return ics;
}

}  // namespace detail

namespace detail {

// Shared engine: per-initial-condition event tallies with deterministic
// counter-based noise. `accuracy_eps < 0` selects exit counting; otherwise
// a trial's event is sup-error >= accuracy_eps.
inline SafetyReport run_monte_carlo(const NetworkSpec& net, const SimConfig& cfg,
                                    double certified_bound, double accuracy_eps,
                                    std::ostream* csv) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const CompiledNetwork cn(net);
    const CounterRng rng(cfg.master_seed);
    const int n = int(net.blocks.size());
    auto ics = initial_conditions(net, cfg);
    const std::size_t nic = ics.size();

    // Distribute trials over initial conditions: the remainder goes to the
    // earliest conditions so the total is preserved.
    std::vector<long> per_ic_trials(nic, cfg.trials / long(nic));
    for (long r = 0; r < cfg.trials % long(nic); ++r) ++per_ic_trials[r];
    std::vector<long> ic_base(nic + 1, 0);
    for (std::size_t i = 0; i < nic; ++i) ic_base[i + 1] = ic_base[i] + per_ic_trials[i];
    const long total = ic_base[nic];

    struct Tally {
        long events = 0, left = 0, diverged = 0;
    };
    std::vector<Tally> tallies(nic);
    int workers = cfg.workers > 0 ? cfg.workers : int(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    if (csv) workers = 1;  // keep CSV rows in trial order
    if (long(workers) > total) workers = int(total);

    auto body = [&](std::vector<Tally>& local, long begin, long end) {
        for (long t = begin; t < end; ++t) {
            const std::size_t ic =
                std::size_t(std::upper_bound(ic_base.begin(), ic_base.end(), t) -
                            ic_base.begin()) - 1;
            NetworkState st(n);
            for (int i = 0; i < n; ++i) {
                const SubsystemSpec& sub = net.blocks[i].sub;
                if (!ics[ic].point.empty()) {
                    st[i].x = ics[ic].point;
                } else {
                    const BoxRegion& box = sub.Xa.boxes.front();
                    for (int j = 0; j < sub.state_dim; ++j) {
                        const auto& [lo, hi] = box.iv[j];
                        st[i].x.push_back(lo + (hi - lo) *
                                                   rng.uniform(t, i, CounterRng::kInitStep, j));
                    }
                }
                switch (cfg.estimator_init) {
                    case EstimatorInit::EqualToState:
                        st[i].xh = st[i].x;
                        break;
                    case EstimatorInit::FixedOffset: {
                        if (int(cfg.estimator_offset.size()) != sub.state_dim)
                            throw DimensionError("SimConfig: estimator_offset dimension");
                        st[i].xh = st[i].x;
                        for (int j = 0; j < sub.state_dim; ++j)
                            st[i].xh[j] += cfg.estimator_offset[j];
                        break;
                    }
                    case EstimatorInit::UniformXa: {
                        const BoxRegion& box = sub.Xa.boxes.front();
                        for (int j = 0; j < sub.state_dim; ++j) {
                            const auto& [lo, hi] = box.iv[j];
                            st[i].xh.push_back(
                                lo + (hi - lo) *
                                         rng.uniform(t, i, CounterRng::kInitStep,
                                                     sub.state_dim + j));
                        }
                        break;
                    }
                }
            }
            TrialOutcome o = run_trial(cn, std::move(st), t, rng, cfg.horizon, csv,
                                       /*stop_on_unsafe=*/accuracy_eps < 0);
            bool event;
            if (accuracy_eps >= 0) {
                event = o.sup_err >= accuracy_eps || o.diverged;
            } else {
                const bool unsafe = cfg.unsafe_mode == UnsafeMode::Product ? o.unsafe_product
                                                                           : o.unsafe_any;
                event = unsafe || o.diverged ||
                        (cfg.left_domain_is_exit && o.left_domain);
            }
            if (event) ++local[ic].events;
            if (o.left_domain) ++local[ic].left;
            if (o.diverged) ++local[ic].diverged;
        }
    };
    if (workers == 1) {
        body(tallies, 0, total);
    } else {
        std::vector<std::vector<Tally>> partial(workers, std::vector<Tally>(nic));
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] { body(partial[w], total * w / workers,
                                            total * (w + 1) / workers); });
        for (auto& th : pool) th.join();
        for (const auto& p : partial)
            for (std::size_t i = 0; i < nic; ++i) {
                tallies[i].events += p[i].events;
                tallies[i].left += p[i].left;
                tallies[i].diverged += p[i].diverged;
            }
    }

    SafetyReport report;
    report.kind = accuracy_eps >= 0 ? "estimation-accuracy" : "exit-probability";
    report.seed = cfg.master_seed;
    report.total_trials = total;
    report.certified_bound = certified_bound;
    double worst = -1.0;
    for (std::size_t i = 0; i < nic; ++i) {
        InitialConditionResult r;
        r.point = ics[i].point;
        r.trials = per_ic_trials[i];
        r.events = tallies[i].events;
        r.left_domain = tallies[i].left;
        r.diverged = tallies[i].diverged;
        r.frequency = r.trials > 0 ? double(r.events) / double(r.trials) : 0.0;
        if (r.trials > 0) std::tie(r.ci_low, r.ci_high) = clopper_pearson(r.events, r.trials);
        if (r.frequency > worst) {
            worst = r.frequency;
            report.worst_ic = i;
        }
        report.per_ic.push_back(std::move(r));
    }
    report.verdict = validate_bound(report);
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace detail

// Empirical probability that a trial reaches the unsafe set within the
// horizon, per initial condition, against the certified exit bound delta.
inline SafetyReport estimate_exit_probability(const NetworkSpec& net, const SimConfig& cfg,
                                              double certified_delta = 1.0,
                                              std::ostream* csv = nullptr) {
    return detail::run_monte_carlo(net, cfg, certified_delta, -1.0, csv);
}

// Empirical probability that the sup-norm estimation error exceeds eps
// somewhere on the horizon, against the certified tail theta.
inline SafetyReport estimate_estimation_accuracy(const NetworkSpec& net, double eps,
                                                 const SimConfig& cfg,
                                                 double certified_theta = 1.0,
                                                 std::ostream* csv = nullptr) {
    if (eps < 0) throw InvalidParameterError("estimate_estimation_accuracy: eps < 0");
    return detail::run_monte_carlo(net, cfg, certified_theta, eps, csv);
}

}  // namespace posafe
