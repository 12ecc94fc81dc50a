#pragma once

// Small-gain composition: inter-subsystem gain matrices, the cyclic
// small-gain condition (pointwise sufficient test plus an exact max-cycle-mean
// test for linear gains), construction of scaling functions, network-level
// barrier and simulation-function composition, and a Monte Carlo spot check
// of the composed expectation condition.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "posafe/certificate.hpp"
#include "posafe/common.hpp"
#include "posafe/gains.hpp"
#include "posafe/grid.hpp"
#include "posafe/system.hpp"

namespace posafe {

struct CompositionError : Error {
    using Error::Error;
};

// N x N matrix of monomial gains; entry (i, j) is the gain from subsystem j
// into subsystem i. Diagonal entries hold the local contraction as a linear
// gain; off-diagonal entries exist only where an edge j -> i exists.
struct GainMatrix {
    int n = 0;
    std::vector<std::vector<std::optional<GainFn>>> entry;

    explicit GainMatrix(int size) : n(size), entry(size, std::vector<std::optional<GainFn>>(size)) {
        if (size < 1) throw InvalidParameterError("GainMatrix: size must be >= 1");
    }

    void set(int i, int j, GainFn g) {
        if (i == j && (g.p != 1.0 || g.a <= 0 || g.a >= 1))
            throw InvalidParameterError("GainMatrix: diagonal must be linear with coefficient in (0,1)");
        if (g.is_zero())
            entry[i][j].reset();  // structural zero
        else
            entry[i][j] = g;
    }
};

// Adjacency used for composition: the block count plus the directed edges of
// the interconnection (port offsets are irrelevant at the gain level).
struct Topology {
    int n = 0;
    std::vector<std::pair<int, int>> edges;  // (from, to)

    static Topology of(const NetworkSpec& net) {
        Topology t;
        t.n = int(net.blocks.size());
        for (const auto& e : net.edges) t.edges.emplace_back(e.from, e.to);
        std::sort(t.edges.begin(), t.edges.end());
        t.edges.erase(std::unique(t.edges.begin(), t.edges.end()), t.edges.end());
        return t;
    }
};

// Diagonal: kappa_bar_i as a linear gain. Off-diagonal (i, j), present iff an
// edge j -> i exists: rho_i composed with the inverse of alpha_j.
inline GainMatrix build_gain_matrix(const std::vector<BarrierCertificate>& certs,
                                    const Topology& topo) {
    if (int(certs.size()) != topo.n)
        throw DimensionError("build_gain_matrix: certificate count != block count");
    GainMatrix G(topo.n);
    for (int i = 0; i < topo.n; ++i) {
        certs[i].validate();
        G.set(i, i, GainFn::linear(certs[i].kappa_bar));
    }
    for (const auto& [j, i] : topo.edges) {
        if (i == j) continue;
        if (certs[i].rho.is_zero()) continue;  // structural zero
        if (certs[i].alpha.is_zero())
            throw InvalidParameterError("build_gain_matrix: zero alpha is not invertible");
        G.set(i, j, certs[i].rho.compose(certs[j].alpha.inverse()));
    }
    return G;
}

struct SmallGainResult {
    bool pass = false;
    bool pointwise = false;      // the sufficient every-entry test already settled it
    double max_cycle_mean = -std::numeric_limits<double>::infinity();  // log scale
    std::vector<int> witness_cycle;
    std::string message;
};

namespace detail {

// Strongly connected components (iterative Tarjan); returns component id per node.
inline std::vector<int> scc_ids(int n, const std::vector<std::vector<int>>& adj) {
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1), state(n, 0);
    std::vector<int> stack, call;
    int next_index = 0, next_comp = 0;
    std::vector<bool> on_stack(n, false);
    for (int root = 0; root < n; ++root) {
        if (index[root] != -1) continue;
        call.push_back(root);
        std::vector<std::size_t> edge_pos(n, 0);
        while (!call.empty()) {
            int v = call.back();
            if (index[v] == -1) {
                index[v] = low[v] = next_index++;
                stack.push_back(v);
                on_stack[v] = true;
            }
            bool descended = false;
            while (edge_pos[v] < adj[v].size()) {
                int w = adj[v][edge_pos[v]++];
                if (index[w] == -1) {
                    call.push_back(w);
                    descended = true;
                    break;
                }
                if (on_stack[w]) low[v] = std::min(low[v], index[w]);
            }
            if (descended) continue;
            if (low[v] == index[v]) {
                while (true) {
                    int w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp[w] = next_comp;
                    if (w == v) break;
                }
                ++next_comp;
            }
            call.pop_back();
            if (!call.empty()) low[call.back()] = std::min(low[call.back()], low[v]);
        }
    }
    return comp;
}

}  // namespace detail

// Exact rule for monomial gains: a cycle composition c * s^q is below the
// identity on all s > 0 iff q = 1 and c < 1. Implementation: (a) fast
// sufficient test, every entry below identity; (b) exact test when all
// entries lying on cycles are linear, via the maximum cycle mean of
// log-coefficients (negative iff every cycle product is < 1).
inline SmallGainResult check_small_gain(const GainMatrix& G) {
    const int n = G.n;
    SmallGainResult r;
    // (a) pointwise sufficient test.
    bool all_lt = true;
    for (int i = 0; i < n && all_lt; ++i)
        for (int j = 0; j < n && all_lt; ++j)
            if (G.entry[i][j] && !G.entry[i][j]->less_than_identity()) all_lt = false;
    if (all_lt) {
        r.pass = true;
        r.pointwise = true;
        r.message = "every gain entry is below identity";
        return r;
    }
    // Graph: edge j -> i for entry (i, j). Find which entries lie on cycles.
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (G.entry[i][j]) adj[j].push_back(i);
    std::vector<int> comp = detail::scc_ids(n, adj);
    auto cyclic = [&](int i, int j) {
        return comp[i] == comp[j] && (i != j || G.entry[i][i].has_value());
    };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (G.entry[i][j] && cyclic(i, j) && G.entry[i][j]->p != 1.0) {
                r.message = "nonlinear gain (exponent " + std::to_string(G.entry[i][j]->p) +
                            ") on a cycle through " + std::to_string(j) + "->" +
                            std::to_string(i) + ": no cycle composition can be below identity";
                r.witness_cycle = {j, i};
                return r;
            }
    // (b) Karp's maximum cycle mean over log-coefficients, restricted to
    // cyclic entries (acyclic entries cannot contribute to any cycle).
    struct E {
        int to;
        double w;
    };
    std::vector<std::vector<E>> edges(n);
    bool any_edge = false;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (G.entry[i][j] && cyclic(i, j)) {
                edges[j].push_back({i, std::log(G.entry[i][j]->a)});
                any_edge = true;
            }
    if (!any_edge) {
        r.pass = true;
        r.message = "no cycles in the gain graph";
        return r;
    }
    const double ninf = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> D(n + 1, std::vector<double>(n, ninf));
    std::vector<std::vector<int>> parent(n + 1, std::vector<int>(n, -1));
    for (int v = 0; v < n; ++v) D[0][v] = 0.0;
    for (int k = 1; k <= n; ++k)
        for (int u = 0; u < n; ++u) {
            if (D[k - 1][u] == ninf) continue;
            for (const auto& e : edges[u])
                if (D[k - 1][u] + e.w > D[k][e.to]) {
                    D[k][e.to] = D[k - 1][u] + e.w;
                    parent[k][e.to] = u;
                }
        }
    double best = ninf;
    int best_v = -1;
    for (int v = 0; v < n; ++v) {
        if (D[n][v] == ninf) continue;
        double worst = std::numeric_limits<double>::infinity();
        for (int k = 0; k < n; ++k) {
            if (D[k][v] == ninf) continue;
            worst = std::min(worst, (D[n][v] - D[k][v]) / double(n - k));
        }
        if (worst > best) {
            best = worst;
            best_v = v;
        }
    }
    r.max_cycle_mean = best;
    r.pass = best < 0.0;
    if (r.pass) {
        r.message = "all cycle products below 1 (max log cycle mean " +
                    PolynomialExpr::format_double(best) + ")";
        return r;
    }
    // Witness: walk parents from the attaining vertex; the first repeated
    // vertex closes a cycle on a maximum-weight walk.
    std::vector<int> walk;
    std::vector<int> seen_at(n, -1);
    int v = best_v;
    for (int k = n; k >= 0 && v != -1; --k) {
        if (seen_at[v] != -1) {
            r.witness_cycle.assign(walk.begin() + seen_at[v], walk.end());
            std::reverse(r.witness_cycle.begin(), r.witness_cycle.end());
            break;
        }
        seen_at[v] = int(walk.size());
        walk.push_back(v);
        v = k > 0 ? parent[k][v] : -1;
    }
    r.message = "cycle with product >= 1 found (max log cycle mean " +
                PolynomialExpr::format_double(best) + ")";
    return r;
}

struct ScalingSet {
    std::vector<GainFn> sigma;  // linear, sigma_i(s) = s_i * s
};

// Constructs linear scalings sigma_i(s) = s_i s with (s_j / s_i) k_ij < 1 for
// every present off-diagonal entry, by shortest-path potentials on the
// difference-constraint graph (weights -log k_ij shrunk by half the cycle
// slack). Falls back to identity when the pointwise test already passes.
inline ScalingSet find_scalings(const GainMatrix& G) {
    SmallGainResult sg = check_small_gain(G);
    if (!sg.pass) throw CompositionError("find_scalings: small-gain condition failed: " + sg.message);
    ScalingSet out;
    out.sigma.assign(G.n, GainFn::identity());
    if (sg.pointwise) return out;
    const int n = G.n;
    // Constraint p_j < p_i - log k_ij for entry (i, j): edge i -> j with
    // weight -log k_ij - h, where h > 0 eats the strictness.
    const double h = sg.max_cycle_mean < 0 ? -0.5 * sg.max_cycle_mean
                                           : 0.5;  // acyclic gain graph: any h works
    std::vector<double> p(n, 0.0);
    for (int round = 0; round < n; ++round) {
        bool changed = false;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j || !G.entry[i][j]) continue;
                const double w = -std::log(G.entry[i][j]->a) - h;
                if (p[i] + w < p[j] - 1e-15) {
                    p[j] = p[i] + w;
                    changed = true;
                }
            }
        if (!changed) break;
        if (round == n - 1)
            throw CompositionError("find_scalings: potential iteration failed to converge");
    }
    for (int i = 0; i < n; ++i) out.sigma[i] = GainFn::linear(std::exp(p[i]));
    // Post-assert every constraint.
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && G.entry[i][j] &&
                (out.sigma[j].a / out.sigma[i].a) * G.entry[i][j]->a >= 1.0)
                throw CompositionError("find_scalings: constructed scalings violate entry (" +
                                       std::to_string(i) + "," + std::to_string(j) + ")");
    return out;
}

// Network-level barrier: B(x, xh) = max_i sigma_i^{-1}(B_i) with the composed
// constants. gamma < lambda is required for the composed bound to be usable.
struct ComposedCbf {
    std::vector<BarrierCertificate> locals;
    std::vector<GainFn> sigma;
    double gamma = 0.0, lambda = 0.0, kappa = 0.0, psi = 0.0;
};

inline ComposedCbf compose_cbf(const std::vector<BarrierCertificate>& certs,
                               const ScalingSet& scalings, const Topology& topo) {
    if (certs.empty()) throw InvalidParameterError("compose_cbf: no certificates");
    if (int(certs.size()) != topo.n || scalings.sigma.size() != certs.size())
        throw DimensionError("compose_cbf: certificate/scaling/topology size mismatch");
    for (std::size_t i = 1; i < certs.size(); ++i)
        if (certs[i].flavor != certs[0].flavor)
            throw InvalidParameterError("compose_cbf: mixed certificate flavors");
    for (const auto& s : scalings.sigma)
        if (s.is_zero() || s.p != 1.0)
            throw InvalidParameterError(
                "compose_cbf: scalings must be linear (concavity of the max requires it)");
    GainMatrix G = build_gain_matrix(certs, topo);
    SmallGainResult sg = check_small_gain(G);
    if (!sg.pass) throw CompositionError("compose_cbf: small-gain condition failed: " + sg.message);

    ComposedCbf out;
    out.locals = certs;
    out.sigma = scalings.sigma;
    out.gamma = out.lambda = out.psi = 0.0;
    double kappa = 0.0;
    for (int i = 0; i < topo.n; ++i) {
        const double si = scalings.sigma[i].a;
        out.gamma = std::max(out.gamma, certs[i].gamma_bar / si);
        out.lambda = std::max(out.lambda, certs[i].lambda_bar / si);
        out.psi = std::max(out.psi, certs[i].psi_bar / si);
        for (int j = 0; j < topo.n; ++j)
            if (G.entry[i][j])
                kappa = std::max(kappa, (scalings.sigma[j].a / si) * G.entry[i][j]->a);
    }
    out.kappa = kappa;
    if (out.kappa <= 0 || out.kappa >= 1)
        throw CompositionError("compose_cbf: composed kappa " +
                               PolynomialExpr::format_double(out.kappa) + " not in (0,1)");
    if (out.gamma >= out.lambda)
        throw CompositionError("compose_cbf: infeasible, composed gamma " +
                               PolynomialExpr::format_double(out.gamma) + " >= lambda " +
                               PolynomialExpr::format_double(out.lambda));
    return out;
}

// Network-level simulation function phi = max_i zeta_i^{-1}(phi_i) with
// composed (eps, mu, c).
struct ComposedSsf {
    std::vector<SimulationCertificate> locals;
    std::vector<GainFn> zeta;
    GainFn eps;
    double mu = 0.0, c = 0.0;
};

// Analog of build_gain_matrix for simulation functions: diagonal mu_bar_i,
// off-diagonal varrho_i composed with the inverse of eps_j.
inline GainMatrix build_mu_gain_matrix(const std::vector<SimulationCertificate>& certs,
                                       const Topology& topo) {
    if (int(certs.size()) != topo.n)
        throw DimensionError("build_mu_gain_matrix: certificate count != block count");
    GainMatrix G(topo.n);
    for (int i = 0; i < topo.n; ++i) {
        certs[i].validate();
        G.set(i, i, GainFn::linear(certs[i].mu_bar));
    }
    for (const auto& [j, i] : topo.edges) {
        if (i == j || certs[i].varrho.is_zero()) continue;
        G.set(i, j, certs[i].varrho.compose(certs[j].eps.inverse()));
    }
    return G;
}

inline ComposedSsf compose_ssf(const std::vector<SimulationCertificate>& certs,
                               const ScalingSet& zeta, const Topology& topo) {
    if (certs.empty()) throw InvalidParameterError("compose_ssf: no certificates");
    if (int(certs.size()) != topo.n || zeta.sigma.size() != certs.size())
        throw DimensionError("compose_ssf: certificate/scaling/topology size mismatch");
    for (const auto& z : zeta.sigma)
        if (z.is_zero() || z.p != 1.0)
            throw InvalidParameterError("compose_ssf: scalings must be linear");
    GainMatrix G = build_mu_gain_matrix(certs, topo);
    SmallGainResult sg = check_small_gain(G);
    if (!sg.pass) throw CompositionError("compose_ssf: small-gain condition failed: " + sg.message);

    ComposedSsf out;
    out.locals = certs;
    out.zeta = zeta.sigma;
    // Composed eps: all zeta_i^{-1} o eps_i must share one exponent; take the
    // smallest coefficient (a valid common lower envelope). Heterogeneous
    // exponents are rejected rather than silently under-approximated.
    for (std::size_t i = 0; i < certs.size(); ++i) {
        GainFn g = GainFn(1.0 / zeta.sigma[i].a, 1.0).compose(certs[i].eps);
        if (i == 0) {
            out.eps = g;
        } else if (g.p != out.eps.p) {
            throw CompositionError(
                "compose_ssf: heterogeneous eps gain exponents; no common envelope");
        } else if (g.a < out.eps.a) {
            out.eps = g;
        }
    }
    double mu = 0.0, c = 0.0;
    for (int i = 0; i < topo.n; ++i) {
        const double zi = zeta.sigma[i].a;
        c = std::max(c, certs[i].c_bar / zi);
        for (int j = 0; j < topo.n; ++j)
            if (G.entry[i][j]) mu = std::max(mu, (zeta.sigma[j].a / zi) * G.entry[i][j]->a);
    }
    out.mu = mu;
    out.c = c;
    if (out.mu <= 0 || out.mu >= 1)
        throw CompositionError("compose_ssf: composed mu " +
                               PolynomialExpr::format_double(out.mu) + " not in (0,1)");
    return out;
}

struct SpotcheckOptions {
    int noise_draws = 500;  // nested samples for the expectation of the max
    double se_multiplier = 4.0;
};

struct SpotcheckViolation {
    NetworkState state;
    double mean = 0.0, bound = 0.0, se = 0.0;
};

struct SpotcheckReport {
    int samples = 0;
    std::vector<SpotcheckViolation> violations;
    double worst_excess = -std::numeric_limits<double>::infinity();  // (mean - bound)/se
    bool pass() const { return violations.empty(); }
};

// Monte Carlo spot check of the composed expectation condition
// E[B(next)] <= max{kappa B, psi} at random network states: the max over
// blocks prevents a closed form, so the expectation over the noise is
// estimated by nested sampling and violations are flagged only beyond
// `se_multiplier` standard errors.
inline SpotcheckReport spotcheck_composed_condition(const ComposedCbf& composed,
                                                    const NetworkSpec& net, int samples,
                                                    std::uint64_t seed,
                                                    const SpotcheckOptions& opts = {}) {
    const int n = int(net.blocks.size());
    if (int(composed.locals.size()) != n)
        throw DimensionError("spotcheck: composed certificate does not match the network");
    if (samples < 1) throw InvalidParameterError("spotcheck: samples must be >= 1");

    // Compiled local barriers over (x_i, xh_i).
    std::vector<CompiledPoly> cB(n);
    for (int i = 0; i < n; ++i) {
        std::vector<std::string> order;
        for (int j = 0; j < net.blocks[i].sub.state_dim; ++j) order.push_back(names::x(j));
        for (int j = 0; j < net.blocks[i].sub.state_dim; ++j) order.push_back(names::xh(j));
        cB[i] = CompiledPoly(composed.locals[i].B, order);
    }
    auto composed_B = [&](const NetworkState& st) {
        double m = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            std::vector<double> buf = st[i].x;
            buf.insert(buf.end(), st[i].xh.begin(), st[i].xh.end());
            m = std::max(m, cB[i].eval(buf.data()) / composed.sigma[i].a);
        }
        return m;
    };

    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto sample_in = [&](const RegionSpec& region) {
        std::uniform_int_distribution<std::size_t> pick(0, region.boxes.size() - 1);
        const BoxRegion& b = region.boxes[pick(gen)];
        std::vector<double> x;
        for (const auto& [lo, hi] : b.iv) x.push_back(lo + (hi - lo) * unit(gen));
        return x;
    };

    SpotcheckReport report;
    report.samples = samples;
    for (int s = 0; s < samples; ++s) {
        NetworkState st(n);
        for (int i = 0; i < n; ++i) {
            st[i].x = sample_in(net.blocks[i].sub.X);
            st[i].xh = sample_in(net.blocks[i].sub.X);
        }
        const double Bv = composed_B(st);
        const double bound = std::max(composed.kappa * Bv, composed.psi);
        double sum = 0.0, sumsq = 0.0;
        for (int d = 0; d < opts.noise_draws; ++d) {
            std::vector<NoiseDraw> noise(n);
            for (int i = 0; i < n; ++i) {
                const auto& sub = net.blocks[i].sub;
                for (int j = 0; j < sub.state_dim; ++j)
                    noise[i].s1.push_back(sub.sigma1[j] * gauss(gen));
                for (int j = 0; j < sub.output_dim; ++j)
                    noise[i].s2.push_back(sub.sigma2[j] * gauss(gen));
            }
            const double v = composed_B(step(net, st, noise));
            sum += v;
            sumsq += v * v;
        }
        const double mean = sum / opts.noise_draws;
        const double var = std::max(0.0, sumsq / opts.noise_draws - mean * mean);
        const double se = std::sqrt(var / opts.noise_draws);
        const double excess = se > 0 ? (mean - bound) / se
                                     : (mean > bound ? std::numeric_limits<double>::infinity()
                                                     : -std::numeric_limits<double>::infinity());
        report.worst_excess = std::max(report.worst_excess, excess);
        if (mean > bound + opts.se_multiplier * se)
            report.violations.push_back({st, mean, bound, se});
    }
    return report;
}

}  // namespace posafe
