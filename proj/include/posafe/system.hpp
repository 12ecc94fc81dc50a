#pragma once

// Data model and simulation stepping for partially observed discrete-time
// stochastic control subsystems, their observer-form estimators, the joint
// (x, x-hat) augmented system, and validated interconnections. Also ships the
// adaptive-cruise-control platoon generator used by the case study.
//
// Block-local variable naming convention (see polynomial.hpp):
//   x0..   state            xh0..  estimator state
//   u0..   external input   y0..   measurement (estimator input)
//   w0..   internal input   wh0..  internal input estimate
//   s1_0.. process noise    s2_0.. measurement noise

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "posafe/common.hpp"
#include "posafe/polynomial.hpp"
#include "posafe/region.hpp"

namespace posafe {

struct DivergedTrajectory : Error {
    using Error::Error;
};

namespace names {
inline std::string x(int i) { return "x" + std::to_string(i); }
inline std::string xh(int i) { return "xh" + std::to_string(i); }
inline std::string u(int i) { return "u" + std::to_string(i); }
inline std::string y(int i) { return "y" + std::to_string(i); }
inline std::string w(int i) { return "w" + std::to_string(i); }
inline std::string wh(int i) { return "wh" + std::to_string(i); }
inline std::string s1(int i) { return "s1_" + std::to_string(i); }
inline std::string s2(int i) { return "s2_" + std::to_string(i); }
}  // namespace names

using Matrix = std::vector<std::vector<double>>;

inline void check_matrix(const Matrix& m, std::size_t rows, std::size_t cols,
                         const std::string& label) {
    if (m.size() != rows) throw DimensionError(label + ": expected " + std::to_string(rows) + " rows");
    for (const auto& r : m)
        if (r.size() != cols) throw DimensionError(label + ": ragged or wrong-width row");
}

// One PO-dt-SCS subsystem: polynomial transition, polynomial internal output,
// affine measured output with additive noise, and its declared regions.
struct SubsystemSpec {
    int state_dim = 0;
    int input_dim = 0;            // external inputs u
    int internal_input_dim = 0;   // w
    int internal_output_dim = 0;  // y1
    int output_dim = 0;           // measured y2

    std::vector<PolynomialExpr> f;   // over (x, u, w, s1), size state_dim
    std::vector<PolynomialExpr> h1;  // over x, size internal_output_dim
    Matrix C2;                       // y2 = C2 x + s2
    std::vector<double> sigma1;      // process noise std per state coordinate
    std::vector<double> sigma2;      // measurement noise std per output

    RegionSpec X;   // modeling region
    RegionSpec Xa;  // initial region
    RegionSpec Xb;  // unsafe region (union of boxes)
    BoxRegion W;    // internal input range
    BoxRegion Y2;   // declared measured-output range (estimator-side checks)

    void validate() const {
        if (int(f.size()) != state_dim) throw DimensionError("SubsystemSpec: f size != state_dim");
        if (int(h1.size()) != internal_output_dim)
            throw DimensionError("SubsystemSpec: h1 size != internal_output_dim");
        check_matrix(C2, output_dim, state_dim, "SubsystemSpec C2");
        if (int(sigma1.size()) != state_dim) throw DimensionError("SubsystemSpec: sigma1 size");
        if (int(sigma2.size()) != output_dim) throw DimensionError("SubsystemSpec: sigma2 size");
        for (double s : sigma1)
            if (s < 0) throw InvalidParameterError("SubsystemSpec: sigma1 < 0");
        for (double s : sigma2)
            if (s < 0) throw InvalidParameterError("SubsystemSpec: sigma2 < 0");
        if (int(X.dim()) != state_dim || int(Xa.dim()) != state_dim || int(Xb.dim()) != state_dim)
            throw DimensionError("SubsystemSpec: region dimension != state_dim");
        if (int(W.dim()) != internal_input_dim)
            throw DimensionError("SubsystemSpec: W dimension != internal_input_dim");
    }

    // Noise std map for closing expectations symbolically.
    std::map<std::string, double> noise_sigmas() const {
        std::map<std::string, double> m;
        for (int i = 0; i < state_dim; ++i) m[names::s1(i)] = sigma1[i];
        for (int i = 0; i < output_dim; ++i) m[names::s2(i)] = sigma2[i];
        return m;
    }
};

// Observer-form estimator. The affine fast path stores the matrices of
//   xh+ = A xh + B u + Aw wh + K (y2 - C2 xh);
// a general polynomial transition over (xh, u, wh, y) may be given instead
// (or in addition, in which case the two must agree).
struct EstimatorSpec {
    Matrix A, B, Aw, K, C2;                // empty when not using the fast path
    std::vector<PolynomialExpr> fhat;      // empty when using the fast path

    bool has_matrices() const { return !A.empty(); }

    void validate(const SubsystemSpec& sub) const {
        if (!has_matrices() && fhat.empty())
            throw InvalidParameterError("EstimatorSpec: neither matrices nor polynomials given");
        if (has_matrices()) {
            const std::size_t n = sub.state_dim;
            check_matrix(A, n, n, "EstimatorSpec A");
            check_matrix(B, n, sub.input_dim, "EstimatorSpec B");
            check_matrix(Aw, n, sub.internal_input_dim, "EstimatorSpec Aw");
            check_matrix(K, n, sub.output_dim, "EstimatorSpec K");
            check_matrix(C2, sub.output_dim, n, "EstimatorSpec C2");
        }
        if (!fhat.empty() && int(fhat.size()) != sub.state_dim)
            throw DimensionError("EstimatorSpec: fhat size != state_dim");
        if (has_matrices() && !fhat.empty()) spot_check_agreement(sub);
    }

    // Polynomial transition over (xh, u, wh, y), derived from the matrices
    // when no explicit polynomial form is present.
    std::vector<PolynomialExpr> fhat_polys(const SubsystemSpec& sub) const {
        if (!fhat.empty()) return fhat;
        std::vector<PolynomialExpr> out;
        for (int i = 0; i < sub.state_dim; ++i) {
            PolynomialExpr p;
            for (int j = 0; j < sub.state_dim; ++j) {
                double c = A[i][j];
                for (int r = 0; r < sub.output_dim; ++r) c -= K[i][r] * C2[r][j];
                if (c != 0) p = p + c * PolynomialExpr::variable(names::xh(j));
            }
            for (int j = 0; j < sub.input_dim; ++j)
                if (B[i][j] != 0) p = p + B[i][j] * PolynomialExpr::variable(names::u(j));
            for (int j = 0; j < sub.internal_input_dim; ++j)
                if (Aw[i][j] != 0) p = p + Aw[i][j] * PolynomialExpr::variable(names::wh(j));
            for (int r = 0; r < sub.output_dim; ++r)
                if (K[i][r] != 0) p = p + K[i][r] * PolynomialExpr::variable(names::y(r));
            out.push_back(std::move(p));
        }
        return out;
    }

  private:
    void spot_check_agreement(const SubsystemSpec& sub) const {
        auto from_matrices = EstimatorSpec{A, B, Aw, K, C2, {}}.fhat_polys(sub);
        std::mt19937_64 gen(20240817);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (int trial = 0; trial < 10; ++trial) {
            std::map<std::string, double> pt;
            for (int i = 0; i < sub.state_dim; ++i) pt[names::xh(i)] = dist(gen);
            for (int i = 0; i < sub.input_dim; ++i) pt[names::u(i)] = dist(gen);
            for (int i = 0; i < sub.internal_input_dim; ++i) pt[names::wh(i)] = dist(gen);
            for (int i = 0; i < sub.output_dim; ++i) pt[names::y(i)] = dist(gen);
            for (int i = 0; i < sub.state_dim; ++i) {
                double a = fhat[i].eval(pt), b = from_matrices[i].eval(pt);
                if (std::abs(a - b) > 1e-9 * (1 + std::abs(a)))
                    throw InvalidParameterError(
                        "EstimatorSpec: polynomial and matrix transitions disagree");
            }
        }
    }
};

// Polynomial feedback over estimator-side variables only, with saturation.
struct ControllerSpec {
    std::vector<PolynomialExpr> laws;                    // over (xh, wh), one per input
    std::vector<std::pair<double, double>> saturation;   // per input, clamp range

    void validate(const SubsystemSpec& sub) const {
        if (int(laws.size()) != sub.input_dim)
            throw DimensionError("ControllerSpec: law count != input_dim");
        if (int(saturation.size()) != sub.input_dim)
            throw DimensionError("ControllerSpec: saturation count != input_dim");
        for (const auto& law : laws)
            for (const auto& v : law.free_variables()) {
                VarKind k = law.kind_of(v);
                if (k != VarKind::EstimatorState && k != VarKind::InternalInputEstimate)
                    throw InvalidParameterError("ControllerSpec: law reads '" + v +
                                                "', which is not estimator-side");
            }
        for (const auto& [lo, hi] : saturation)
            if (lo > hi) throw InvalidParameterError("ControllerSpec: saturation lo > hi");
    }

    std::vector<double> eval(const std::vector<double>& xh, const std::vector<double>& wh) const {
        std::map<std::string, double> pt;
        for (std::size_t i = 0; i < xh.size(); ++i) pt[names::xh(int(i))] = xh[i];
        for (std::size_t i = 0; i < wh.size(); ++i) pt[names::wh(int(i))] = wh[i];
        std::vector<double> u(laws.size());
        for (std::size_t i = 0; i < laws.size(); ++i) {
            double v = laws[i].eval(pt);
            u[i] = std::min(std::max(v, saturation[i].first), saturation[i].second);
        }
        return u;
    }
};

struct Block {
    SubsystemSpec sub;
    EstimatorSpec est;
    ControllerSpec ctrl;
};

// Directed port map: w_to[dst_offset .. dst_offset+width) :=
// y1_from[src_offset .. src_offset+width). Unwired slots read zero.
struct Edge {
    int from = 0, to = 0;
    int src_offset = 0, dst_offset = 0;
    int width = 1;
};

struct NetworkSpec {
    std::vector<Block> blocks;
    std::vector<Edge> edges;
};

inline NetworkSpec build_interconnection(std::vector<Block> blocks, std::vector<Edge> edges) {
    const int n = int(blocks.size());
    if (n == 0) throw InvalidParameterError("build_interconnection: no blocks");
    for (auto& b : blocks) {
        b.sub.validate();
        b.est.validate(b.sub);
        b.ctrl.validate(b.sub);
    }
    std::vector<std::vector<bool>> assigned(n);
    for (int i = 0; i < n; ++i) assigned[i].assign(blocks[i].sub.internal_input_dim, false);
    for (const auto& e : edges) {
        auto describe = [&] {
            return "edge " + std::to_string(e.from) + "->" + std::to_string(e.to) + " [src " +
                   std::to_string(e.src_offset) + ", dst " + std::to_string(e.dst_offset) +
                   ", width " + std::to_string(e.width) + "]";
        };
        if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n)
            throw WiringError("block index out of range on " + describe());
        if (e.width <= 0) throw WiringError("non-positive width on " + describe());
        if (e.src_offset < 0 ||
            e.src_offset + e.width > blocks[e.from].sub.internal_output_dim)
            throw WiringError("source output range out of bounds (dim " +
                              std::to_string(blocks[e.from].sub.internal_output_dim) + ") on " +
                              describe());
        if (e.dst_offset < 0 || e.dst_offset + e.width > blocks[e.to].sub.internal_input_dim)
            throw WiringError("target input slot out of bounds (dim " +
                              std::to_string(blocks[e.to].sub.internal_input_dim) + ") on " +
                              describe());
        for (int k = 0; k < e.width; ++k) {
            if (assigned[e.to][e.dst_offset + k])
                throw WiringError("internal input slot " + std::to_string(e.dst_offset + k) +
                                  " of block " + std::to_string(e.to) +
                                  " assigned twice, second time by " + describe());
            assigned[e.to][e.dst_offset + k] = true;
        }
    }
    return NetworkSpec{std::move(blocks), std::move(edges)};
}

// Joint polynomial transition of one subsystem and its estimator, with the
// measurement eliminated: y_r is replaced by sum_j C2[r][j] x_j + s2_r.
struct AugmentedSystem {
    std::vector<PolynomialExpr> joint;  // first state_dim entries = f, rest = f-hat
    int state_dim = 0;
};

inline AugmentedSystem augment(const SubsystemSpec& sub, const EstimatorSpec& est) {
    sub.validate();
    est.validate(sub);
    AugmentedSystem out;
    out.state_dim = sub.state_dim;
    out.joint = sub.f;
    std::map<std::string, PolynomialExpr> y_images;
    for (int r = 0; r < sub.output_dim; ++r) {
        PolynomialExpr img = PolynomialExpr::variable(names::s2(r));
        for (int j = 0; j < sub.state_dim; ++j)
            if (sub.C2[r][j] != 0) img = img + sub.C2[r][j] * PolynomialExpr::variable(names::x(j));
        y_images.emplace(names::y(r), std::move(img));
    }
    for (auto& p : est.fhat_polys(sub)) {
        std::map<std::string, PolynomialExpr> images = y_images;
        for (const auto& v : p.free_variables())
            if (!images.count(v)) images.emplace(v, PolynomialExpr::variable(var(v)));
        out.joint.push_back(p.substitute(images));
    }
    return out;
}

struct BlockState {
    std::vector<double> x, xh;
};
using NetworkState = std::vector<BlockState>;

struct NoiseDraw {
    std::vector<double> s1, s2;  // per block
};

// One synchronous step: all internal outputs are computed from step-k states,
// routed, controllers evaluated and saturated, then every block advances at
// once. Region membership is not enforced here.
inline NetworkState step(const NetworkSpec& net, const NetworkState& state,
                         const std::vector<NoiseDraw>& noise) {
    const int n = int(net.blocks.size());
    if (int(state.size()) != n || int(noise.size()) != n)
        throw DimensionError("step: state/noise size != block count");
    // Internal outputs from current states.
    std::vector<std::vector<double>> y1(n), yh1(n), w(n), wh(n);
    for (int i = 0; i < n; ++i) {
        const auto& b = net.blocks[i];
        std::map<std::string, double> px, pxh;
        for (int j = 0; j < b.sub.state_dim; ++j) {
            px[names::x(j)] = state[i].x[j];
            pxh[names::x(j)] = state[i].xh[j];
        }
        for (const auto& h : b.sub.h1) {
            y1[i].push_back(h.eval(px));
            yh1[i].push_back(h.eval(pxh));
        }
        w[i].assign(b.sub.internal_input_dim, 0.0);
        wh[i].assign(b.sub.internal_input_dim, 0.0);
    }
    for (const auto& e : net.edges)
        for (int k = 0; k < e.width; ++k) {
            w[e.to][e.dst_offset + k] = y1[e.from][e.src_offset + k];
            wh[e.to][e.dst_offset + k] = yh1[e.from][e.src_offset + k];
        }
    // Advance all blocks.
    NetworkState next(n);
    for (int i = 0; i < n; ++i) {
        const auto& b = net.blocks[i];
        std::vector<double> u = b.ctrl.eval(state[i].xh, wh[i]);
        std::map<std::string, double> pt;
        for (int j = 0; j < b.sub.state_dim; ++j) {
            pt[names::x(j)] = state[i].x[j];
            pt[names::xh(j)] = state[i].xh[j];
            pt[names::s1(j)] = noise[i].s1[j];
        }
        for (int j = 0; j < b.sub.input_dim; ++j) pt[names::u(j)] = u[j];
        for (int j = 0; j < b.sub.internal_input_dim; ++j) {
            pt[names::w(j)] = w[i][j];
            pt[names::wh(j)] = wh[i][j];
        }
        for (int r = 0; r < b.sub.output_dim; ++r) {
            double y = noise[i].s2[r];
            for (int j = 0; j < b.sub.state_dim; ++j) y += b.sub.C2[r][j] * state[i].x[j];
            pt[names::y(r)] = y;
            pt[names::s2(r)] = noise[i].s2[r];
        }
        for (const auto& p : b.sub.f) next[i].x.push_back(p.eval(pt));
        for (const auto& p : b.est.fhat_polys(b.sub)) next[i].xh.push_back(p.eval(pt));
        for (double v : next[i].x)
            if (!std::isfinite(v)) throw DivergedTrajectory("non-finite state in block " +
                                                            std::to_string(i));
        for (double v : next[i].xh)
            if (!std::isfinite(v)) throw DivergedTrajectory("non-finite estimator state in block " +
                                                            std::to_string(i));
    }
    return next;
}

// Two published controller tunings: one designed against the augmented
// certificate, one against the estimator-only certificate.
enum class AccController { Augmented, Estimator };

// Chain platoon of N identical vehicles. State per vehicle: (distance to the
// preceding vehicle, velocity in the leader frame). Block i receives the
// predecessor's velocity on internal input slot 1; slot 0 is structurally 0.
inline NetworkSpec acc_platoon(int N, double tau = 0.01,
                               std::vector<double> gain = {1.7, -0.72}, double sigma1 = 0.01,
                               double sigma2 = 0.01,
                               AccController variant = AccController::Augmented) {
    if (N < 1) throw InvalidParameterError("acc_platoon: N must be >= 1");
    if (gain.size() != 2) throw InvalidParameterError("acc_platoon: gain must have 2 entries");
    SubsystemSpec sub;
    sub.state_dim = 2;
    sub.input_dim = 1;
    sub.internal_input_dim = 2;
    sub.internal_output_dim = 1;
    sub.output_dim = 1;
    auto x0 = PolynomialExpr::variable("x0"), x1 = PolynomialExpr::variable("x1");
    sub.f = {x0 - x1 + tau * PolynomialExpr::variable("w1") + PolynomialExpr::variable("s1_0"),
             x1 + PolynomialExpr::variable("u0") + PolynomialExpr::variable("s1_1")};
    sub.h1 = {x1};
    sub.C2 = {{1.0, 0.0}};
    sub.sigma1 = {sigma1, sigma1};
    sub.sigma2 = {sigma2};
    sub.X = RegionSpec(BoxRegion({{0.0, 3.5}, {-2.0, 3.0}}));
    sub.Xa = RegionSpec(BoxRegion({{1.0, 1.5}, {-0.4, 0.4}}));
    sub.Xb = RegionSpec({BoxRegion({{0.0, 0.5}, {-2.0, -1.5}}),
                         BoxRegion({{3.0, 3.5}, {2.5, 3.0}})});
    sub.W = BoxRegion({{0.0, 0.0}, {-2.0, 3.0}});
    sub.Y2 = BoxRegion({{0.0, 3.5}});

    EstimatorSpec est;
    est.A = {{1.0, -1.0}, {0.0, 1.0}};
    est.B = {{0.0}, {1.0}};
    est.Aw = {{0.0, tau}, {0.0, 0.0}};
    est.K = {{gain[0]}, {gain[1]}};
    est.C2 = {{1.0, 0.0}};

    ControllerSpec ctrl;
    const bool aug = variant == AccController::Augmented;
    const double cd = aug ? 0.06 : 0.09, cv = aug ? -0.7 : -1.0;
    const double cwv = aug ? 0.02 : 0.03, coff = aug ? -0.07 : -0.09;
    PolynomialExpr law = cd * PolynomialExpr::variable("xh0") +
                         cv * PolynomialExpr::variable("xh1") +
                         cwv * PolynomialExpr::variable("wh1") + PolynomialExpr(coff);
    ctrl.laws = {law};
    ctrl.saturation = {{-1.0, 1.0}};

    std::vector<Block> blocks(std::size_t(N), Block{sub, est, ctrl});
    std::vector<Edge> edges;
    for (int i = 1; i < N; ++i) edges.push_back(Edge{i - 1, i, 0, 1, 1});
    return build_interconnection(std::move(blocks), std::move(edges));
}

}  // namespace posafe
