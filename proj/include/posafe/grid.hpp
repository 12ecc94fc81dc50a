#pragma once

// Uniform grid extremization over box regions, with deterministic parallel
// scanning. Grids always contain every box corner and the box midpoint; ties
// are broken toward the lexicographically smallest grid point, so results are
// independent of the worker count.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

#include "posafe/common.hpp"
#include "posafe/polynomial.hpp"
#include "posafe/region.hpp"

namespace posafe {

// A term-compiled polynomial evaluated against a flat coordinate vector.
class CompiledPoly {
  public:
    CompiledPoly() = default;

    CompiledPoly(const PolynomialExpr& p, const std::vector<std::string>& var_order) {
        std::map<std::string, int> index;
        for (std::size_t i = 0; i < var_order.size(); ++i) index[var_order[i]] = int(i);
        for (const auto& [m, c] : p.terms()) {
            Term t{c, int(factors_.size()), int(factors_.size())};
            for (const auto& [v, e] : m) {
                auto it = index.find(v);
                if (it == index.end())
                    throw MissingAssignmentError("compile: variable '" + v + "' not in order");
                factors_.push_back({it->second, e});
                ++t.end;
            }
            terms_.push_back(t);
        }
    }

    double eval(const double* x) const {
        double acc = 0.0;
        for (const auto& t : terms_) {
            double v = t.c;
            for (int i = t.begin; i < t.end; ++i) {
                const auto& f = factors_[i];
                double b = x[f.idx];
                switch (f.exp) {
                    case 1: v *= b; break;
                    case 2: v *= b * b; break;
                    case 3: v *= b * b * b; break;
                    case 4: v *= (b * b) * (b * b); break;
                    default: v *= PolynomialExpr::ipow(b, f.exp);
                }
            }
            acc += v;
        }
        return acc;
    }

  private:
    struct Factor {
        int idx;
        int exp;
    };
    struct Term {
        double c;
        int begin, end;
    };
    std::vector<Term> terms_;
    std::vector<Factor> factors_;
};

// Grid axis for one closed interval: `resolution` uniform points including
// both endpoints, plus the midpoint. Degenerate intervals give one point.
inline std::vector<double> grid_axis(double lo, double hi, int resolution) {
    if (resolution < 2) throw InvalidParameterError("grid resolution must be >= 2");
    if (lo == hi) return {lo};
    std::vector<double> pts;
    pts.reserve(std::size_t(resolution) + 1);
    for (int i = 0; i < resolution; ++i)
        pts.push_back(lo + (hi - lo) * double(i) / double(resolution - 1));
    pts.push_back(0.5 * (lo + hi));
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

// Cartesian product of per-coordinate axes. Flat index order is the
// lexicographic order of grid points (first coordinate slowest).
struct MultiGrid {
    std::vector<std::vector<double>> axes;
    std::uint64_t total = 1;

    void append_box(const BoxRegion& box, int resolution) {
        for (const auto& [lo, hi] : box.iv) {
            axes.push_back(grid_axis(lo, hi, resolution));
            total *= axes.back().size();
        }
    }

    std::size_t dim() const { return axes.size(); }

    void point(std::uint64_t flat, double* out) const {
        for (std::size_t i = axes.size(); i-- > 0;) {
            const auto& ax = axes[i];
            out[i] = ax[flat % ax.size()];
            flat /= ax.size();
        }
    }
};

struct GridScanOptions {
    std::uint64_t point_cap = 250'000'000;  // resolution overflow guard
    int workers = 0;                        // 0 = hardware concurrency
};

struct Extremum {
    double value = 0.0;
    std::uint64_t flat = 0;
    std::vector<double> point;
};

struct ExtremeResult {
    Extremum min, max;
};

namespace detail {

inline int effective_workers(int hint, std::uint64_t total) {
    int w = hint > 0 ? hint : int(std::thread::hardware_concurrency());
    if (w < 1) w = 1;
    if (std::uint64_t(w) > total) w = int(total);
    return w;
}

}  // namespace detail

// Scans `fn` over the grid, returning min and max with deterministic
// tie-breaking (smallest flat index wins). fn must be re-entrant.
inline ExtremeResult grid_scan(const MultiGrid& grid,
                               const std::function<double(const double*)>& fn,
                               const GridScanOptions& opts = {}) {
    if (grid.total == 0) throw InvalidParameterError("grid_scan: empty grid");
    if (grid.total > opts.point_cap)
        throw ResourceError("grid_scan: " + std::to_string(grid.total) +
                            " points exceeds cap " + std::to_string(opts.point_cap));
    const int workers = detail::effective_workers(opts.workers, grid.total);
    std::vector<ExtremeResult> partial(workers);
    auto run = [&](int w) {
        std::uint64_t begin = grid.total * w / workers;
        std::uint64_t end = grid.total * (w + 1) / workers;
        std::vector<double> pt(grid.dim());
        ExtremeResult r;
        bool first = true;
        for (std::uint64_t i = begin; i < end; ++i) {
            grid.point(i, pt.data());
            double v = fn(pt.data());
            if (first || v < r.min.value) r.min = {v, i, pt};
            if (first || v > r.max.value) r.max = {v, i, pt};
            first = false;
        }
        partial[w] = std::move(r);
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& t : pool) t.join();
    }
    ExtremeResult out = partial[0];
    for (int w = 1; w < workers; ++w) {
        const auto& p = partial[w];
        if (p.min.value < out.min.value) out.min = p.min;
        if (p.max.value > out.max.value) out.max = p.max;
    }
    return out;
}

// Extrema of p over a union-of-boxes region. `var_order` maps grid coordinates
// to p's variables; it must cover every free variable of p.
inline ExtremeResult extremize_on_grid(const PolynomialExpr& p,
                                       const std::vector<std::string>& var_order,
                                       const RegionSpec& region, int resolution,
                                       const GridScanOptions& opts = {}) {
    for (const auto& v : p.free_variables())
        if (std::find(var_order.begin(), var_order.end(), v) == var_order.end())
            throw DimensionError("extremize_on_grid: variable '" + v + "' not covered");
    if (region.dim() != var_order.size())
        throw DimensionError("extremize_on_grid: region dimension mismatch");
    CompiledPoly cp(p, var_order);
    bool first = true;
    ExtremeResult out;
    for (const auto& box : region.boxes) {
        MultiGrid g;
        g.append_box(box, resolution);
        ExtremeResult r = grid_scan(g, [&](const double* x) { return cp.eval(x); }, opts);
        if (first || r.min.value < out.min.value) out.min = r.min;
        if (first || r.max.value > out.max.value) out.max = r.max;
        first = false;
    }
    return out;
}

inline ExtremeResult extremize_on_grid(const PolynomialExpr& p, const RegionSpec& region,
                                       int resolution, const GridScanOptions& opts = {}) {
    auto fv = p.free_variables();
    return extremize_on_grid(p, {fv.begin(), fv.end()}, region, resolution, opts);
}

}  // namespace posafe
