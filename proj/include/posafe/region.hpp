#pragma once

// Box regions and unions of boxes. These carry the semialgebraic sets of the
// verification conditions (state region, initial set, unsafe set, internal
// input range) specialized to axis-aligned boxes.

#include <optional>
#include <utility>
#include <vector>

#include "posafe/common.hpp"

namespace posafe {

struct BoxRegion {
    // Closed intervals [lo, hi] per coordinate.
    std::vector<std::pair<double, double>> iv;

    BoxRegion() = default;
    explicit BoxRegion(std::vector<std::pair<double, double>> intervals) : iv(std::move(intervals)) {
        for (const auto& [lo, hi] : iv)
            if (lo > hi) throw InvalidParameterError("BoxRegion: lo > hi");
    }

    std::size_t dim() const { return iv.size(); }

    bool contains(const std::vector<double>& x) const {
        if (x.size() != iv.size()) throw DimensionError("BoxRegion::contains: dimension mismatch");
        for (std::size_t i = 0; i < iv.size(); ++i)
            if (x[i] < iv[i].first || x[i] > iv[i].second) return false;
        return true;
    }

    // Minkowski sum with an infinity-norm ball of radius eps.
    BoxRegion inflate(double eps) const {
        if (eps < 0) throw InvalidParameterError("inflate: eps < 0");
        BoxRegion r = *this;
        for (auto& [lo, hi] : r.iv) {
            lo -= eps;
            hi += eps;
        }
        return r;
    }

    std::optional<BoxRegion> intersect(const BoxRegion& o) const {
        if (o.dim() != dim()) throw DimensionError("BoxRegion::intersect: dimension mismatch");
        BoxRegion r = *this;
        for (std::size_t i = 0; i < iv.size(); ++i) {
            r.iv[i].first = std::max(iv[i].first, o.iv[i].first);
            r.iv[i].second = std::min(iv[i].second, o.iv[i].second);
            if (r.iv[i].first > r.iv[i].second) return std::nullopt;
        }
        return r;
    }
};

// Union of same-dimension boxes.
struct RegionSpec {
    std::vector<BoxRegion> boxes;

    RegionSpec() = default;
    explicit RegionSpec(BoxRegion box) { boxes.push_back(std::move(box)); }
    explicit RegionSpec(std::vector<BoxRegion> bs) : boxes(std::move(bs)) {
        if (boxes.empty()) throw InvalidParameterError("RegionSpec: empty box list");
        for (const auto& b : boxes)
            if (b.dim() != boxes.front().dim())
                throw DimensionError("RegionSpec: boxes of mixed dimension");
    }

    std::size_t dim() const { return boxes.empty() ? 0 : boxes.front().dim(); }

    bool contains(const std::vector<double>& x) const {
        for (const auto& b : boxes)
            if (b.contains(x)) return true;
        return false;
    }
};

// Unsafe-set inflation for the estimator-side barrier: each box grown by eps
// in the infinity norm, then clipped to the modeling region X. Boxes that
// leave X entirely are dropped.
inline RegionSpec inflate_unsafe(const RegionSpec& region, double eps, const RegionSpec& clip_to) {
    if (clip_to.boxes.size() != 1)
        throw InvalidParameterError("inflate_unsafe: clip region must be a single box");
    std::vector<BoxRegion> out;
    for (const auto& b : region.boxes) {
        if (auto clipped = b.inflate(eps).intersect(clip_to.boxes.front())) out.push_back(*clipped);
    }
    if (out.empty()) throw InvalidParameterError("inflate_unsafe: inflated region left X entirely");
    return RegionSpec(std::move(out));
}

inline RegionSpec inflate_unsafe(const RegionSpec& region, double eps) {
    if (eps < 0) throw InvalidParameterError("inflate_unsafe: eps < 0");
    std::vector<BoxRegion> out;
    for (const auto& b : region.boxes) out.push_back(b.inflate(eps));
    return RegionSpec(std::move(out));
}

}  // namespace posafe
