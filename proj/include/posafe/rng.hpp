#pragma once

// Counter-based random number streams: every draw is a pure function of
// (master seed, trial, block, step, coordinate), so simulation results are
// bit-identical for any worker count and any scheduling order.

#include <cmath>
#include <cstdint>

namespace posafe {

class CounterRng {
  public:
    explicit CounterRng(std::uint64_t master_seed) : seed_(master_seed) {}

    std::uint64_t seed() const { return seed_; }

    // Uniform in (0, 1), exclusive of both ends.
    double uniform(std::uint64_t trial, std::uint64_t block, std::uint64_t step,
                   std::uint64_t coord) const {
        return to_unit(key(trial, block, step, coord, 0));
    }

    // Standard normal via Box-Muller on two lanes of the same counter.
    double normal(std::uint64_t trial, std::uint64_t block, std::uint64_t step,
                  std::uint64_t coord) const {
        const double u1 = to_unit(key(trial, block, step, coord, 0));
        const double u2 = to_unit(key(trial, block, step, coord, 1));
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    // Reserved step id for draws outside the time loop (initial conditions).
    static constexpr std::uint64_t kInitStep = 0xFFFFFFFFFFFFFFFFull;

  private:
    static constexpr double kPi = 3.14159265358979323846;

    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ull;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    }

    std::uint64_t key(std::uint64_t trial, std::uint64_t block, std::uint64_t step,
                      std::uint64_t coord, std::uint64_t lane) const {
        std::uint64_t h = splitmix(seed_);
        h = splitmix(h ^ trial);
        h = splitmix(h ^ block);
        h = splitmix(h ^ step);
        h = splitmix(h ^ (coord * 2 + lane));
        return h;
    }

    static double to_unit(std::uint64_t h) {
        // 53-bit mantissa, shifted into (0, 1).
        return (double(h >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t seed_;
};

}  // namespace posafe
