#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace uscnn {

/// Deterministic draws on top of mt19937. The raw mt19937 sequence is pinned
/// by the standard, so values are identical across standard libraries
/// (std::normal_distribution and friends are not).
class RandomSource {
public:
    explicit RandomSource(std::uint32_t seed) : rng_(seed) {}

    double uniform() { return (static_cast<double>(rng_()) + 0.5) * kInv32; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Box-Muller standard normal.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double radius = std::sqrt(-2.0 * std::log(uniform()));
        const double angle = 2.0 * kPi * uniform();
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    std::uint32_t bits() { return rng_(); }

private:
    static constexpr double kInv32 = 1.0 / 4294967296.0;
    static constexpr double kPi = 3.14159265358979323846;
    std::mt19937 rng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace uscnn
