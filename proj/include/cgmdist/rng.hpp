#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace cgmdist {

/// SplitMix64 as a counter-based generator: draw i is mix(seed + (i + 1) * golden_gamma).
/// The algorithm is fixed-width and platform independent, so fixtures reproduce everywhere.
/// Normal variates use Box-Muller on the generator's own uniforms rather than
/// std::normal_distribution, whose algorithm varies between standard libraries.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) noexcept : state_(seed) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Independent stream for (seed, stream index).
    static constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) noexcept {
        return mix(seed ^ mix(stream + 0x632BE59BD9B4E019ULL));
    }

    std::uint64_t next() noexcept {
        state_ += kGamma;
        return mix(state_);
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform() noexcept { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform(), u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace cgmdist
