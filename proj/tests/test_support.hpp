#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "cgmdist/cgm_data.hpp"
#include "cgmdist/rng.hpp"

namespace cgmdist::testing {

inline GlucoseSeries make_series(std::vector<double> times, std::vector<double> glucose, double interval = 5.0,
                                 std::string id = "S") {
    return GlucoseSeries(std::move(id), std::move(times), std::move(glucose), interval);
}

/// Regular 5-minute grid over [0, minutes] with glucose f(t).
template <class F>
GlucoseSeries sampled_series(double minutes, F&& f, double interval = 5.0, std::string id = "S") {
    std::vector<double> t, g;
    for (double x = 0.0; x <= minutes + 1e-9; x += interval) {
        t.push_back(x);
        g.push_back(f(x));
    }
    return make_series(std::move(t), std::move(g), interval, std::move(id));
}

/// Random walk in [60, 300] with occasional timing jitter and dropped readings.
inline GlucoseSeries random_series(std::uint64_t seed, double days, bool jitter = true, std::string id = "S") {
    CounterRng rng(seed);
    std::vector<double> t, g;
    double level = rng.uniform(90.0, 160.0);
    for (double x = 0.0; x <= days * 1440.0 + 1e-9; x += 5.0) {
        if (jitter && rng.uniform() < 0.03) continue;
        const double stamp = jitter ? x + rng.uniform(-1.2, 1.2) : x;
        if (!t.empty() && stamp <= t.back()) continue;
        level = std::clamp(level + rng.normal(0.0, 4.0), 60.0, 300.0);
        t.push_back(stamp);
        // integer-valued readings create plateaus, exercising the tie rules
        g.push_back(std::round(level));
    }
    return make_series(std::move(t), std::move(g), 5.0, std::move(id));
}

inline double sinusoid(double t) { return 120.0 + 30.0 * std::sin(2.0 * std::numbers::pi * t / 1440.0); }

}  // namespace cgmdist::testing
