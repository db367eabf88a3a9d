#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "oracles.hpp"

#include "cgmdist/errors.hpp"

namespace cgmdist::testing {

namespace {

// Welford running variance, n - 1 denominator.
double running_sd(const std::vector<double>& v) {
    double mean = 0.0, m2 = 0.0;
    std::size_t n = 0;
    for (double x : v) {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }
    return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0;
}

// Pairs every reading with the nearest reading `lag` earlier by scanning all readings.
std::vector<double> brute_force_differences(const GlucoseSeries& s, double lag) {
    const auto t = s.times();
    const auto g = s.glucose();
    const double tol = 0.5 * s.nominal_interval();
    std::vector<double> out;
    for (std::size_t j = 0; j < s.size(); ++j) {
        const double target = t[j] - lag;
        std::size_t best = s.size();
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < s.size(); ++k) {
            const double d = std::abs(t[k] - target);
            if (d <= tol && d < best_dist) {
                best = k;
                best_dist = d;
            }
        }
        if (best < s.size() && best != j) out.push_back(g[j] - g[best]);
    }
    return out;
}

// Simpson's rule on each segment of the piecewise-linear interpolant.
double simpson_auc(const GlucoseSeries& s) {
    const auto t = s.times();
    const auto g = s.glucose();
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const double mid = 0.5 * (g[i] + g[i + 1]);
        area += (t[i + 1] - t[i]) / 6.0 * (g[i] + 4.0 * mid + g[i + 1]);
    }
    return area / 60.0;
}

double parametric_tar(const GlucoseSeries& s, double threshold) {
    const auto t = s.times();
    const auto g = s.glucose();
    double above = 0.0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const double a = g[i], b = g[i + 1], dt = t[i + 1] - t[i];
        // measure of {s in [0,1] : a + s (b - a) > threshold}
        double measure;
        if (a == b) {
            measure = a > threshold ? 1.0 : 0.0;
        } else {
            const double cross = (threshold - a) / (b - a);
            measure = b > a ? 1.0 - std::clamp(cross, 0.0, 1.0) : std::clamp(cross, 0.0, 1.0);
        }
        above += measure * dt;
    }
    return above / (t[s.size() - 1] - t[0]);
}

}  // namespace

std::vector<std::size_t> oracle_turning_points(const GlucoseSeries& s) {
    const auto g = s.glucose();
    std::vector<std::size_t> tp;
    std::size_t run_start = 0;
    int direction = 0;
    for (std::size_t i = 1; i < g.size(); ++i) {
        if (g[i] == g[i - 1]) continue;
        const int d = g[i] > g[i - 1] ? 1 : -1;
        if (direction != 0 && d != direction) tp.push_back(run_start);
        direction = d;
        run_start = i;
    }
    return tp;
}

double oracle_metric(std::string_view name, const GlucoseSeries& s, double tar_threshold) {
    if (name == "auc") return simpson_auc(s);
    if (name == "tar") return parametric_tar(s, tar_threshold);
    if (name == "mage") {
        const auto g = s.glucose();
        const double sd = running_sd({g.begin(), g.end()});
        const auto tp = oracle_turning_points(s);
        std::vector<double> big;
        for (std::size_t k = 0; k + 1 < tp.size(); ++k) {
            const double a = std::abs(g[tp[k + 1]] - g[tp[k]]);
            if (a > sd) big.push_back(a);
        }
        if (big.empty()) return 0.0;
        double total = 0.0;
        for (double a : big) total += a;
        return total / static_cast<double>(big.size());
    }
    if (name == "conga1") {
        const auto d = brute_force_differences(s, 60.0);
        if (d.size() < 2) throw InsufficientDataError("oracle CONGA: fewer than two pairs");
        return running_sd(d);
    }
    if (name == "modd") {
        const auto d = brute_force_differences(s, 1440.0);
        if (d.empty()) throw InsufficientDataError("oracle MODD: no pairs");
        double total = 0.0;
        for (double x : d) total += std::abs(x);
        return total / static_cast<double>(d.size());
    }
    throw ConfigError("unknown metric '" + std::string(name) + "'");
}

double inf_quantile_oracle(const std::vector<double>& x, double p) {
    std::vector<double> sorted(x);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        // number of values <= sorted[i], counting ties after position i
        std::size_t count = i + 1;
        while (count < sorted.size() && sorted[count] == sorted[i]) ++count;
        if (static_cast<double>(count) / static_cast<double>(sorted.size()) >= p) return sorted[i];
    }
    return sorted.back();
}

}  // namespace cgmdist::testing
