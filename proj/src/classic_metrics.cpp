#include "cgmdist/classic_metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cgmdist/errors.hpp"

namespace cgmdist {

namespace {

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::vector<double> lagged_differences(const GlucoseSeries& s, double lag) {
    std::vector<double> d;
    const auto t = s.times();
    const auto g = s.glucose();
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (t[j] - lag < t.front() - 0.5 * s.nominal_interval()) continue;
        if (auto k = match_reading(s, t[j] - lag); k && *k != j) d.push_back(g[j] - g[*k]);
    }
    return d;
}

}  // namespace

double mean_glucose(const GlucoseSeries& s) {
    double m = 0.0;
    for (double g : s.glucose()) m += g;
    return m / static_cast<double>(s.size());
}

double sd_glucose(const GlucoseSeries& s) {
    return sample_sd(std::vector<double>(s.glucose().begin(), s.glucose().end()));
}

double auc(const GlucoseSeries& s) {
    if (s.size() < 2) throw InsufficientDataError("AUC needs at least two readings");
    const auto t = s.times();
    const auto g = s.glucose();
    double area = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) area += 0.5 * (g[i] + g[i - 1]) * (t[i] - t[i - 1]);
    return area / 60.0;
}

std::vector<std::size_t> mage_turning_points(const GlucoseSeries& s) {
    const auto g = s.glucose();
    std::vector<std::size_t> runs{0};
    for (std::size_t i = 1; i < g.size(); ++i)
        if (g[i] != g[runs.back()]) runs.push_back(i);
    std::vector<std::size_t> tp;
    for (std::size_t m = 1; m + 1 < runs.size(); ++m) {
        const double prev = g[runs[m - 1]], cur = g[runs[m]], next = g[runs[m + 1]];
        if ((cur > prev && cur > next) || (cur < prev && cur < next)) tp.push_back(runs[m]);
    }
    return tp;
}

double mage(const GlucoseSeries& s) {
    if (s.size() < 3) throw InsufficientDataError("MAGE needs at least three readings");
    const double sd = sd_glucose(s);
    const auto tp = mage_turning_points(s);
    const auto g = s.glucose();
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 1; k < tp.size(); ++k) {
        const double amplitude = std::abs(g[tp[k]] - g[tp[k - 1]]);
        if (amplitude > sd) {
            total += amplitude;
            ++count;
        }
    }
    return count ? total / static_cast<double>(count) : 0.0;
}

std::optional<std::size_t> match_reading(const GlucoseSeries& s, double target) {
    const auto t = s.times();
    const double tol = 0.5 * s.nominal_interval();
    auto it = std::lower_bound(t.begin(), t.end(), target);
    std::optional<std::size_t> best;
    double best_dist = tol;
    auto consider = [&](std::size_t k) {
        const double d = std::abs(t[k] - target);
        if (d < best_dist || (d == best_dist && (!best || k < *best))) {
            best = k;
            best_dist = d;
        }
    };
    const auto idx = static_cast<std::size_t>(it - t.begin());
    if (idx > 0) consider(idx - 1);
    if (idx < t.size()) consider(idx);
    return best;
}

double conga(const GlucoseSeries& s, double n_hours) {
    if (!(n_hours > 0.0)) throw ConfigError("CONGA lag must be positive");
    const auto d = lagged_differences(s, 60.0 * n_hours);
    if (d.size() < 2) throw InsufficientDataError("CONGA: fewer than two readings have a partner " +
                                                  std::to_string(n_hours) + " h earlier");
    return sample_sd(d);
}

double modd(const GlucoseSeries& s) {
    const auto d = lagged_differences(s, 1440.0);
    if (d.empty()) throw InsufficientDataError("MODD: no readings have a partner 24 h earlier");
    double total = 0.0;
    for (double x : d) total += std::abs(x);
    return total / static_cast<double>(d.size());
}

double tar(const GlucoseSeries& s, double threshold) {
    const auto t = s.times();
    const auto g = s.glucose();
    double above = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) {
        const double a = g[i - 1], b = g[i], dt = t[i] - t[i - 1];
        if (a > threshold && b > threshold) {
            above += dt;
        } else if (a > threshold) {
            above += dt * (a - threshold) / (a - b);
        } else if (b > threshold) {
            above += dt * (b - threshold) / (b - a);
        }
    }
    return std::clamp(above / s.span(), 0.0, 1.0);
}

MetricPanel compute_metrics(const GlucoseSeries& s, const MetricOptions& options) {
    MetricPanel p;
    p.mean = mean_glucose(s);
    p.sd = sd_glucose(s);
    p.auc = auc(s);
    p.mage = mage(s);
    p.conga1 = conga(s, options.conga_hours);
    if (s.span() >= 1440.0 + s.nominal_interval()) {
        try {
            p.modd = modd(s);
        } catch (const InsufficientDataError&) {
        }
    }
    p.tar = tar(s, options.tar_threshold);
    p.threshold_hyper = options.tar_threshold;
    return p;
}

}  // namespace cgmdist
