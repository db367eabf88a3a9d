#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "cgmdist/cgm_data.hpp"

namespace cgmdist {

inline constexpr double kDefaultHyperThreshold = 140.0;

struct MetricOptions {
    double tar_threshold = kDefaultHyperThreshold;  // mg/dL
    double conga_hours = 1.0;
};

/// Traditional glycemic-variability indexes of one series.
struct MetricPanel {
    double mean = 0.0;    // mg/dL
    double sd = 0.0;      // mg/dL, sample (n - 1)
    double auc = 0.0;     // mg/dL * h
    double mage = 0.0;    // mg/dL
    double conga1 = 0.0;  // mg/dL
    std::optional<double> modd;  // absent for spans shorter than a day plus one sample
    double tar = 0.0;     // fraction of monitored time above threshold_hyper
    double threshold_hyper = kDefaultHyperThreshold;
};

double mean_glucose(const GlucoseSeries& s);
double sd_glucose(const GlucoseSeries& s);

/// Trapezoidal area under the glucose curve, time in hours.
double auc(const GlucoseSeries& s);

/// Indices of the turning points MAGE measures between: strict interior local extrema after
/// collapsing equal-valued runs to their first index.
std::vector<std::size_t> mage_turning_points(const GlucoseSeries& s);

/// Mean absolute change between consecutive turning points, over changes exceeding one SD.
double mage(const GlucoseSeries& s);

/// SD of G(t) - G(t - n_hours) over readings with a partner within half an interval.
double conga(const GlucoseSeries& s, double n_hours = 1.0);

/// Mean |G(t) - G(t - 24 h)| over matched pairs.
double modd(const GlucoseSeries& s);

/// Fraction of time the linear interpolant exceeds `threshold`.
double tar(const GlucoseSeries& s, double threshold = kDefaultHyperThreshold);

MetricPanel compute_metrics(const GlucoseSeries& s, const MetricOptions& options = {});

/// Index of the reading closest to `target` within +-interval/2, if any. Ties keep the
/// earlier reading.
std::optional<std::size_t> match_reading(const GlucoseSeries& s, double target);

}  // namespace cgmdist
