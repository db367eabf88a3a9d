#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "cgmdist/cgm_data.hpp"

namespace cgmdist::testing {

/// Classic metrics written straight from their definitions (brute-force pairing, per-segment
/// quadrature). Names: auc, mage, conga1, modd, tar.
double oracle_metric(std::string_view name, const GlucoseSeries& s, double tar_threshold = 140.0);

/// Turning points by a direction-change walk, for cross-checking the MAGE scan.
std::vector<std::size_t> oracle_turning_points(const GlucoseSeries& s);

/// Smallest sample value whose empirical CDF reaches p, by sorting and counting.
double inf_quantile_oracle(const std::vector<double>& x, double p);

}  // namespace cgmdist::testing
