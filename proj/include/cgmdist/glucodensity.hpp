#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cgmdist/cgm_data.hpp"
#include "cgmdist/spline_smoother.hpp"

namespace cgmdist {

enum class Channel { glucose = 0, speed = 1, acceleration = 2 };

inline constexpr std::size_t kDefaultQuantileGrid = 100;

std::string_view channel_name(Channel c);
std::string_view channel_unit(Channel c);
/// Throws ConfigError for unknown names.
Channel channel_from_name(std::string_view name);

/// Right-continuous empirical CDF.
class Ecdf {
public:
    /// Throws InsufficientDataError on empty input.
    explicit Ecdf(std::span<const double> values);

    /// Fraction of observations <= x.
    double operator()(double x) const;
    std::size_t size() const noexcept { return sorted_.size(); }
    const std::vector<double>& sorted() const noexcept { return sorted_; }

private:
    std::vector<double> sorted_;
};

/// Interior grid p_g = g / (G + 1), g = 1..G.
std::vector<double> probability_grid(std::size_t grid_size = kDefaultQuantileGrid);

struct QuantileProfile {
    std::vector<double> grid;
    std::vector<double> values;  // nondecreasing
    Channel channel = Channel::glucose;
};

/// Q(p) = inf{s : F(s) >= p} on the interior grid.
QuantileProfile quantile_profile(std::span<const double> values, std::size_t grid_size = kDefaultQuantileGrid,
                                 Channel channel = Channel::glucose);

struct DensityEstimate {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;

    /// Trapezoid integral over the grid.
    double mass() const;
};

/// 0.9 * min(sd, IQR / 1.34) * n^(-1/5); falls back to sd when the IQR vanishes.
/// Throws BandwidthError when the data have zero variance.
double silverman_bandwidth(std::span<const double> values);

/// Gaussian KDE (1 / (n h)) sum K((x - x_i) / h) at a single point.
double kde_evaluate(std::span<const double> values, double bandwidth, double x);

/// Gaussian KDE on [min - 4h, max + 4h]; bandwidth nullopt selects Silverman's rule.
DensityEstimate kde_univariate(std::span<const double> values, std::optional<double> bandwidth = std::nullopt,
                               std::size_t grid_size = 512);
DensityEstimate kde_univariate_on_grid(std::span<const double> values, double bandwidth, std::vector<double> grid);

struct MultivariateDensityGrid {
    std::vector<std::vector<double>> axes;  // one grid per dimension
    std::vector<double> density;            // row-major, last axis fastest
    Eigen::MatrixXd bandwidth;              // H, symmetric positive definite

    std::size_t dims() const noexcept { return axes.size(); }
    double at(std::span<const std::size_t> index) const;
    /// Tensor trapezoid integral.
    double mass() const;
};

/// (4 / (m + 2))^(2 / (m + 4)) * n^(-2 / (m + 4)) * covariance, with a diagonal fallback when
/// the covariance is singular. Throws BandwidthError if any coordinate has zero variance.
Eigen::MatrixXd silverman_bandwidth_matrix(const Eigen::MatrixXd& points);

/// Per-axis grids spanning [min - 4 sqrt(H_kk), max + 4 sqrt(H_kk)].
std::vector<std::vector<double>> default_density_axes(const Eigen::MatrixXd& points, const Eigen::MatrixXd& h,
                                                      std::size_t grid_size);

/// f(p) = (1/n) sum |H|^(-1/2) K(H^(-1/2) (p - p_i)) with the standard Gaussian K, evaluated
/// on the product of `axes`. points is n x m (m = 2 or 3 in practice); H nullopt selects the rule above.
MultivariateDensityGrid kde_multivariate(const Eigen::MatrixXd& points, const std::optional<Eigen::MatrixXd>& h,
                                         std::vector<std::vector<double>> axes);
MultivariateDensityGrid kde_multivariate(const Eigen::MatrixXd& points,
                                         const std::optional<Eigen::MatrixXd>& h = std::nullopt,
                                         std::size_t grid_size = 64);

struct ChannelOptions {
    /// Use raw readings instead of smoothed values for the glucose channel.
    bool raw_glucose = false;
    std::size_t grid_size = kDefaultQuantileGrid;
};

struct ChannelProfiles {
    QuantileProfile glucose;
    QuantileProfile speed;
    QuantileProfile acceleration;

    const QuantileProfile& get(Channel c) const;
};

/// Channel samples at the reading times: smoothed glucose (or raw), speed, acceleration.
struct ChannelSamples {
    std::vector<double> glucose, speed, acceleration;
};
ChannelSamples channel_samples(const GlucoseSeries& s, const SmoothedTrajectory& traj, bool raw_glucose = false);

ChannelProfiles build_channels(const GlucoseSeries& s, const SmoothedTrajectory& traj,
                               const ChannelOptions& options = {});

}  // namespace cgmdist
