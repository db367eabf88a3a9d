#include "cgmdist/glucodensity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cgmdist/errors.hpp"

namespace cgmdist {

namespace {

constexpr double kTailWidth = 4.0;  // grid extends this many bandwidths past the data

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return g;
}

std::vector<double> trapezoid_weights(const std::vector<double>& grid) {
    std::vector<double> w(grid.size(), 0.0);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double h = 0.5 * (grid[i] - grid[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    return w;
}

}  // namespace

std::string_view channel_name(Channel c) {
    switch (c) {
        case Channel::glucose: return "glucose";
        case Channel::speed: return "speed";
        case Channel::acceleration: return "acceleration";
    }
    return "?";
}

std::string_view channel_unit(Channel c) {
    switch (c) {
        case Channel::glucose: return "mg/dL";
        case Channel::speed: return "mg/dL/min";
        case Channel::acceleration: return "mg/dL/min^2";
    }
    return "?";
}

Channel channel_from_name(std::string_view name) {
    if (name == "glucose") return Channel::glucose;
    if (name == "speed") return Channel::speed;
    if (name == "acceleration") return Channel::acceleration;
    throw ConfigError("unknown channel '" + std::string(name) + "'");
}

Ecdf::Ecdf(std::span<const double> values) : sorted_(values.begin(), values.end()) {
    if (sorted_.empty()) throw InsufficientDataError("ECDF of an empty sample");
    std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const {
    const auto count = std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
    return static_cast<double>(count) / static_cast<double>(sorted_.size());
}

std::vector<double> probability_grid(std::size_t grid_size) {
    if (grid_size == 0) throw ConfigError("quantile grid must have at least one point");
    std::vector<double> p(grid_size);
    for (std::size_t g = 1; g <= grid_size; ++g) p[g - 1] = static_cast<double>(g) / static_cast<double>(grid_size + 1);
    return p;
}

QuantileProfile quantile_profile(std::span<const double> values, std::size_t grid_size, Channel channel) {
    if (values.empty()) throw InsufficientDataError("quantile profile of an empty sample");
    std::vector<double> sorted(values.begin(), values.end());
    for (double v : sorted)
        if (!std::isfinite(v)) throw DomainError("quantile profile of non-finite data");
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double dn = static_cast<double>(n);

    QuantileProfile q;
    q.channel = channel;
    q.grid = probability_grid(grid_size);
    q.values.resize(grid_size);
    for (std::size_t g = 0; g < grid_size; ++g) {
        const double p = q.grid[g];
        // smallest order k (1-based) whose ECDF value k/n reaches p
        auto k = static_cast<std::size_t>(std::clamp(std::ceil(p * dn), 1.0, dn));
        while (k > 1 && static_cast<double>(k - 1) / dn >= p) --k;
        while (k < n && static_cast<double>(k) / dn < p) ++k;
        q.values[g] = sorted[k - 1];
    }
    return q;
}

double DensityEstimate::mass() const {
    const auto w = trapezoid_weights(grid);
    double m = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) m += w[i] * density[i];
    return m;
}

double silverman_bandwidth(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) throw BandwidthError("Silverman bandwidth needs at least two values; pass an explicit bandwidth");
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : s) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0)) throw BandwidthError("data have zero variance; pass an explicit bandwidth");
    auto quantile7 = [&](double p) {  // linear interpolation between order statistics
        const double h = (static_cast<double>(n) - 1.0) * p;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, n - 1);
        return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
    };
    const double iqr = quantile7(0.75) - quantile7(0.25);
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

double kde_evaluate(std::span<const double> values, double bandwidth, double x) {
    const double norm = 1.0 / (static_cast<double>(values.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
    double s = 0.0;
    for (double v : values) {
        const double z = (x - v) / bandwidth;
        s += std::exp(-0.5 * z * z);
    }
    return norm * s;
}

DensityEstimate kde_univariate_on_grid(std::span<const double> values, double bandwidth, std::vector<double> grid) {
    if (values.empty()) throw InsufficientDataError("KDE of an empty sample");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw BandwidthError("bandwidth must be positive");
    DensityEstimate d;
    d.bandwidth = bandwidth;
    d.grid = std::move(grid);
    d.density.resize(d.grid.size());
    for (std::size_t i = 0; i < d.grid.size(); ++i) d.density[i] = kde_evaluate(values, bandwidth, d.grid[i]);
    return d;
}

DensityEstimate kde_univariate(std::span<const double> values, std::optional<double> bandwidth, std::size_t grid_size) {
    if (values.empty()) throw InsufficientDataError("KDE of an empty sample");
    if (grid_size < 2) throw ConfigError("KDE grid needs at least two points");
    const double h = bandwidth ? *bandwidth : silverman_bandwidth(values);
    if (!(h > 0.0) || !std::isfinite(h)) throw BandwidthError("bandwidth must be positive");
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    return kde_univariate_on_grid(values, h, linspace(*mn - kTailWidth * h, *mx + kTailWidth * h, grid_size));
}

double MultivariateDensityGrid::at(std::span<const std::size_t> index) const {
    if (index.size() != axes.size()) throw DomainError("index rank mismatch");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < axes.size(); ++k) {
        if (index[k] >= axes[k].size()) throw DomainError("grid index out of range");
        flat = flat * axes[k].size() + index[k];
    }
    return density[flat];
}

double MultivariateDensityGrid::mass() const {
    std::vector<std::vector<double>> w;
    for (const auto& a : axes) w.push_back(trapezoid_weights(a));
    std::vector<std::size_t> idx(axes.size(), 0);
    double m = 0.0;
    for (std::size_t flat = 0; flat < density.size(); ++flat) {
        double weight = 1.0;
        for (std::size_t k = 0; k < axes.size(); ++k) weight *= w[k][idx[k]];
        m += weight * density[flat];
        for (std::size_t k = axes.size(); k-- > 0;) {
            if (++idx[k] < axes[k].size()) break;
            idx[k] = 0;
        }
    }
    return m;
}

Eigen::MatrixXd silverman_bandwidth_matrix(const Eigen::MatrixXd& points) {
    const auto n = points.rows();
    const auto m = points.cols();
    if (n < 2) throw BandwidthError("automatic bandwidth needs at least two points");
    const Eigen::RowVectorXd mean = points.colwise().mean();
    const Eigen::MatrixXd centered = points.rowwise() - mean;
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    for (Eigen::Index k = 0; k < m; ++k)
        if (!(cov(k, k) > 0.0))
            throw BandwidthError("coordinate " + std::to_string(k) + " has zero variance; pass an explicit bandwidth matrix");
    const double dm = static_cast<double>(m);
    const double factor = std::pow(4.0 / (dm + 2.0), 2.0 / (dm + 4.0)) * std::pow(static_cast<double>(n), -2.0 / (dm + 4.0));
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const double cond_floor = 1e-12 * cov.diagonal().maxCoeff();
    if (llt.info() != Eigen::Success || llt.matrixL().toDenseMatrix().diagonal().array().square().minCoeff() < cond_floor)
        cov = Eigen::MatrixXd(cov.diagonal().asDiagonal());
    return factor * cov;
}

std::vector<std::vector<double>> default_density_axes(const Eigen::MatrixXd& points, const Eigen::MatrixXd& h,
                                                      std::size_t grid_size) {
    std::vector<std::vector<double>> axes;
    for (Eigen::Index k = 0; k < points.cols(); ++k) {
        const double pad = kTailWidth * std::sqrt(h(k, k));
        axes.push_back(linspace(points.col(k).minCoeff() - pad, points.col(k).maxCoeff() + pad, grid_size));
    }
    return axes;
}

MultivariateDensityGrid kde_multivariate(const Eigen::MatrixXd& points, const std::optional<Eigen::MatrixXd>& h,
                                         std::vector<std::vector<double>> axes) {
    const auto n = points.rows();
    const auto m = points.cols();
    if (n < 1) throw InsufficientDataError("KDE of an empty sample");
    if (m < 1) throw DomainError("points need at least one coordinate");
    if (!h && n < 2) throw BandwidthError("automatic bandwidth needs at least two points");
    Eigen::MatrixXd bw = h ? *h : silverman_bandwidth_matrix(points);
    if (bw.rows() != m || bw.cols() != m) throw BandwidthError("bandwidth matrix must be m x m");
    if (!bw.isApprox(bw.transpose(), 1e-12)) throw BandwidthError("bandwidth matrix must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(bw);
    if (llt.info() != Eigen::Success) throw BandwidthError("bandwidth matrix must be positive definite");
    const Eigen::MatrixXd lower = llt.matrixL();
    if (!(lower.diagonal().minCoeff() > 0.0)) throw BandwidthError("bandwidth matrix must be positive definite");
    if (axes.size() != static_cast<std::size_t>(m)) throw DomainError("one grid axis per dimension required");

    // whitened sample points: z_i = L^{-1} p_i, so (x - p_i)^T H^{-1} (x - p_i) = |L^{-1} x - z_i|^2
    const Eigen::MatrixXd z = lower.triangularView<Eigen::Lower>().solve(points.transpose());
    const double det_sqrt = lower.diagonal().prod();
    const double norm = 1.0 / (static_cast<double>(n) * det_sqrt * std::pow(2.0 * std::numbers::pi, 0.5 * static_cast<double>(m)));

    MultivariateDensityGrid out;
    out.bandwidth = bw;
    std::size_t total = 1;
    for (const auto& a : axes) {
        if (a.empty()) throw DomainError("empty grid axis");
        total *= a.size();
    }
    out.axes = std::move(axes);
    out.density.assign(total, 0.0);

    std::vector<std::size_t> idx(static_cast<std::size_t>(m), 0);
    Eigen::VectorXd node(m);
    for (std::size_t flat = 0; flat < total; ++flat) {
        for (Eigen::Index k = 0; k < m; ++k) node(k) = out.axes[static_cast<std::size_t>(k)][idx[static_cast<std::size_t>(k)]];
        const Eigen::VectorXd y = lower.triangularView<Eigen::Lower>().solve(node);
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) s += std::exp(-0.5 * (y - z.col(i)).squaredNorm());
        out.density[flat] = norm * s;
        for (std::size_t k = idx.size(); k-- > 0;) {
            if (++idx[k] < out.axes[k].size()) break;
            idx[k] = 0;
        }
    }
    return out;
}

MultivariateDensityGrid kde_multivariate(const Eigen::MatrixXd& points, const std::optional<Eigen::MatrixXd>& h,
                                         std::size_t grid_size) {
    if (grid_size < 2) throw ConfigError("KDE grid needs at least two points per axis");
    if (!h && points.rows() < 2) throw BandwidthError("automatic bandwidth needs at least two points");
    const Eigen::MatrixXd bw = h ? *h : silverman_bandwidth_matrix(points);
    return kde_multivariate(points, bw, default_density_axes(points, bw, grid_size));
}

const QuantileProfile& ChannelProfiles::get(Channel c) const {
    switch (c) {
        case Channel::glucose: return glucose;
        case Channel::speed: return speed;
        case Channel::acceleration: return acceleration;
    }
    throw ConfigError("unknown channel");
}

ChannelSamples channel_samples(const GlucoseSeries& s, const SmoothedTrajectory& traj, bool raw_glucose) {
    ChannelSamples out;
    const auto t = s.times();
    out.glucose = raw_glucose ? std::vector<double>(s.glucose().begin(), s.glucose().end()) : eval_series(traj, t, 0);
    auto d = derivative_series(traj, t);
    out.speed = std::move(d.speed);
    out.acceleration = std::move(d.acceleration);
    return out;
}

ChannelProfiles build_channels(const GlucoseSeries& s, const SmoothedTrajectory& traj, const ChannelOptions& options) {
    const auto samples = channel_samples(s, traj, options.raw_glucose);
    return {quantile_profile(samples.glucose, options.grid_size, Channel::glucose),
            quantile_profile(samples.speed, options.grid_size, Channel::speed),
            quantile_profile(samples.acceleration, options.grid_size, Channel::acceleration)};
}

}  // namespace cgmdist
