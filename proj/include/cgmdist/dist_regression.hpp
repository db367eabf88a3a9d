#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgmdist/bspline.hpp"
#include "cgmdist/glucodensity.hpp"

namespace cgmdist {

enum class Criterion { gcv, ubre };

std::string_view criterion_name(Criterion c);
Criterion criterion_from_name(std::string_view name);

/// Which terms enter a scalar-on-distribution model.
struct ModelSpec {
    std::vector<std::string> linear_terms;  // scalar covariates, entered linearly
    std::vector<Channel> channels;          // quantile-function channels, one tensor surface each
    std::size_t k0 = 8;                     // cubic B-splines over the quantile value u
    std::size_t l0 = 8;                     // cubic B-splines over the probability p
    Criterion criterion = Criterion::gcv;
    /// Residual variance assumed by UBRE selection; required when criterion is ubre.
    std::optional<double> known_scale;
    /// Absolute (lambda_u, lambda_p) per channel, in channel order. Skips the search.
    std::optional<std::vector<double>> fixed_lambdas;

    /// Throws ConfigError when bases are below the cubic minimum or channels repeat.
    void validate() const;
};

/// Second-order difference operator, (k - 2) x k with rows [1, -2, 1].
Eigen::MatrixXd second_difference_matrix(std::size_t k);

/// lambda_u * D_u^T D_u (x) I_l0 + lambda_p * I_k0 (x) D_p^T D_p. Coefficients are indexed
/// k * l0 + l (u index slow).
Eigen::MatrixXd penalty_matrix(std::size_t k0, std::size_t l0, double lambda_u, double lambda_p);

/// Riemann approximation of W_kl = integral B_k(Q(p)) B_l(p) dp on the profile's grid with
/// weight equal to the grid spacing. The callables return all k0 (resp. l0) basis values at a
/// point, which lets tests substitute degenerate bases.
template <class UBasis, class PBasis>
Eigen::VectorXd riemann_design_vector(const QuantileProfile& q, UBasis&& u_basis, PBasis&& p_basis,
                                      std::size_t k0, std::size_t l0) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k0 * l0));
    const double dp = 1.0 / static_cast<double>(q.grid.size() + 1);
    for (std::size_t g = 0; g < q.grid.size(); ++g) {
        const auto bu = u_basis(q.values[g]);
        const auto bp = p_basis(q.grid[g]);
        for (std::size_t k = 0; k < k0; ++k) {
            if (bu[k] == 0.0) continue;
            for (std::size_t l = 0; l < l0; ++l) w[static_cast<Eigen::Index>(k * l0 + l)] += bu[k] * bp[l] * dp;
        }
    }
    return w;
}

/// Basis and identifiability transform of one channel's tensor surface.
struct ChannelBasis {
    Channel channel = Channel::glucose;
    BSplineBasis u_basis;
    BSplineBasis p_basis;
    /// Coefficients are theta = Z beta with sum_k theta_kl = 0 for every l; those directions
    /// only shift the intercept.
    Eigen::MatrixXd constraint;
    Eigen::VectorXd centering;  // training column means of raw W
};

struct Design {
    Eigen::MatrixXd x;  // intercept | linear terms | constrained, centered W blocks
    std::vector<std::string> linear_names;
    std::vector<ChannelBasis> channels;
    std::vector<std::size_t> block_offsets;  // first column of each channel block
    std::size_t clamped = 0;                 // quantile values clamped into the u range

    std::size_t columns() const noexcept { return static_cast<std::size_t>(x.cols()); }
};

/// Raw (unconstrained, uncentred) design vector of one profile against a channel basis.
/// Values outside the u range are clamped and counted in `clamped`.
Eigen::VectorXd channel_design_vector(const QuantileProfile& q, const ChannelBasis& basis, std::size_t* clamped = nullptr);

/// u-range from pooled training quantiles with 5% padding per side.
ChannelBasis make_channel_basis(Channel channel, std::span<const ChannelProfiles> profiles, std::size_t k0, std::size_t l0);

/// Builds the training design. `linear` is n x linear_terms.size().
Design build_design(const Eigen::MatrixXd& linear, std::span<const ChannelProfiles> profiles, const ModelSpec& spec);

struct LinearCoefficient {
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;
};

struct ChannelTerm {
    ChannelBasis basis;
    Eigen::VectorXd theta;  // k0 * l0 surface coefficients
    double lambda_u = 0.0;
    double lambda_p = 0.0;
    double edf = 0.0;

    /// F(u, p) of the fitted surface (u clamped into the basis range).
    double surface(double u, double p) const;
};

struct FitDiagnostics {
    std::size_t n = 0;
    double rss = 0.0;
    double tss = 0.0;
    double r_squared = 0.0;
    double adj_r_squared = 0.0;
    double log_likelihood = 0.0;
    double ubre = 0.0;
    double gcv = 0.0;
    double edf = 0.0;
    double scale = 0.0;  // RSS / (n - edf)
};

struct DistRegressionModel {
    ModelSpec spec;
    LinearCoefficient intercept{"(Intercept)", 0.0, 0.0};
    std::vector<LinearCoefficient> linear;
    std::vector<ChannelTerm> terms;
    FitDiagnostics diagnostics;
    std::vector<double> fitted;
    Eigen::VectorXd beta;  // coefficients in design-column coordinates
};

/// Penalized least squares with smoothing parameters chosen by the spec's criterion:
/// a 21-point log grid per parameter, two coordinate-descent sweeps.
DistRegressionModel fit(const Design& design, std::span<const double> response, const ModelSpec& spec);

/// Sum of squared residuals plus sum theta^T P theta at coefficients `beta` (design coordinates)
/// and the model's smoothing parameters.
double penalized_objective(const Design& design, std::span<const double> response, const DistRegressionModel& model,
                           const Eigen::VectorXd& beta);

struct Prediction {
    double value = 0.0;
    std::size_t clamped = 0;
};

/// alpha0 + x^T alpha + sum_j (W_j - centering_j)^T theta_j for one subject. Throws
/// ConfigError when a model channel has no profile.
Prediction predict(const DistRegressionModel& model, const ChannelProfiles& profiles, std::span<const double> linear);

/// Adjusted R^2, Gaussian log-likelihood with sigma^2 = RSS/n, UBRE and GCV at the model's edf.
/// Throws NumericalError when n <= edf + 1.
FitDiagnostics diagnostics(const DistRegressionModel& model, const Design& design, std::span<const double> response);

std::string model_to_json(const DistRegressionModel& model);
DistRegressionModel model_from_json(std::string_view json);

}  // namespace cgmdist
