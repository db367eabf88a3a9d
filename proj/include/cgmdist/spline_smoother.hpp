#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgmdist/bspline.hpp"
#include "cgmdist/cgm_data.hpp"

namespace cgmdist {

struct SmootherOptions {
    /// Equally spaced knot intervals per 1440 minutes of span (at least 4).
    double knots_per_day = 48.0;
    int degree = 3;
    /// Roughness weight on the integrated squared second derivative; nullopt selects it by GCV.
    std::optional<double> lambda;
};

/// Penalized B-spline fit of one glucose trajectory; evaluable with derivatives up to 2.
class SmoothedTrajectory {
public:
    SmoothedTrajectory(BSplineBasis basis, std::vector<double> coefficients, double lambda,
                       double edf = 0.0, double gcv = 0.0);

    const BSplineBasis& basis() const noexcept { return basis_; }
    const std::vector<double>& coefficients() const noexcept { return coefficients_; }
    double lambda() const noexcept { return lambda_; }
    double edf() const noexcept { return edf_; }
    double gcv() const noexcept { return gcv_; }
    int degree() const noexcept { return basis_.degree(); }
    double domain_lo() const noexcept { return basis_.lo(); }
    double domain_hi() const noexcept { return basis_.hi(); }

    /// Value (deriv 0), speed (1) or acceleration (2) at t. Throws DomainError outside the
    /// closed domain; no extrapolation.
    double eval(double t, int deriv = 0) const;

private:
    BSplineBasis basis_;
    std::vector<double> coefficients_;
    double lambda_;
    double edf_;
    double gcv_;
};

struct DerivativeSeries {
    std::vector<double> speed;         // mg/dL/min
    std::vector<double> acceleration;  // mg/dL/min^2
};

/// Minimizes sum_j (y_j - s(t_j))^2 + lambda * integral s''(t)^2 dt over cubic splines with
/// equally spaced knots on [t_0, t_last]. Times must be strictly increasing.
SmoothedTrajectory fit_spline(std::span<const double> times, std::span<const double> values,
                              const SmootherOptions& options = {});
SmoothedTrajectory fit_spline(const GlucoseSeries& series, const SmootherOptions& options = {});

/// The 41 relative weights scanned by automatic selection. The absolute penalty is
/// weight * tr(B^T B) / tr(Omega), which makes the grid independent of time units.
std::vector<double> smoothing_weight_grid();

std::vector<double> eval_series(const SmoothedTrajectory& traj, std::span<const double> times, int deriv);
DerivativeSeries derivative_series(const SmoothedTrajectory& traj, std::span<const double> times);

std::string trajectory_to_json(const SmoothedTrajectory& traj);
SmoothedTrajectory trajectory_from_json(std::string_view json);

}  // namespace cgmdist
