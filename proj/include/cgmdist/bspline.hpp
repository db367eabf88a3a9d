#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cgmdist {

/// B-spline basis over a clamped knot vector.
///
/// With `n` basis functions of degree `p` the knot vector holds n + p + 1 entries; the
/// first and last p + 1 knots coincide with the domain ends. At most p + 1 functions are
/// nonzero at any point, so evaluation returns a compact block starting at `first`.
class BSplineBasis {
public:
    /// Throws ConfigError when the knots are decreasing, too few, or span an empty domain.
    BSplineBasis(std::vector<double> knots, int degree);

    /// Equally spaced interior knots on [lo, hi].
    static BSplineBasis uniform(double lo, double hi, std::size_t num_basis, int degree = 3);

    std::size_t size() const noexcept { return knots_.size() - static_cast<std::size_t>(degree_) - 1; }
    int degree() const noexcept { return degree_; }
    double lo() const noexcept { return knots_[static_cast<std::size_t>(degree_)]; }
    double hi() const noexcept { return knots_[knots_.size() - 1 - static_cast<std::size_t>(degree_)]; }
    const std::vector<double>& knots() const noexcept { return knots_; }

    /// Knot span index mu with knots[mu] <= x < knots[mu + 1]; x == hi maps to the last span.
    std::size_t span_index(double x) const;

    /// Writes the degree + 1 nonzero values of the `deriv`-th derivative at x into `out`
    /// and returns the index of the first of them. x must lie in [lo, hi].
    std::size_t evaluate(double x, int deriv, std::span<double> out) const;

    /// Dense vector of all basis values (or derivatives) at x.
    std::vector<double> evaluate_all(double x, int deriv = 0) const;

    /// Greville abscissae; a spline with these coefficients reproduces the identity.
    std::vector<double> greville() const;

private:
    std::vector<double> knots_;
    int degree_;
};

}  // namespace cgmdist
