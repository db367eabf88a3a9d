#include "cgmdist/bspline.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "cgmdist/errors.hpp"

namespace cgmdist {

namespace {
constexpr int kMaxDegree = 7;
}

BSplineBasis::BSplineBasis(std::vector<double> knots, int degree) : knots_(std::move(knots)), degree_(degree) {
    if (degree_ < 0 || degree_ > kMaxDegree) throw ConfigError("B-spline degree must be in [0, 7]");
    const auto p = static_cast<std::size_t>(degree_);
    if (knots_.size() < 2 * (p + 1)) throw ConfigError("knot vector too short for the requested degree");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
        if (!std::isfinite(knots_[i])) throw ConfigError("non-finite knot");
        if (i > 0 && knots_[i] < knots_[i - 1]) throw ConfigError("knot vector must be nondecreasing");
    }
    if (!(hi() > lo())) throw ConfigError("degenerate knot vector: empty domain");
    // Interior multiplicity above the degree would disconnect the basis.
    std::size_t run = 1;
    for (std::size_t i = p + 1; i + p + 1 < knots_.size(); ++i) {
        run = knots_[i] == knots_[i - 1] ? run + 1 : 1;
        if (run > p && knots_[i] > lo() && knots_[i] < hi())
            throw ConfigError("degenerate knot vector: interior knot multiplicity exceeds degree");
    }
}

BSplineBasis BSplineBasis::uniform(double lo, double hi, std::size_t num_basis, int degree) {
    if (degree < 0) throw ConfigError("B-spline degree must be nonnegative");
    const auto p = static_cast<std::size_t>(degree);
    if (num_basis < p + 1) throw ConfigError("need at least degree + 1 basis functions");
    if (!(hi > lo)) throw ConfigError("degenerate knot vector: empty domain");
    const std::size_t intervals = num_basis - p;
    std::vector<double> knots;
    knots.reserve(num_basis + p + 1);
    for (std::size_t i = 0; i < p; ++i) knots.push_back(lo);
    for (std::size_t i = 0; i <= intervals; ++i)
        knots.push_back(i == intervals ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(intervals));
    for (std::size_t i = 0; i < p; ++i) knots.push_back(hi);
    return BSplineBasis(std::move(knots), degree);
}

std::size_t BSplineBasis::span_index(double x) const {
    const auto p = static_cast<std::size_t>(degree_);
    const std::size_t n = size();
    if (x >= hi()) {
        // last nondegenerate span
        std::size_t mu = n - 1;
        while (mu > p && knots_[mu] == knots_[mu + 1]) --mu;
        return mu;
    }
    if (x <= lo()) {
        std::size_t mu = p;
        while (mu + 1 < n && knots_[mu] == knots_[mu + 1]) ++mu;
        return mu;
    }
    auto it = std::upper_bound(knots_.begin() + static_cast<long>(p), knots_.begin() + static_cast<long>(n) + 1, x);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
}

std::size_t BSplineBasis::evaluate(double x, int deriv, std::span<double> out) const {
    const int p = degree_;
    if (static_cast<int>(out.size()) < p + 1) throw DomainError("output span too small for B-spline block");
    if (deriv < 0) throw DomainError("negative derivative order");
    if (deriv > p) {
        std::fill(out.begin(), out.begin() + p + 1, 0.0);
        return span_index(x) - static_cast<std::size_t>(p);
    }
    const std::size_t mu = span_index(x);
    const auto& U = knots_;

    // Derivatives of the nonzero basis functions (de Boor / Cox recurrence with the
    // triangular table of knot differences).
    std::array<std::array<double, kMaxDegree + 1>, kMaxDegree + 1> ndu{};
    std::array<double, kMaxDegree + 1> left{}, right{};
    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - U[mu + 1 - static_cast<std::size_t>(j)];
        right[j] = U[mu + static_cast<std::size_t>(j)] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    if (deriv == 0) {
        for (int j = 0; j <= p; ++j) out[static_cast<std::size_t>(j)] = ndu[j][p];
        return mu - static_cast<std::size_t>(p);
    }

    std::array<std::array<double, kMaxDegree + 1>, 2> a{};
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a[0][0] = 1.0;
        double d = 0.0;
        for (int k = 1; k <= deriv; ++k) {
            d = 0.0;
            const int rk = r - k, pk = p - k;
            if (r >= k) {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                d += a[s2][j] * ndu[rk + j][pk];
            }
            if (r <= pk) {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            std::swap(s1, s2);
        }
        out[static_cast<std::size_t>(r)] = d;
    }
    double factor = p;
    for (int k = 1; k < deriv; ++k) factor *= (p - k);
    for (int j = 0; j <= p; ++j) out[static_cast<std::size_t>(j)] *= factor;
    return mu - static_cast<std::size_t>(p);
}

std::vector<double> BSplineBasis::evaluate_all(double x, int deriv) const {
    std::vector<double> dense(size(), 0.0);
    std::array<double, kMaxDegree + 1> block{};
    const std::size_t first = evaluate(x, deriv, block);
    for (int j = 0; j <= degree_; ++j) dense[first + static_cast<std::size_t>(j)] = block[static_cast<std::size_t>(j)];
    return dense;
}

std::vector<double> BSplineBasis::greville() const {
    std::vector<double> g(size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        double s = 0.0;
        for (int j = 1; j <= degree_; ++j) s += knots_[i + static_cast<std::size_t>(j)];
        g[i] = degree_ > 0 ? s / degree_ : knots_[i];
    }
    return g;
}

}  // namespace cgmdist
