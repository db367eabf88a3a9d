#include "cgmdist/banded.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cgmdist/errors.hpp"

namespace cgmdist {

SymmetricBandMatrix::SymmetricBandMatrix(std::size_t n, std::size_t bandwidth)
    : n_(n), b_(bandwidth), data_(n * (bandwidth + 1), 0.0) {}

double& SymmetricBandMatrix::operator()(std::size_t i, std::size_t j) {
    if (i < j) std::swap(i, j);
    return data_[i * (b_ + 1) + (i - j)];
}

double SymmetricBandMatrix::operator()(std::size_t i, std::size_t j) const {
    if (i < j) std::swap(i, j);
    if (i - j > b_) return 0.0;
    return data_[i * (b_ + 1) + (i - j)];
}

void SymmetricBandMatrix::add_scaled(const SymmetricBandMatrix& other, double scale) {
    if (other.n_ != n_ || other.b_ != b_) throw DomainError("band matrix shape mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += scale * other.data_[k];
}

BandedLDLT::BandedLDLT(const SymmetricBandMatrix& a, double rcond_tol) : l_(a) {
    const std::size_t n = a.size(), b = a.bandwidth();
    double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k0 = j > b ? j - b : 0;
        double d = l_(j, j);
        for (std::size_t k = k0; k < j; ++k) d -= l_(j, k) * l_(j, k) * l_(k, k);
        if (!(d > 0.0) || !std::isfinite(d))
            throw SingularFitError("banded system is not positive definite (pivot " + std::to_string(j) + ")");
        l_(j, j) = d;
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
        for (std::size_t i = j + 1; i < std::min(n, j + b + 1); ++i) {
            double s = l_(i, j);
            const std::size_t m0 = i > b ? i - b : 0;
            for (std::size_t k = m0; k < j; ++k) s -= l_(i, k) * l_(j, k) * l_(k, k);
            l_(i, j) = s / d;
        }
    }
    rcond_ = n ? dmin / dmax : 1.0;
    if (rcond_ < rcond_tol)
        throw SingularFitError("banded system is numerically singular (reciprocal condition " +
                               std::to_string(rcond_) + ")");
}

std::vector<double> BandedLDLT::solve(std::span<const double> rhs) const {
    const std::size_t n = l_.size(), b = l_.bandwidth();
    if (rhs.size() != n) throw DomainError("right-hand side length mismatch");
    std::vector<double> x(rhs.begin(), rhs.end());
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k0 = i > b ? i - b : 0;
        for (std::size_t k = k0; k < i; ++k) x[i] -= l_(i, k) * x[k];
    }
    for (std::size_t i = 0; i < n; ++i) x[i] /= l_(i, i);
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < std::min(n, ii + b + 1); ++k) x[ii] -= l_(k, ii) * x[k];
    }
    return x;
}

SymmetricBandMatrix BandedLDLT::band_of_inverse() const {
    const std::size_t n = l_.size(), b = l_.bandwidth();
    SymmetricBandMatrix s(n, b);
    for (std::size_t ii = n; ii-- > 0;) {
        const std::size_t kend = std::min(n, ii + b + 1);
        // off-diagonal entries (j > i) first; they feed the diagonal
        for (std::size_t j = kend; j-- > ii + 1;) {
            double v = 0.0;
            for (std::size_t k = ii + 1; k < kend; ++k) v -= l_(k, ii) * s(k, j);
            s(ii, j) = v;
        }
        double v = 1.0 / l_(ii, ii);
        for (std::size_t k = ii + 1; k < kend; ++k) v -= l_(k, ii) * s(k, ii);
        s(ii, ii) = v;
    }
    return s;
}

double trace_of_product(const SymmetricBandMatrix& a, const SymmetricBandMatrix& b) {
    if (a.size() != b.size() || a.bandwidth() != b.bandwidth()) throw DomainError("band matrix shape mismatch");
    double t = 0.0;
    const std::size_t n = a.size(), w = a.bandwidth();
    for (std::size_t i = 0; i < n; ++i) {
        t += a(i, i) * b(i, i);
        for (std::size_t j = i > w ? i - w : 0; j < i; ++j) t += 2.0 * a(i, j) * b(i, j);
    }
    return t;
}

}  // namespace cgmdist
