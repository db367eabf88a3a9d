#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cgmdist {

/// Symmetric banded matrix stored by lower diagonals: entry (i, i - k) for k <= bandwidth.
class SymmetricBandMatrix {
public:
    SymmetricBandMatrix(std::size_t n, std::size_t bandwidth);

    std::size_t size() const noexcept { return n_; }
    std::size_t bandwidth() const noexcept { return b_; }

    /// Access with |i - j| <= bandwidth; the matrix is symmetric so (i, j) and (j, i) alias.
    double& operator()(std::size_t i, std::size_t j);
    double operator()(std::size_t i, std::size_t j) const;

    /// this += scale * other (same shape).
    void add_scaled(const SymmetricBandMatrix& other, double scale);

private:
    std::size_t n_, b_;
    std::vector<double> data_;  // row-major: (i, k) -> data_[i * (b_ + 1) + k], k = i - j
};

/// Banded LDL^T factorization of an SPD matrix, O(n b^2).
class BandedLDLT {
public:
    /// Throws SingularFitError if a pivot is not positive or the reciprocal condition
    /// estimate (smallest over largest pivot) falls below `rcond_tol`.
    explicit BandedLDLT(const SymmetricBandMatrix& a, double rcond_tol = 1e-12);

    std::vector<double> solve(std::span<const double> rhs) const;

    /// Entries of the inverse inside the band (Takahashi / Hutchinson-de Hoog recursion),
    /// returned in the same band layout. Enough for tr(A^{-1} B) with banded B.
    SymmetricBandMatrix band_of_inverse() const;

    double rcond_estimate() const noexcept { return rcond_; }

private:
    SymmetricBandMatrix l_;  // unit lower factor; diagonal slot holds d_i
    double rcond_ = 0.0;
};

/// tr(A B) for symmetric banded matrices sharing a bandwidth.
double trace_of_product(const SymmetricBandMatrix& a, const SymmetricBandMatrix& b);

}  // namespace cgmdist
