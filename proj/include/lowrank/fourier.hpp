#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lowrank/matrix.hpp"

namespace lowrank {

/// Unitary n-point DFT as an explicit matrix, W[j][k] = exp(-2 pi i jk / n) / sqrt(n).
class DftPlan {
public:
    explicit DftPlan(std::size_t n);

    std::size_t size() const noexcept { return n_; }
    const ComplexMatrix& matrix() const noexcept { return w_; }

    /// W x, transforming along columns.
    ComplexMatrix forward(const ComplexMatrix& x) const;
    /// W^H y (W is unitary, so this is W^-1 y).
    ComplexMatrix inverse(const ComplexMatrix& y) const;

private:
    std::size_t n_;
    ComplexMatrix w_;
    ComplexMatrix w_inverse_;
};

/// W^-1 L W x, where L keeps the first k rows of the column spectrum.
ComplexMatrix lowpass_spatial(const Matrix& x, std::size_t k);

/// Rank of a complex matrix measured as half the numerical rank of its
/// real embedding.
std::size_t complex_numerical_rank(const ComplexMatrix& m);

struct LowPassReport {
    std::size_t trial;
    std::size_t n;
    std::size_t k;
    std::size_t numerical_rank;
    bool bound_satisfied;
};

/// Filters `trials` random n x n images at every window size k = 1..n and
/// checks that the spatial result has rank at most k.
std::vector<LowPassReport> verify_bound(std::size_t n, std::size_t trials, std::uint64_t seed = 42);

}  // namespace lowrank
