#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lowrank/image.hpp"
#include "lowrank/matrix.hpp"

namespace lowrank {

/// Relative tolerance defining numerical rank: |{i : sigma_i > tol * sigma_1}|.
inline constexpr double kRankTolerance = 1e-6;

/// Thin SVD A = U diag(sigma) V^T of an m x n matrix, p = min(m, n).
///
/// u is m x p and v is n x p, both with orthonormal columns; sigma is
/// non-negative and sorted descending.
struct SvdFactors {
    Matrix u;
    std::vector<double> sigma;
    Matrix v;

    std::size_t rank_capacity() const noexcept { return sigma.size(); }

    /// Sum of sigma_j u_j v_j^T over j in [first, last).
    Matrix reconstruct(std::size_t first, std::size_t last) const;

    std::size_t numerical_rank(double relative_tolerance = kRankTolerance) const;
};

struct JacobiOptions {
    // Pair (i, j) counts as orthogonal once |g_ij| <= tolerance * sqrt(g_ii g_jj).
    double tolerance = 1e-12;
    int max_sweeps = 60;
};

/// One-sided (Hestenes) Jacobi SVD.
///
/// Rotates row pairs of the short side (columns of A^T for a wide A) until
/// every pair is orthogonal under `options.tolerance`. Tall inputs are
/// factorized through their transpose. Throws ConvergenceError when
/// `max_sweeps` is exhausted.
SvdFactors svd(const Matrix& a, const JacobiOptions& options = {});

/// Largest singular value (0 for the zero matrix).
double spectral_norm(const Matrix& a);

std::size_t numerical_rank(const Matrix& a, double relative_tolerance = kRankTolerance);

/// Best rank-k approximation (sum of the top-k singular triplets).
Matrix truncate_rank(const Matrix& a, std::size_t k);

/// Residual after zeroing the k largest singular values.
Matrix truncate_reverse(const Matrix& a, std::size_t k);

/// Per-channel factorization of one image, reusable across every rank.
class ImageFactors {
public:
    explicit ImageFactors(ImageTensor image);

    /// Short side w of the image; valid ranks are 0..w.
    std::size_t max_rank() const noexcept { return image_.width(); }
    const ImageTensor& image() const noexcept { return image_; }
    const std::vector<SvdFactors>& channels() const noexcept { return factors_; }

    /// Unclamped per-channel reconstruction (forward keeps the top k
    /// triplets, reverse drops them).
    Planes reconstruct(std::size_t k, bool reverse = false) const;

    /// reconstruct() followed by clamp_unit. The identity ranks (k = w
    /// forward, k = 0 reverse) return the stored image unchanged.
    ImageTensor rank_k(std::size_t k, bool reverse = false) const;

private:
    ImageTensor image_;
    std::vector<SvdFactors> factors_;
};

ImageTensor image_rank_k(const ImageTensor& x, std::size_t k, bool reverse = false);

struct TruncationTiming {
    std::size_t rank;
    double seconds;
    std::size_t width;
    std::size_t height;
    std::size_t channels;
};

/// Mean wall time of image_rank_k for every rank 0..w, averaged over
/// `trials` random images.
std::vector<TruncationTiming> benchmark_truncation(std::size_t width, std::size_t height,
                                                   std::size_t channels, std::size_t trials,
                                                   std::uint64_t seed = 42);

}  // namespace lowrank
