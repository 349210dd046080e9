#include "lowrank/svd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "lowrank/error.hpp"
#include "lowrank/rng.hpp"

namespace lowrank {

namespace {

double dot(const double* a, const double* b, std::size_t n) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void rotate(double* a, double* b, std::size_t n, double c, double s) noexcept {
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a[i];
        const double y = b[i];
        a[i] = c * x - s * y;
        b[i] = s * x + c * y;
    }
}

// Fills zero rows of `basis` (p rows of length n) with unit vectors orthogonal
// to every other row, drawing candidates from the standard basis.
void complete_orthonormal(std::vector<double>& basis, std::size_t p, std::size_t n,
                          const std::vector<bool>& missing) {
    for (std::size_t row = 0; row < p; ++row) {
        if (!missing[row]) continue;
        double* target = basis.data() + row * n;
        double best_norm = -1.0;
        std::vector<double> best(n);
        for (std::size_t e = 0; e < n; ++e) {
            std::vector<double> cand(n, 0.0);
            cand[e] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t other = 0; other < p; ++other) {
                    if (other == row || (missing[other] && other > row)) continue;
                    const double* o = basis.data() + other * n;
                    const double proj = dot(cand.data(), o, n);
                    for (std::size_t i = 0; i < n; ++i) cand[i] -= proj * o[i];
                }
            }
            const double norm = std::sqrt(dot(cand.data(), cand.data(), n));
            if (norm > best_norm) {
                best_norm = norm;
                best = cand;
            }
            if (best_norm > 0.5) break;
        }
        for (std::size_t i = 0; i < n; ++i) target[i] = best[i] / best_norm;
    }
}

// Jacobi SVD of a wide matrix (rows <= cols).
SvdFactors svd_wide(const Matrix& a, const JacobiOptions& options) {
    const std::size_t p = a.rows();
    const std::size_t n = a.cols();

    // Rows of `work` are the columns of A^T being orthogonalized; rows of
    // `rot` are the columns of the accumulated rotation (which becomes U).
    std::vector<double> work(a.data().begin(), a.data().end());
    std::vector<double> rot(p * p, 0.0);
    for (std::size_t i = 0; i < p; ++i) rot[i * p + i] = 1.0;

    bool converged = p < 2;
    double residual = 0.0;
    for (int sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
        converged = true;
        residual = 0.0;
        for (std::size_t i = 0; i + 1 < p; ++i) {
            double* wi = work.data() + i * n;
            for (std::size_t j = i + 1; j < p; ++j) {
                double* wj = work.data() + j * n;
                const double alpha = dot(wi, wi, n);
                const double beta = dot(wj, wj, n);
                const double gamma = dot(wi, wj, n);
                if (alpha == 0.0 || beta == 0.0 || gamma == 0.0) continue;
                const double scale = std::sqrt(alpha) * std::sqrt(beta);
                const double off = std::abs(gamma) / scale;
                residual = std::max(residual, off);
                if (off <= options.tolerance) continue;
                converged = false;

                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::hypot(1.0, t);
                const double s = c * t;
                rotate(wi, wj, n, c, s);
                rotate(rot.data() + i * p, rot.data() + j * p, p, c, s);
            }
        }
    }
    if (!converged) {
        throw ConvergenceError("Jacobi SVD did not converge in " + std::to_string(options.max_sweeps) +
                                   " sweeps",
                               residual);
    }

    std::vector<double> sigma(p);
    for (std::size_t i = 0; i < p; ++i) sigma[i] = std::sqrt(dot(work.data() + i * n, work.data() + i * n, n));

    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    // Sorted right singular vectors as rows; zero singular values leave a
    // gap that is completed to an orthonormal set.
    std::vector<double> vrows(p * n, 0.0);
    std::vector<bool> missing(p, false);
    std::vector<double> sorted_sigma(p);
    for (std::size_t out = 0; out < p; ++out) {
        const std::size_t src = order[out];
        sorted_sigma[out] = sigma[src];
        if (sigma[src] == 0.0) {
            missing[out] = true;
            continue;
        }
        const double* w = work.data() + src * n;
        for (std::size_t k = 0; k < n; ++k) vrows[out * n + k] = w[k] / sigma[src];
    }
    if (std::find(missing.begin(), missing.end(), true) != missing.end()) {
        complete_orthonormal(vrows, p, n, missing);
    }

    Matrix u(p, p);
    Matrix v(n, p);
    for (std::size_t out = 0; out < p; ++out) {
        const double* r = rot.data() + order[out] * p;
        for (std::size_t k = 0; k < p; ++k) u(k, out) = r[k];
        for (std::size_t k = 0; k < n; ++k) v(k, out) = vrows[out * n + k];
    }
    return SvdFactors{std::move(u), std::move(sorted_sigma), std::move(v)};
}

void require_rank(std::size_t k, std::size_t capacity) {
    if (k > capacity) {
        throw RangeError("rank " + std::to_string(k) + " outside 0.." + std::to_string(capacity));
    }
}

}  // namespace

Matrix SvdFactors::reconstruct(std::size_t first, std::size_t last) const {
    Matrix out(u.rows(), v.rows());
    last = std::min(last, sigma.size());
    const std::size_t n = v.rows();
    std::vector<double> vcol(n);
    for (std::size_t j = first; j < last; ++j) {
        if (sigma[j] == 0.0) continue;
        for (std::size_t k = 0; k < n; ++k) vcol[k] = v(k, j);
        for (std::size_t i = 0; i < u.rows(); ++i) {
            const double coeff = sigma[j] * u(i, j);
            double* row = out.data().data() + i * n;
            for (std::size_t k = 0; k < n; ++k) row[k] += coeff * vcol[k];
        }
    }
    return out;
}

std::size_t SvdFactors::numerical_rank(double relative_tolerance) const {
    if (sigma.empty() || sigma.front() == 0.0) return 0;
    const double cutoff = relative_tolerance * sigma.front();
    return static_cast<std::size_t>(
        std::count_if(sigma.begin(), sigma.end(), [&](double s) { return s > cutoff; }));
}

SvdFactors svd(const Matrix& a, const JacobiOptions& options) {
    if (!all_finite(a)) throw NumericError("svd: input has non-finite entries");
    if (a.rows() <= a.cols()) return svd_wide(a, options);
    SvdFactors t = svd_wide(a.transposed(), options);
    return SvdFactors{std::move(t.v), std::move(t.sigma), std::move(t.u)};
}

double spectral_norm(const Matrix& a) { return svd(a).sigma.front(); }

std::size_t numerical_rank(const Matrix& a, double relative_tolerance) {
    return svd(a).numerical_rank(relative_tolerance);
}

Matrix truncate_rank(const Matrix& a, std::size_t k) {
    require_rank(k, std::min(a.rows(), a.cols()));
    if (k == 0) return Matrix(a.rows(), a.cols());
    return svd(a).reconstruct(0, k);
}

Matrix truncate_reverse(const Matrix& a, std::size_t k) {
    const std::size_t p = std::min(a.rows(), a.cols());
    require_rank(k, p);
    if (k == p) return Matrix(a.rows(), a.cols());
    return svd(a).reconstruct(k, p);
}

ImageFactors::ImageFactors(ImageTensor image) : image_(std::move(image)) {
    factors_.reserve(image_.channels());
    for (const Matrix& ch : image_.planes()) factors_.push_back(svd(ch));
}

Planes ImageFactors::reconstruct(std::size_t k, bool reverse) const {
    require_rank(k, max_rank());
    Planes out;
    out.reserve(factors_.size());
    for (const SvdFactors& f : factors_) {
        out.push_back(reverse ? f.reconstruct(k, f.rank_capacity()) : f.reconstruct(0, k));
    }
    return out;
}

ImageTensor ImageFactors::rank_k(std::size_t k, bool reverse) const {
    require_rank(k, max_rank());
    if ((!reverse && k == max_rank()) || (reverse && k == 0)) return image_;
    return clamp_unit(reconstruct(k, reverse), image_.transposed());
}

ImageTensor image_rank_k(const ImageTensor& x, std::size_t k, bool reverse) {
    require_rank(k, x.width());
    return ImageFactors(x).rank_k(k, reverse);
}

std::vector<TruncationTiming> benchmark_truncation(std::size_t width, std::size_t height,
                                                   std::size_t channels, std::size_t trials,
                                                   std::uint64_t seed) {
    if (trials == 0) throw ConfigError("benchmark_truncation: trials must be at least 1");
    using clock = std::chrono::steady_clock;

    Rng rng(seed);
    std::vector<double> total(width + 1, 0.0);
    for (std::size_t t = 0; t < trials; ++t) {
        Planes planes;
        for (std::size_t c = 0; c < channels; ++c) {
            Matrix m(width, height);
            for (double& v : m.data()) v = rng.uniform();
            planes.push_back(std::move(m));
        }
        const ImageTensor image(std::move(planes));
        // Warm-up so the first timed rank does not absorb cache misses.
        if (t == 0) (void)image_rank_k(image, 0);
        for (std::size_t k = 0; k <= width; ++k) {
            const auto start = clock::now();
            const ImageTensor out = image_rank_k(image, k);
            const auto stop = clock::now();
            total[k] += std::chrono::duration<double>(stop - start).count();
        }
    }

    std::vector<TruncationTiming> timings;
    timings.reserve(width + 1);
    for (std::size_t k = 0; k <= width; ++k) {
        timings.push_back({k, total[k] / static_cast<double>(trials), width, height, channels});
    }
    return timings;
}

}  // namespace lowrank
