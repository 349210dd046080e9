#include "lowrank/fourier.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "lowrank/error.hpp"
#include "lowrank/parallel.hpp"
#include "lowrank/rng.hpp"
#include "lowrank/svd.hpp"

namespace lowrank {

namespace {

ComplexMatrix dft_matrix(std::size_t n) {
    if (n == 0) throw RangeError("DFT size must be positive");
    ComplexMatrix w(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            // Reduce jk mod n first so large products keep full angle precision.
            const double angle = -2.0 * std::numbers::pi * static_cast<double>((j * k) % n) /
                                 static_cast<double>(n);
            w.re(j, k) = scale * std::cos(angle);
            w.im(j, k) = scale * std::sin(angle);
        }
    }
    return w;
}

}  // namespace

DftPlan::DftPlan(std::size_t n) : n_(n), w_(dft_matrix(n)), w_inverse_(w_.conj_transposed()) {}

ComplexMatrix DftPlan::forward(const ComplexMatrix& x) const { return matmul(w_, x); }

ComplexMatrix DftPlan::inverse(const ComplexMatrix& y) const { return matmul(w_inverse_, y); }

ComplexMatrix lowpass_spatial(const Matrix& x, std::size_t k) {
    const std::size_t n = x.rows();
    if (k < 1 || k > n) {
        throw RangeError("low-pass window " + std::to_string(k) + " outside 1.." + std::to_string(n));
    }
    const DftPlan plan(n);
    ComplexMatrix spectrum = plan.forward(ComplexMatrix(x));
    for (std::size_t r = k; r < n; ++r) {
        for (std::size_t c = 0; c < spectrum.cols(); ++c) {
            spectrum.re(r, c) = 0.0;
            spectrum.im(r, c) = 0.0;
        }
    }
    return plan.inverse(spectrum);
}

std::size_t complex_numerical_rank(const ComplexMatrix& m) {
    return numerical_rank(m.real_embedding()) / 2;
}

std::vector<LowPassReport> verify_bound(std::size_t n, std::size_t trials, std::uint64_t seed) {
    if (n < 2) throw ConfigError("verify_bound: n must be at least 2");
    if (trials < 1) throw ConfigError("verify_bound: trials must be at least 1");

    std::vector<LowPassReport> reports(trials * n);
    parallel_for(trials, [&](std::size_t trial) {
        Rng rng = Rng::for_stream(seed, trial);
        Matrix x(n, n);
        for (double& v : x.data()) v = rng.uniform();
        for (std::size_t k = 1; k <= n; ++k) {
            const std::size_t rank = complex_numerical_rank(lowpass_spatial(x, k));
            reports[trial * n + (k - 1)] = LowPassReport{trial, n, k, rank, rank <= k};
        }
    });
    return reports;
}

}  // namespace lowrank
