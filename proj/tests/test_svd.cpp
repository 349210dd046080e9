#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "lowrank/error.hpp"
#include "lowrank/svd.hpp"
#include "oracles.hpp"

using namespace lowrank;

namespace {

double orthonormality_error(const Matrix& q) {
    return max_abs_diff(matmul(q.transposed(), q), Matrix::identity(q.cols()));
}

Matrix assemble(const SvdFactors& f) {
    Matrix us = f.u;
    for (std::size_t i = 0; i < us.rows(); ++i)
        for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= f.sigma[j];
    return matmul(us, f.v.transposed());
}

void check_contracts(const Matrix& a, const SvdFactors& f) {
    CHECK(std::is_sorted(f.sigma.begin(), f.sigma.end(), std::greater<>()));
    CHECK(f.sigma.back() >= 0.0);
    CHECK(orthonormality_error(f.u) < 1e-9);
    CHECK(orthonormality_error(f.v) < 1e-9);
    CHECK(max_abs_diff(assemble(f), a) < 1e-9 * std::max(1.0, f.sigma.front()));
}

}  // namespace

TEST_CASE("svd: diagonal matrix") {
    const Matrix a = Matrix::from_rows({{2, 0}, {0, 1}});
    const SvdFactors f = svd(a);
    CHECK(f.sigma[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(f.sigma[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(std::abs(f.u(0, 0)) - 1.0) < 1e-15);
    CHECK(std::abs(std::abs(f.v(1, 1)) - 1.0) < 1e-15);
    check_contracts(a, f);
}

TEST_CASE("svd: rank-one matrix") {
    const Matrix a = Matrix::from_rows({{1, 2}, {2, 4}});
    const SvdFactors f = svd(a);
    CHECK(std::abs(f.sigma[0] - 5.0) < 1e-12);
    CHECK(std::abs(f.sigma[1]) < 1e-12);
    CHECK(f.numerical_rank() == 1);
    check_contracts(a, f);
}

TEST_CASE("svd: singular values match symmetric eigensolver oracle") {
    Rng rng(2024);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix a = oracle::random_matrix(rng, 6, 8);
        const SvdFactors f = svd(a);
        const auto expected = oracle::singular_values(a);
        for (std::size_t i = 0; i < expected.size(); ++i) CHECK(std::abs(f.sigma[i] - expected[i]) < 1e-9);
        check_contracts(a, f);
    }
}

TEST_CASE("svd: tall, zero and rank-deficient inputs") {
    Rng rng(9);
    const Matrix tall = oracle::random_matrix(rng, 9, 4);
    const SvdFactors ft = svd(tall);
    CHECK(ft.u.rows() == 9);
    CHECK(ft.v.rows() == 4);
    check_contracts(tall, ft);

    const SvdFactors fz = svd(Matrix(3, 5));
    CHECK(fz.sigma == std::vector<double>(3, 0.0));
    CHECK(fz.numerical_rank() == 0);
    check_contracts(Matrix(3, 5), fz);

    // Rank 2 embedded in 6x7, including an exactly repeated row.
    const Matrix left = oracle::random_matrix(rng, 6, 2);
    const Matrix right = oracle::random_matrix(rng, 2, 7);
    Matrix low = matmul(left, right);
    for (std::size_t j = 0; j < 7; ++j) low(5, j) = low(0, j);
    const SvdFactors fl = svd(low);
    CHECK(fl.numerical_rank() == 2);
    check_contracts(low, fl);
}

TEST_CASE("svd: non-convergence is reported with the residual") {
    Rng rng(1);
    const Matrix a = oracle::random_matrix(rng, 8, 8);
    try {
        (void)svd(a, JacobiOptions{1e-12, 1});
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.residual() > 1e-12);
    }
}

TEST_CASE("truncate_rank: identity rank and rank-one input") {
    Rng rng(4);
    const Matrix a = oracle::random_matrix(rng, 5, 7);
    CHECK(max_abs_diff(truncate_rank(a, 5), a) < 1e-9);
    CHECK(truncate_rank(a, 0) == Matrix(5, 7));
    const Matrix r1 = Matrix::from_rows({{1, 2}, {2, 4}});
    CHECK(max_abs_diff(truncate_rank(r1, 1), r1) < 1e-9);
    CHECK_THROWS_AS(truncate_rank(a, 6), RangeError);
    CHECK_THROWS_AS(truncate_reverse(a, 6), RangeError);
}

TEST_CASE("truncate_rank: residual spectral norm is the next singular value") {
    Rng rng(8);
    const Matrix a = oracle::random_matrix(rng, 5, 5);
    const auto sigma = oracle::singular_values(a);
    CHECK(std::abs(spectral_norm(a - truncate_rank(a, 2)) - sigma[2]) < 1e-8);
    CHECK(numerical_rank(truncate_rank(a, 2)) == 2);
}

TEST_CASE("truncate_reverse: endpoints and top-one removal") {
    Rng rng(6);
    const Matrix a = oracle::random_matrix(rng, 4, 4);
    CHECK(max_abs_diff(truncate_reverse(a, 0), a) < 1e-9);
    CHECK(truncate_reverse(a, 4) == Matrix(4, 4));
    const auto sigma = oracle::singular_values(a);
    CHECK(std::abs(spectral_norm(truncate_reverse(a, 1)) - sigma[1]) < 1e-8);
}

TEST_CASE("truncation: forward plus reverse reassembles the input") {
    Rng rng(12);
    const Matrix a = oracle::random_matrix(rng, 7, 10);
    for (std::size_t k = 0; k <= 7; ++k) {
        CHECK(max_abs_diff(truncate_rank(a, k) + truncate_reverse(a, k), a) < 1e-9);
    }
}

TEST_CASE("truncation: residual norm is non-increasing in k") {
    Rng rng(13);
    const Matrix a = oracle::random_matrix(rng, 8, 12);
    double previous = spectral_norm(a);
    for (std::size_t k = 1; k <= 8; ++k) {
        const double r = spectral_norm(a - truncate_rank(a, k));
        CHECK(r <= previous + 1e-12);
        previous = r;
    }
}

TEST_CASE("truncation: Eckart-Young against random rank-k competitors") {
    Rng rng(14);
    const Matrix a = oracle::random_matrix(rng, 12, 16);
    const SvdFactors f = svd(a);
    for (std::size_t k = 1; k <= 11; ++k) {
        const double best = spectral_norm(a - f.reconstruct(0, k));
        for (int trial = 0; trial < 50; ++trial) {
            const Matrix b = matmul(oracle::random_matrix(rng, 12, k), oracle::random_matrix(rng, k, 16));
            CHECK(best <= spectral_norm(a - b) + 1e-9);
        }
    }
}

TEST_CASE("image_rank_k: endpoints and per-channel rank") {
    Rng rng(21);
    Planes planes;
    for (int c = 0; c < 3; ++c) planes.push_back(oracle::random_matrix(rng, 8, 8, 0.0, 1.0));
    const ImageTensor x(planes);

    const ImageFactors factors(x);
    CHECK(max_abs_diff(factors.reconstruct(8), x.planes()) < 1e-9);
    CHECK(image_rank_k(x, 8) == x);
    CHECK(image_rank_k(x, 0) == ImageTensor::zeros(8, 8, 3));
    CHECK(image_rank_k(x, 0, true) == x);
    CHECK(image_rank_k(x, 8, true) == ImageTensor::zeros(8, 8, 3));

    // Rank is checked before clamping, which can add rank back.
    for (const Matrix& ch : factors.reconstruct(3)) CHECK(numerical_rank(ch) <= 3);
    CHECK_THROWS_AS(image_rank_k(x, 9), RangeError);
}

TEST_CASE("image_rank_k: reusing factors matches per-rank recomputation") {
    // Literal per-rank loop: refactor, zero sigma[k:], multiply back out.
    Rng rng(22);
    const ImageTensor x(Planes{oracle::random_matrix(rng, 6, 9, 0.0, 1.0)});
    const ImageFactors factors(x);
    for (std::size_t k = 0; k < 6; ++k) {
        SvdFactors f = svd(x.channel(0));
        std::fill(f.sigma.begin() + static_cast<std::ptrdiff_t>(k), f.sigma.end(), 0.0);
        const ImageTensor expected = clamp_unit(Planes{assemble(f)});
        CHECK(max_abs_diff(factors.rank_k(k).planes(), expected.planes()) <= 1e-12);
    }
}

TEST_CASE("benchmark_truncation: one record per rank, positive times") {
    const auto timings = benchmark_truncation(4, 6, 3, 1);
    REQUIRE(timings.size() == 5);
    for (std::size_t k = 0; k < timings.size(); ++k) {
        CHECK(timings[k].rank == k);
        CHECK(timings[k].seconds > 0.0);
    }
    CHECK_THROWS_AS(benchmark_truncation(4, 4, 1, 0), ConfigError);
}
