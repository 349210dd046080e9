#include <cmath>

#include "doctest.h"
#include "lowrank/error.hpp"
#include "lowrank/fourier.hpp"
#include "lowrank/svd.hpp"
#include "oracles.hpp"

using namespace lowrank;

TEST_CASE("dft: plan is unitary and invertible") {
    for (std::size_t n : {2u, 5u, 16u}) {
        const DftPlan plan(n);
        const ComplexMatrix& w = plan.matrix();
        const ComplexMatrix gram = matmul(w.conj_transposed(), w);
        CHECK(max_abs_diff(gram, ComplexMatrix(Matrix::identity(n))) < 1e-9);

        Rng rng(n);
        const Matrix x = oracle::random_matrix(rng, n, n + 1);
        CHECK(max_abs_diff(plan.inverse(plan.forward(ComplexMatrix(x))), ComplexMatrix(x)) < 1e-9);
    }
}

TEST_CASE("lowpass_spatial: full window is the identity") {
    Rng rng(1);
    const Matrix x = oracle::random_matrix(rng, 6, 6, 0.0, 1.0);
    const ComplexMatrix out = lowpass_spatial(x, 6);
    CHECK(max_abs_diff(out.real_part(), x) < 1e-9);
    CHECK(max_abs(out.imag_part()) < 1e-9);
}

TEST_CASE("lowpass_spatial: constant signal survives a DC-only window") {
    const Matrix x(5, 4, std::vector<double>(20, 0.37));
    const ComplexMatrix out = lowpass_spatial(x, 1);
    CHECK(max_abs_diff(out.real_part(), x) < 1e-9);
    CHECK(max_abs(out.imag_part()) < 1e-9);
}

TEST_CASE("lowpass_spatial: window bounds rank and validates k") {
    Rng rng(2);
    const Matrix x = oracle::random_matrix(rng, 8, 8, 0.0, 1.0);
    CHECK(complex_numerical_rank(lowpass_spatial(x, 3)) <= 3);
    CHECK_THROWS_AS(lowpass_spatial(x, 0), RangeError);
    CHECK_THROWS_AS(lowpass_spatial(x, 9), RangeError);
}

TEST_CASE("complex_numerical_rank: zero, outer product, unitary") {
    CHECK(complex_numerical_rank(ComplexMatrix(4, 3)) == 0);

    Rng rng(3);
    const std::size_t n = 5;
    ComplexMatrix outer(n, n);
    std::vector<double> ur(n), ui(n), vr(n), vi(n);
    for (std::size_t i = 0; i < n; ++i) {
        ur[i] = rng.normal();
        ui[i] = rng.normal();
        vr[i] = rng.normal();
        vi[i] = rng.normal();
    }
    // (u v^H)_{ij} = u_i * conj(v_j)
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            outer.re(i, j) = ur[i] * vr[j] + ui[i] * vi[j];
            outer.im(i, j) = ui[i] * vr[j] - ur[i] * vi[j];
        }
    }
    CHECK(complex_numerical_rank(outer) == 1);
    CHECK(complex_numerical_rank(DftPlan(7).matrix()) == 7);
}

TEST_CASE("complex_numerical_rank: embedding rank is even") {
    Rng rng(4);
    for (std::size_t k = 1; k <= 6; ++k) {
        const ComplexMatrix m = lowpass_spatial(oracle::random_matrix(rng, 6, 6, 0.0, 1.0), k);
        CHECK(numerical_rank(m.real_embedding()) % 2 == 0);
    }
}

TEST_CASE("verify_bound: small exhaustive run") {
    const auto reports = verify_bound(4, 1);
    REQUIRE(reports.size() == 4);
    for (const auto& r : reports) {
        CHECK(r.bound_satisfied);
        CHECK(r.bound_satisfied == (r.numerical_rank <= r.k));
    }
    CHECK(reports.back().k == 4);
    CHECK(reports.back().numerical_rank == 4);
    CHECK_THROWS_AS(verify_bound(1, 1), ConfigError);
}
