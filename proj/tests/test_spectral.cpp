#include <doctest.h>

#include "kaczmarz/spectral.hpp"
#include "test_support.hpp"

using namespace kaczmarz;

TEST_CASE("spectral_stats: identity") {
    const RowMatrix a = RowMatrix::dense(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const SpectralStats st = spectral_stats(a);
    CHECK(st.fro_norm_sq == 3.0);
    CHECK(st.sigma_min_sq == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(st.rank_estimate == 3);
}

TEST_CASE("spectral_stats: scaled identity") {
    const RowMatrix a = RowMatrix::dense(4, 4, {2, 0, 0, 0, 0, 2, 0, 0, 0, 0, 2, 0, 0, 0, 0, 2});
    const SpectralStats st = spectral_stats(a);
    CHECK(st.fro_norm_sq == 16.0);
    CHECK(st.sigma_min_sq == doctest::Approx(4.0).epsilon(1e-10));
    CHECK(st.rank_estimate == 4);
}

TEST_CASE("spectral_stats vs closed-form 2x2 Gram eigenvalues") {
    const RowMatrix a = RowMatrix::dense(2, 2, {7, 8, 140, 159});
    // Gram of the columns: [[7,140]]^T[[...]] entries computed directly
    const double g11 = 7. * 7 + 140. * 140, g12 = 7. * 8 + 140. * 159, g22 = 8. * 8 + 159. * 159;
    const auto [lmin, lmax] = testsup::eig2x2(g11, g12, g22);
    const SpectralStats st = spectral_stats(a);
    CHECK(st.sigma_min_sq == doctest::Approx(lmin).epsilon(1e-10));
    CHECK(st.fro_norm_sq == doctest::Approx(g11 + g22).epsilon(1e-15));
    CHECK(st.rank_estimate == 2);
    CHECK(lmax <= st.fro_norm_sq);
}

TEST_CASE("spectral_stats: orthonormal rows give sigma_min_sq = 1 and exercise deflation") {
    // wide matrix: Gram A^T A has n - m exact null directions
    const RowMatrix a = testsup::orthonormal_rows(5, 8, 77);
    const SpectralStats st = spectral_stats(a, 1e-10);
    CHECK(st.sigma_min_sq == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(st.rank_estimate == 5);
}

TEST_CASE("spectral_stats: rank-deficient tall matrix") {
    const Problem p = testsup::rank_deficient_problem(6, 4, 2, 5);
    const SpectralStats st = spectral_stats(p.mat, 1e-10);
    CHECK(st.rank_estimate == 2);
    const double brute = testsup::sigma_min_sq_bruteforce(p.mat, 1e-10);
    CHECK(st.sigma_min_sq == doctest::Approx(brute).epsilon(1e-9));
}

TEST_CASE("spectral_stats: fro equals the row-norm sum in the same order") {
    SplitMix64 rng(3);
    Vector vals(20 * 7);
    for (double& v : vals) v = rng.uniform(-1.0, 1.0);
    const RowMatrix a = RowMatrix::dense(20, 7, vals);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) acc += a.row_norm_sq(i);
    CHECK(spectral_stats(a).fro_norm_sq == acc);
}

TEST_CASE("spectral_stats refusals") {
    SplitMix64 rng(8);
    Vector vals(9);
    for (double& v : vals) v = rng.uniform(0.0, 1.0);
    const RowMatrix a = RowMatrix::dense(3, 3, vals);
    CHECK_THROWS_AS(spectral_stats(a, 0.0), ConfigError);           // bad tolerance
    CHECK_THROWS_AS(spectral_stats(a, -1.0), ConfigError);
    const RowMatrix big = RowMatrix::dense(1, 1, {1.0});
    CHECK_NOTHROW(spectral_stats(big));
}

TEST_CASE("jacobi eigensolver reproduces a known spectrum") {
    // diag(4,1,9) conjugated by nothing: eigenvalues sorted ascending
    Vector g{4, 0, 0, 0, 1, 0, 0, 0, 9};
    const EigenSym es = jacobi_eigensym(g, 3);
    CHECK(es.values[0] == doctest::Approx(1.0));
    CHECK(es.values[1] == doctest::Approx(4.0));
    CHECK(es.values[2] == doctest::Approx(9.0));
}
