#pragma once

#include <cstdint>
#include <utility>

#include "kaczmarz/jacobi.hpp"
#include "kaczmarz/problem.hpp"
#include "kaczmarz/rng.hpp"
#include "kaczmarz/row_matrix.hpp"

// Test-side oracles, independent of the library paths they check.

namespace testsup {

/// Eigenvalues of the symmetric 2x2 matrix [[a,b],[b,d]], smallest first.
/// Stable for tiny determinants: lmin = det / lmax.
inline std::pair<double, double> eig2x2(double a, double b, double d) {
    const double tr = a + d;
    const double det = a * d - b * b;
    const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
    const double lmax = 0.5 * (tr + disc);
    const double lmin = lmax > 0.0 ? det / lmax : 0.0;
    return {lmin, lmax};
}

/// Dense matrix with orthonormal rows (m <= n) via twice-iterated
/// Gram-Schmidt on seeded uniform data.
inline kaczmarz::RowMatrix orthonormal_rows(std::size_t m, std::size_t n, std::uint64_t seed) {
    kaczmarz::SplitMix64 rng(seed);
    std::vector<kaczmarz::Vector> rows(m, kaczmarz::Vector(n));
    for (auto& r : rows)
        for (double& v : r) v = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < i; ++j) {
                const double p = kaczmarz::dot(rows[i], rows[j]);
                for (std::size_t t = 0; t < n; ++t) rows[i][t] -= p * rows[j][t];
            }
        }
        const double nrm = kaczmarz::norm(rows[i]);
        for (double& v : rows[i]) v /= nrm;
    }
    kaczmarz::Vector flat;
    flat.reserve(m * n);
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return kaczmarz::RowMatrix::dense(m, n, std::move(flat));
}

/// Consistent rank-r problem: A = U V^T with seeded uniform factors,
/// b = A * ones. Generically no zero and no parallel rows.
inline kaczmarz::Problem rank_deficient_problem(std::size_t m, std::size_t n, std::size_t r,
                                                std::uint64_t seed) {
    kaczmarz::SplitMix64 rng(seed);
    std::vector<double> u(m * r), v(n * r);
    for (double& x : u) x = rng.uniform(-1.0, 1.0);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    kaczmarz::Vector flat(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < r; ++t) s += u[i * r + t] * v[j * r + t];
            flat[i * n + j] = s;
        }
    kaczmarz::RowMatrix mat = kaczmarz::RowMatrix::dense(m, n, std::move(flat));
    kaczmarz::Vector b(m);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        const kaczmarz::RowView row = mat.row(i);
        for (std::size_t t = 0; t < row.nnz; ++t) s += row.val[t];
        b[i] = s;
    }
    return kaczmarz::make_problem(std::move(mat), std::move(b), kaczmarz::Vector(n, 1.0),
                                  kaczmarz::Provenance::generated, seed);
}

/// Brute-force sigma_min^2 of A through the full Jacobi eigendecomposition
/// of the Gram matrix (the route independent of inverse power iteration).
inline double sigma_min_sq_bruteforce(const kaczmarz::RowMatrix& a, double zero_rel = 1e-12) {
    const std::size_t n = a.cols();
    const kaczmarz::EigenSym es = kaczmarz::jacobi_eigensym(kaczmarz::gram_ata(a), n);
    double fro = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) fro += a.row_norm_sq(i);
    for (std::size_t j = 0; j < n; ++j)
        if (es.values[j] > zero_rel * fro) return es.values[j];
    return 0.0;
}

}  // namespace testsup
