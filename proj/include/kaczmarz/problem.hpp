#pragma once

#include <optional>
#include <string>

#include "kaczmarz/core.hpp"
#include "kaczmarz/jacobi.hpp"
#include "kaczmarz/rng.hpp"
#include "kaczmarz/row_matrix.hpp"

namespace kaczmarz {

enum class Provenance { generated, file, fixture };

/// A linear system A x = b, optionally with a known solution. When x_true is
/// present the constructor path certifies consistency:
///   ||A x_true - b|| <= 1e-10 * (||A||_F * ||x_true||).
struct Problem {
    RowMatrix mat;
    Vector b;
    std::optional<Vector> x_true;
    Provenance provenance = Provenance::generated;
    std::uint64_t seed = 0;
    std::size_t zero_row_resamples = 0;
};

inline double consistency_residual(const RowMatrix& a, const Vector& b, const Vector& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double d = a.row(i).dot(x) - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline Problem make_problem(RowMatrix mat, Vector b, std::optional<Vector> x_true,
                            Provenance prov, std::uint64_t seed = 0) {
    if (b.size() != mat.rows()) throw ConfigError("right-hand side length does not match row count");
    if (x_true) {
        if (x_true->size() != mat.cols()) throw ConfigError("known solution length does not match column count");
        double fro = 0.0;
        for (std::size_t i = 0; i < mat.rows(); ++i) fro += mat.row_norm_sq(i);
        const double res = consistency_residual(mat, b, *x_true);
        if (res > 1e-10 * (std::sqrt(fro) * norm(*x_true)))
            throw NumericError("problem is not consistent with its claimed solution");
    }
    Problem p{std::move(mat), std::move(b), std::move(x_true), prov, seed, 0};
    return p;
}

enum class Family { uniform_dense, uniform_interval, sparse_uniform };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::uniform_dense: return "uniform-dense";
        case Family::uniform_interval: return "uniform-interval";
        case Family::sparse_uniform: return "sparse-uniform";
    }
    return "?";
}

inline Family family_from_name(const std::string& s) {
    if (s == "uniform-dense") return Family::uniform_dense;
    if (s == "uniform-interval") return Family::uniform_interval;
    if (s == "sparse-uniform") return Family::sparse_uniform;
    throw ConfigError("unknown generator family: " + s);
}

/// Random-problem recipe. Entries are i.i.d. uniform on [c,1); the dense
/// family fixes c = 0. b is the exact row-sum vector, so x_true is all ones.
struct GeneratorSpec {
    Family family = Family::uniform_dense;
    std::size_t m = 1, n = 1;
    double c = 0.0;
    double density = 1.0;  // sparse family only
    std::uint64_t seed = 0;

    void check() const {
        if (m < 1 || n < 1) throw ConfigError("generator: m and n must be at least 1");
        if (!(c >= 0.0 && c < 1.0)) throw ConfigError("generator: c must lie in [0,1)");
        if (family == Family::sparse_uniform && !(density > 0.0 && density <= 1.0))
            throw ConfigError("generator: density must lie in (0,1]");
        if (family == Family::uniform_dense && c != 0.0)
            throw ConfigError("generator: uniform-dense fixes c = 0; use uniform-interval");
    }
};

/// Deterministic problem construction: one SplitMix64 stream seeded with
/// spec.seed, consumed in row-major order. Zero rows are redrawn (and
/// counted) so that every generated problem passes validation.
inline Problem generate(const GeneratorSpec& spec) {
    spec.check();
    SplitMix64 rng(spec.seed);
    const double lo = spec.family == Family::uniform_dense ? 0.0 : spec.c;
    std::size_t resamples = 0;

    RowMatrix mat = [&] {
        if (spec.family == Family::sparse_uniform) {
            std::vector<std::uint32_t> row_ptr{0};
            std::vector<std::uint32_t> col_idx;
            Vector vals;
            row_ptr.reserve(spec.m + 1);
            for (std::size_t i = 0; i < spec.m; ++i) {
                const std::size_t row_begin = col_idx.size();
                for (;;) {
                    for (std::size_t j = 0; j < spec.n; ++j) {
                        if (rng.uniform01() < spec.density) {
                            col_idx.push_back(static_cast<std::uint32_t>(j));
                            vals.push_back(rng.uniform(lo, 1.0));
                        }
                    }
                    if (col_idx.size() > row_begin) break;
                    ++resamples;  // empty row: redraw it
                }
                row_ptr.push_back(static_cast<std::uint32_t>(col_idx.size()));
            }
            return RowMatrix::sparse(spec.m, spec.n, std::move(row_ptr), std::move(col_idx),
                                     std::move(vals));
        }
        Vector vals(spec.m * spec.n);
        for (std::size_t i = 0; i < spec.m; ++i) {
            for (;;) {
                double nrm = 0.0;
                for (std::size_t j = 0; j < spec.n; ++j) {
                    const double v = rng.uniform(lo, 1.0);
                    vals[i * spec.n + j] = v;
                    nrm += v * v;
                }
                if (nrm >= kZeroRowThreshold) break;
                ++resamples;
            }
        }
        return RowMatrix::dense(spec.m, spec.n, std::move(vals));
    }();

    Vector b(spec.m);
    for (std::size_t i = 0; i < spec.m; ++i) {
        const RowView r = mat.row(i);
        double s = 0.0;
        for (std::size_t t = 0; t < r.nnz; ++t) s += r.val[t];
        b[i] = s;
    }
    Problem p = make_problem(std::move(mat), std::move(b), Vector(spec.n, 1.0),
                             Provenance::generated, spec.seed);
    p.zero_row_resamples = resamples;
    return p;
}

/// Two bundled 2x2 systems with exact solution (1,1). System 1 has rows at a
/// moderate angle; system 2 has nearly parallel rows, the regime where the
/// oblique step pays off most.
inline Problem fixture_system(int which) {
    if (which == 1)
        return make_problem(RowMatrix::dense(2, 2, {7.0, -8.0, 8.0, -7.0}), {-1.0, 1.0},
                            Vector{1.0, 1.0}, Provenance::fixture);
    if (which == 2)
        return make_problem(RowMatrix::dense(2, 2, {7.0, 8.0, 140.0, 159.0}), {15.0, 299.0},
                            Vector{1.0, 1.0}, Provenance::fixture);
    throw ConfigError("fixture_system: which must be 1 or 2");
}

namespace detail {

/// Rank-revealing (diagonally pivoted) Cholesky of a symmetric PSD matrix.
/// On return `a` holds the lower-trapezoidal factor of P^T W P and perm the
/// pivot order; returns the detected rank.
inline std::size_t pivoted_cholesky(Vector& a, std::size_t n, std::vector<std::size_t>& perm,
                                    double rel_tol) {
    perm.resize(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    double max_diag0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag0 = std::max(max_diag0, a[i * n + i]);
    if (max_diag0 <= 0.0) return 0;
    const double cutoff = rel_tol * max_diag0;

    auto swap_rc = [&](std::size_t p, std::size_t q) {
        if (p == q) return;
        for (std::size_t k = 0; k < n; ++k) std::swap(a[p * n + k], a[q * n + k]);
        for (std::size_t k = 0; k < n; ++k) std::swap(a[k * n + p], a[k * n + q]);
        std::swap(perm[p], perm[q]);
    };

    std::size_t rank = 0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (a[i * n + i] > a[piv * n + piv]) piv = i;
        if (a[piv * n + piv] <= cutoff) break;
        swap_rc(k, piv);
        const double l = std::sqrt(a[k * n + k]);
        a[k * n + k] = l;
        for (std::size_t i = k + 1; i < n; ++i) a[i * n + k] /= l;
        // Full (symmetric) trailing update so later pivot swaps stay valid.
        for (std::size_t i = k + 1; i < n; ++i)
            for (std::size_t j = k + 1; j < n; ++j) a[i * n + j] -= a[i * n + k] * a[j * n + k];
        ++rank;
    }
    return rank;
}

}  // namespace detail

/// Least-norm solution x* of a consistent system, computed independently of
/// the iterative solvers: solve (A A^T) y = b through a rank-revealing
/// pivoted Cholesky and return x* = A^T y (unique in range(A^T) no matter
/// which particular y comes out). Refuses inconsistent systems. Cross-checks
/// A x* = b and, for modest column counts, x* ⟂ null(A) against the Gram
/// eigenvector basis.
inline Vector least_norm_solution(const Problem& problem, double rel_tol = 1e-12) {
    const RowMatrix& a = problem.mat;
    const std::size_t m = a.rows(), n = a.cols();
    if (m * n > 1000000) throw ConfigError("least_norm_solution: matrix too large for dense work");
    require_valid(a);

    Vector y(m, 0.0);
    if (m <= 2000) {
        Vector w = gram_aat(a);
        std::vector<std::size_t> perm;
        const std::size_t rank = detail::pivoted_cholesky(w, m, perm, rel_tol);
        if (rank == 0) throw NumericError("least_norm_solution: zero Gram matrix");
        // Forward solve on the leading rank x rank block, then check the
        // dropped rows: a nonzero mismatch there means b is not in range(A).
        Vector pb(m);
        for (std::size_t i = 0; i < m; ++i) pb[i] = problem.b[perm[i]];
        Vector z(rank);
        for (std::size_t i = 0; i < rank; ++i) {
            double s = pb[i];
            for (std::size_t j = 0; j < i; ++j) s -= w[i * m + j] * z[j];
            z[i] = s / w[i * m + i];
        }
        double bn = norm(problem.b);
        for (std::size_t i = rank; i < m; ++i) {
            double s = pb[i];
            for (std::size_t j = 0; j < rank; ++j) s -= w[i * m + j] * z[j];
            if (std::abs(s) > 1e-8 * (bn + 1.0))
                throw NumericError("least_norm_solution: system is inconsistent");
        }
        Vector u(rank);
        for (std::size_t ii = rank; ii-- > 0;) {
            double s = z[ii];
            for (std::size_t j = ii + 1; j < rank; ++j) s -= w[j * m + ii] * u[j];
            u[ii] = s / w[ii * m + ii];
        }
        for (std::size_t i = 0; i < rank; ++i) y[perm[i]] = u[i];
    } else {
        // Tall case: normal equations A^T A x = A^T b, full column rank only.
        Vector g = gram_ata(a);
        std::vector<std::size_t> perm;
        Vector gf = g;
        const std::size_t rank = detail::pivoted_cholesky(gf, n, perm, rel_tol);
        if (rank < n)
            throw NumericError("least_norm_solution: rank-deficient system too large for the dense route");
        Vector atb(n, 0.0);
        for (std::size_t i = 0; i < m; ++i) a.row(i).add_scaled(problem.b[i], atb);
        // L L^T solves the row/column-permuted system; un-permute at the end.
        Vector rp(n), z(n);
        for (std::size_t i = 0; i < n; ++i) rp[i] = atb[perm[i]];
        for (std::size_t i = 0; i < n; ++i) {
            double s = rp[i];
            for (std::size_t j = 0; j < i; ++j) s -= gf[i * n + j] * z[j];
            z[i] = s / gf[i * n + i];
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double s = z[ii];
            for (std::size_t j = ii + 1; j < n; ++j) s -= gf[j * n + ii] * z[j];
            z[ii] = s / gf[ii * n + ii];
        }
        Vector x(n);
        for (std::size_t i = 0; i < n; ++i) x[perm[i]] = z[i];
        const double res0 = consistency_residual(a, problem.b, x);
        if (res0 > 1e-8 * (norm(problem.b) + norm(x)))
            throw NumericError("least_norm_solution: residual check failed (inconsistent system?)");
        return x;
    }

    Vector x(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) a.row(i).add_scaled(y[i], x);

    // Cross-checks.
    double fro = 0.0;
    for (std::size_t i = 0; i < m; ++i) fro += a.row_norm_sq(i);
    const double res = consistency_residual(a, problem.b, x);
    if (res > 1e-8 * (std::sqrt(fro) * norm(x) + norm(problem.b)))
        throw NumericError("least_norm_solution: residual check failed (inconsistent system?)");
    if (n <= 400) {
        const EigenSym es = jacobi_eigensym(gram_ata(a), n);
        const double thr = rel_tol * fro;
        for (std::size_t j = 0; j < n && es.values[j] <= thr; ++j) {
            const Vector nb = es.eigenvector(j);
            if (std::abs(dot(nb, x)) > 1e-8 * (norm(x) + 1.0))
                throw NumericError("least_norm_solution: null-space component detected");
        }
    }
    return x;
}

}  // namespace kaczmarz
