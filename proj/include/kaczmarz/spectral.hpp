#pragma once

#include "kaczmarz/core.hpp"
#include "kaczmarz/jacobi.hpp"
#include "kaczmarz/rng.hpp"
#include "kaczmarz/row_matrix.hpp"

namespace kaczmarz {

struct SpectralStats {
    double fro_norm_sq = 0.0;   // ||A||_F^2
    double sigma_min_sq = 0.0;  // squared smallest NONZERO singular value
    std::size_t rank_estimate = 0;
};

namespace detail {

/// In-place Cholesky of an SPD matrix (row-major). Returns false if a pivot
/// is not positive.
inline bool cholesky_spd(Vector& a, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
        double d = a[k * n + k];
        for (std::size_t j = 0; j < k; ++j) d -= a[k * n + j] * a[k * n + j];
        if (!(d > 0.0)) return false;
        const double l = std::sqrt(d);
        a[k * n + k] = l;
        for (std::size_t i = k + 1; i < n; ++i) {
            double s = a[i * n + k];
            for (std::size_t j = 0; j < k; ++j) s -= a[i * n + j] * a[k * n + j];
            a[i * n + k] = s / l;
        }
    }
    return true;
}

/// Solve L L^T x = b given the Cholesky factor in the lower triangle.
inline void cholesky_solve(const Vector& l, std::size_t n, const Vector& b, Vector& x) {
    x = b;
    for (std::size_t i = 0; i < n; ++i) {
        double s = x[i];
        for (std::size_t j = 0; j < i; ++j) s -= l[i * n + j] * x[j];
        x[i] = s / l[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = x[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= l[j * n + ii] * x[j];
        x[ii] = s / l[ii * n + ii];
    }
}

/// y = S x for a dense symmetric matrix.
inline void symv(const Vector& s, std::size_t n, const Vector& x, Vector& y) {
    y.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += s[i * n + j] * x[j];
        y[i] = acc;
    }
}

/// Smallest eigenpair of a dense symmetric PSD matrix by shifted inverse
/// power iteration. `scale` is an a-priori bound on the spectrum (used for
/// the regularizing shift and the stagnation floor); `zero_floor` is the
/// eigenvalue magnitude below which values count as zero for stopping
/// purposes. Throws NumericError if the iteration does not settle.
inline std::pair<double, Vector> smallest_eigenpair(const Vector& s, std::size_t n, double scale,
                                                    double rel_tol, double zero_floor) {
    double shift = 1e-12 * scale;
    Vector chol;
    for (int attempt = 0;; ++attempt) {
        chol = s;
        for (std::size_t i = 0; i < n; ++i) chol[i * n + i] += shift;
        if (cholesky_spd(chol, n)) break;
        if (attempt >= 6) throw NumericError("spectral: could not factor shifted Gram matrix");
        shift *= 100.0;
    }

    // Fixed pseudo-random start keeps the whole path deterministic.
    SplitMix64 rng(0x5eed00c0ffee1234ULL);
    Vector v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    double vn = norm(v);
    for (double& x : v) x /= vn;

    Vector y, sy;
    double lambda_prev = 0.0;
    bool has_prev = false;
    int stable = 0;
    const int cap = 20000;
    for (int it = 0; it < cap; ++it) {
        cholesky_solve(chol, n, v, y);
        const double yn = norm(y);
        if (!(yn > 0.0) || !all_finite(y)) throw NumericError("spectral: inverse iteration broke down");
        for (double& x : y) x /= yn;
        symv(s, n, y, sy);
        const double lambda = dot(y, sy);
        v = y;
        // Null eigenvalues sit at rounding level (possibly slightly
        // negative), so a pure relative test would never settle there; the
        // small absolute term (1% of the zero threshold) lets those
        // directions converge while keeping the relative accuracy for
        // eigenvalues clearly above the threshold.
        if (has_prev &&
            std::abs(lambda - lambda_prev) <= rel_tol * std::abs(lambda) + 0.01 * zero_floor) {
            if (++stable >= 2) return {lambda, v};
        } else {
            stable = 0;
        }
        lambda_prev = lambda;
        has_prev = true;
    }
    throw NumericError("spectral: inverse power iteration did not converge");
}

}  // namespace detail

/// Frobenius norm, smallest nonzero singular value (squared) and a rank
/// estimate, via inverse power iteration on the Gram matrix A^T A with
/// deflation of directions whose eigenvalue falls below tol*||A||_F^2.
/// Intended for small diagnostic matrices (guarded at m*n <= 1e6).
inline SpectralStats spectral_stats(const RowMatrix& a, double tol = 1e-12) {
    if (a.rows() * a.cols() > 1000000) throw ConfigError("spectral_stats: matrix too large for dense work");
    if (!(tol > 0.0)) throw ConfigError("spectral_stats: tol must be positive");

    double fro = 0.0;  // same accumulation order as the row-norm cache
    for (std::size_t i = 0; i < a.rows(); ++i) fro += a.row_norm_sq(i);
    if (fro < kZeroRowThreshold) throw NumericError("spectral_stats: zero matrix");

    const std::size_t n = a.cols();
    Vector work = gram_ata(a);
    const double threshold = tol * fro;

    std::size_t null_count = 0;
    for (;;) {
        auto [lambda, v] = detail::smallest_eigenpair(work, n, fro, tol, threshold);
        if (lambda > threshold) {
            SpectralStats out;
            out.fro_norm_sq = fro;
            out.sigma_min_sq = lambda;
            out.rank_estimate = n - null_count;
            if (!(out.sigma_min_sq <= out.fro_norm_sq * (1.0 + 1e-12)))
                throw NumericError("spectral_stats: sigma_min exceeds Frobenius bound");
            return out;
        }
        if (++null_count >= n) throw NumericError("spectral_stats: no nonzero singular value found");
        // Push the found null direction to the top of the spectrum and repeat.
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) work[i * n + j] += fro * v[i] * v[j];
    }
}

}  // namespace kaczmarz
