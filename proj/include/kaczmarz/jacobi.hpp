#pragma once

#include <algorithm>
#include <numeric>

#include "kaczmarz/core.hpp"
#include "kaczmarz/row_matrix.hpp"

namespace kaczmarz {

/// Full eigendecomposition of a symmetric matrix, eigenvalues ascending.
/// vectors is column-major: eigenvector j lives at vectors[j*n .. j*n+n).
struct EigenSym {
    std::size_t n = 0;
    Vector values;
    Vector vectors;

    Vector eigenvector(std::size_t j) const {
        return Vector(vectors.begin() + static_cast<std::ptrdiff_t>(j * n),
                      vectors.begin() + static_cast<std::ptrdiff_t>((j + 1) * n));
    }
};

/// Cyclic Jacobi rotations on a dense symmetric matrix (row-major, n*n).
/// Slow but simple and very accurate; serves as the brute-force eigen route
/// that the power-iteration spectral path is checked against, and as the
/// null-space basis in the least-norm cross-check.
inline EigenSym jacobi_eigensym(Vector a, std::size_t n, double tol = 1e-14, int max_sweeps = 64) {
    if (a.size() != n * n) throw ConfigError("jacobi: matrix size mismatch");
    Vector v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;  // row-major accumulator of rotations

    auto off_norm_sq = [&]() {
        double s = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) s += 2.0 * a[p * n + q] * a[p * n + q];
        return s;
    };
    double fro_sq = 0.0;
    for (double x : a) fro_sq += x * x;
    const double stop = tol * tol * (fro_sq > 0 ? fro_sq : 1.0);

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (off_norm_sq() <= stop) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p];
                    const double vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if (off_norm_sq() > stop) throw NumericError("jacobi eigensolver did not converge");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return a[i * n + i] < a[j * n + j]; });

    EigenSym out;
    out.n = n;
    out.values.resize(n);
    out.vectors.resize(n * n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a[order[j] * n + order[j]];
        for (std::size_t i = 0; i < n; ++i) out.vectors[j * n + i] = v[i * n + order[j]];
    }
    return out;
}

/// Dense Gram matrix G = A^T A (n*n, row-major), accumulated row by row.
inline Vector gram_ata(const RowMatrix& a) {
    const std::size_t n = a.cols();
    Vector g(n * n, 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const RowView r = a.row(i);
        for (std::size_t s = 0; s < r.nnz; ++s) {
            const std::size_t js = r.idx ? r.idx[s] : s;
            const double vs = r.val[s];
            for (std::size_t t = 0; t < r.nnz; ++t) {
                const std::size_t jt = r.idx ? r.idx[t] : t;
                g[js * n + jt] += vs * r.val[t];
            }
        }
    }
    return g;
}

/// Dense Gram matrix W = A A^T (m*m, row-major).
inline Vector gram_aat(const RowMatrix& a) {
    const std::size_t m = a.rows();
    Vector w(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            const RowView ri = a.row(i);
            const RowView rj = a.row(j);
            double s = 0.0;
            if (ri.idx == nullptr) {
                for (std::size_t t = 0; t < rj.nnz; ++t)
                    s += ri.val[rj.idx ? rj.idx[t] : t] * rj.val[t];
            } else if (rj.idx == nullptr) {
                for (std::size_t t = 0; t < ri.nnz; ++t) s += rj.val[ri.idx[t]] * ri.val[t];
            } else {
                std::size_t p = 0, q = 0;
                while (p < ri.nnz && q < rj.nnz) {
                    if (ri.idx[p] < rj.idx[q]) ++p;
                    else if (ri.idx[p] > rj.idx[q]) ++q;
                    else s += ri.val[p++] * rj.val[q++];
                }
            }
            w[i * m + j] = s;
            w[j * m + i] = s;
        }
    }
    return w;
}

}  // namespace kaczmarz
