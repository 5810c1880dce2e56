#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>

#include "kaczmarz/core.hpp"

namespace kaczmarz {

/// Non-owning view of one matrix row. For dense rows `idx` is null and the
/// entries are val[0..nnz) at columns 0..nnz-1; for sparse rows `idx` holds
/// strictly increasing column indices.
struct RowView {
    const std::uint32_t* idx;
    const double* val;
    std::size_t nnz;

    double dot(const Vector& x) const {
        double s = 0.0;
        if (idx == nullptr) {
            for (std::size_t j = 0; j < nnz; ++j) s += val[j] * x[j];
        } else {
            for (std::size_t t = 0; t < nnz; ++t) s += val[t] * x[idx[t]];
        }
        return s;
    }

    /// x += alpha * row
    void add_scaled(double alpha, Vector& x) const {
        if (idx == nullptr) {
            for (std::size_t j = 0; j < nnz; ++j) x[j] += alpha * val[j];
        } else {
            for (std::size_t t = 0; t < nnz; ++t) x[idx[t]] += alpha * val[t];
        }
    }
};

/// Row-accessible matrix: dense row-major or compressed sparse rows, with the
/// squared row norms cached at construction. Immutable once built, safe to
/// share across threads.
class RowMatrix {
  public:
    static RowMatrix dense(std::size_t m, std::size_t n, Vector values) {
        check_dims(m, n);
        if (values.size() != m * n) throw ConfigError("dense storage size does not match m*n");
        RowMatrix a;
        a.m_ = m;
        a.n_ = n;
        a.dense_ = std::move(values);
        a.cache_norms();
        return a;
    }

    /// CSR construction. Column indices must be strictly increasing per row.
    static RowMatrix sparse(std::size_t m, std::size_t n, std::vector<std::uint32_t> row_ptr,
                            std::vector<std::uint32_t> col_idx, Vector values) {
        check_dims(m, n);
        if (row_ptr.size() != m + 1 || row_ptr.front() != 0 || row_ptr.back() != col_idx.size() ||
            col_idx.size() != values.size())
            throw ConfigError("malformed CSR arrays");
        for (std::size_t i = 0; i < m; ++i) {
            if (row_ptr[i] > row_ptr[i + 1]) throw ConfigError("CSR row pointers not monotone");
            for (std::uint32_t t = row_ptr[i]; t < row_ptr[i + 1]; ++t) {
                if (col_idx[t] >= n) throw ConfigError("CSR column index out of range");
                if (t > row_ptr[i] && col_idx[t] <= col_idx[t - 1])
                    throw ConfigError("CSR column indices not strictly increasing");
            }
        }
        RowMatrix a;
        a.m_ = m;
        a.n_ = n;
        a.row_ptr_ = std::move(row_ptr);
        a.col_idx_ = std::move(col_idx);
        a.sparse_vals_ = std::move(values);
        a.cache_norms();
        return a;
    }

    std::size_t rows() const { return m_; }
    std::size_t cols() const { return n_; }
    bool is_sparse() const { return !row_ptr_.empty(); }
    std::size_t nnz() const { return is_sparse() ? sparse_vals_.size() : dense_.size(); }
    double density() const {
        return static_cast<double>(nnz()) / (static_cast<double>(m_) * static_cast<double>(n_));
    }

    RowView row(std::size_t i) const {
        if (is_sparse()) {
            const std::uint32_t b = row_ptr_[i];
            return {col_idx_.data() + b, sparse_vals_.data() + b, row_ptr_[i + 1] - b};
        }
        return {nullptr, dense_.data() + i * n_, n_};
    }

    /// Cached M(i) = ||a_i||^2.
    double row_norm_sq(std::size_t i) const { return row_norms_sq_[i]; }
    const Vector& row_norms_sq() const { return row_norms_sq_; }

    /// Convenience element access (slow path for sparse; tests and I/O only).
    double entry(std::size_t i, std::size_t j) const {
        if (!is_sparse()) return dense_[i * n_ + j];
        const std::uint32_t* b = col_idx_.data() + row_ptr_[i];
        const std::uint32_t* e = col_idx_.data() + row_ptr_[i + 1];
        const std::uint32_t* p = std::lower_bound(b, e, static_cast<std::uint32_t>(j));
        if (p == e || *p != j) return 0.0;
        return sparse_vals_[row_ptr_[i] + static_cast<std::size_t>(p - b)];
    }

    /// Bounds-checked inner product of row i with x (sequential accumulation).
    double row_dot(std::size_t i, const Vector& x) const {
        if (i >= m_) throw ConfigError("row index out of range");
        if (x.size() != n_) throw ConfigError("vector length does not match column count");
        return row(i).dot(x);
    }

    /// y = A x
    void apply(const Vector& x, Vector& y) const {
        y.resize(m_);
        for (std::size_t i = 0; i < m_; ++i) y[i] = row(i).dot(x);
    }

  private:
    static void check_dims(std::size_t m, std::size_t n) {
        if (m < 1 || n < 1) throw ConfigError("matrix dimensions must be at least 1x1");
    }

    void cache_norms() {
        row_norms_sq_.resize(m_);
        for (std::size_t i = 0; i < m_; ++i) {
            const RowView r = row(i);
            double s = 0.0;
            for (std::size_t t = 0; t < r.nnz; ++t) s += r.val[t] * r.val[t];
            row_norms_sq_[i] = s;
        }
    }

    std::size_t m_ = 0, n_ = 0;
    Vector dense_;                        // dense storage, row-major
    std::vector<std::uint32_t> row_ptr_;  // CSR
    std::vector<std::uint32_t> col_idx_;
    Vector sparse_vals_;
    Vector row_norms_sq_;
};

constexpr double kZeroRowThreshold = 1e-300;  // absolute, on ||a_i||^2

struct ValidationReport {
    std::vector<std::size_t> zero_rows;                          // ||a_i||^2 < kZeroRowThreshold
    std::vector<std::pair<std::size_t, std::size_t>> nonfinite;  // (row, col) of NaN/Inf entries
    bool valid() const { return zero_rows.empty() && nonfinite.empty(); }
};

/// Report-only check; solvers refuse matrices whose report is not valid().
inline ValidationReport validate(const RowMatrix& a) {
    ValidationReport rep;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const RowView r = a.row(i);
        bool row_finite = true;
        for (std::size_t t = 0; t < r.nnz; ++t) {
            if (!std::isfinite(r.val[t])) {
                rep.nonfinite.emplace_back(i, r.idx ? r.idx[t] : t);
                row_finite = false;
            }
        }
        if (row_finite && a.row_norm_sq(i) < kZeroRowThreshold) rep.zero_rows.push_back(i);
    }
    return rep;
}

inline void require_valid(const RowMatrix& a) {
    const ValidationReport rep = validate(a);
    if (rep.valid()) return;
    std::string msg = "matrix failed validation:";
    if (!rep.zero_rows.empty()) msg += " " + std::to_string(rep.zero_rows.size()) + " zero row(s)";
    if (!rep.nonfinite.empty()) msg += " " + std::to_string(rep.nonfinite.size()) + " non-finite entrie(s)";
    throw NumericError(msg);
}

}  // namespace kaczmarz
