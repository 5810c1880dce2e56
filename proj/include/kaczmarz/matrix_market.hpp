#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>

#include "kaczmarz/problem.hpp"
#include "kaczmarz/row_matrix.hpp"

namespace kaczmarz {

enum class RhsMode { all_ones, from_file };

namespace mm_detail {

inline std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

struct Header {
    std::string format;    // coordinate | array
    std::string field;     // real | integer
    std::string symmetry;  // general | symmetric
};

inline Header parse_header(std::istream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
    std::istringstream hs(line);
    std::string banner, object, format, field, symmetry;
    hs >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket" || hs.fail())
        throw ConfigError(path + ": malformed MatrixMarket header");
    object = lower(object);
    format = lower(format);
    field = lower(field);
    symmetry = lower(symmetry);
    if (object != "matrix") throw ConfigError(path + ": only 'matrix' objects are supported");
    if (format != "coordinate" && format != "array")
        throw ConfigError(path + ": unknown format '" + format + "'");
    if (field == "pattern") throw ConfigError(path + ": pattern matrices are not supported");
    if (field == "complex") throw ConfigError(path + ": complex matrices are not supported");
    if (field != "real" && field != "integer")
        throw ConfigError(path + ": unknown field '" + field + "'");
    if (symmetry != "general" && symmetry != "symmetric")
        throw ConfigError(path + ": only general or symmetric matrices are supported");
    return {format, field, symmetry};
}

inline bool next_data_line(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        std::size_t p = line.find_first_not_of(" \t\r");
        if (p == std::string::npos || line[p] == '%') continue;
        return true;
    }
    return false;
}

}  // namespace mm_detail

/// Matrix Market reader: coordinate and array formats, real or integer field,
/// general or symmetric. Symmetric storage is expanded to the full matrix,
/// duplicate coordinate entries are summed, explicit zeros dropped, and the
/// 1-based file indices mapped to 0-based internal ones.
inline RowMatrix load_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open file");
    const mm_detail::Header h = mm_detail::parse_header(in, path);

    std::string line;
    if (!mm_detail::next_data_line(in, line)) throw ConfigError(path + ": missing size line");
    std::istringstream ss(line);

    if (h.format == "coordinate") {
        long long m = 0, n = 0, nz = 0;
        ss >> m >> n >> nz;
        if (ss.fail() || m < 1 || n < 1 || nz < 0)
            throw ConfigError(path + ": malformed coordinate size line");
        if (h.symmetry == "symmetric" && m != n)
            throw ConfigError(path + ": symmetric matrix must be square");
        std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> trip;
        trip.reserve(static_cast<std::size_t>(nz));
        for (long long k = 0; k < nz; ++k) {
            if (!mm_detail::next_data_line(in, line))
                throw ConfigError(path + ": fewer entries than declared");
            std::istringstream es(line);
            long long i = 0, j = 0;
            double v = 0.0;
            es >> i >> j >> v;
            if (es.fail() || i < 1 || i > m || j < 1 || j > n)
                throw ConfigError(path + ": bad coordinate entry");
            trip.emplace_back(static_cast<std::uint32_t>(i - 1), static_cast<std::uint32_t>(j - 1), v);
            if (h.symmetry == "symmetric" && i != j)
                trip.emplace_back(static_cast<std::uint32_t>(j - 1), static_cast<std::uint32_t>(i - 1), v);
        }
        std::sort(trip.begin(), trip.end(), [](const auto& a, const auto& b) {
            return std::get<0>(a) != std::get<0>(b) ? std::get<0>(a) < std::get<0>(b)
                                                    : std::get<1>(a) < std::get<1>(b);
        });
        std::vector<std::uint32_t> row_ptr(static_cast<std::size_t>(m) + 1, 0);
        std::vector<std::uint32_t> col_idx;
        Vector vals;
        std::size_t t = 0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
            while (t < trip.size() && std::get<0>(trip[t]) == i) {
                const std::uint32_t j = std::get<1>(trip[t]);
                double v = std::get<2>(trip[t]);
                ++t;
                while (t < trip.size() && std::get<0>(trip[t]) == i && std::get<1>(trip[t]) == j) {
                    v += std::get<2>(trip[t]);  // duplicates accumulate
                    ++t;
                }
                if (v != 0.0) {
                    col_idx.push_back(j);
                    vals.push_back(v);
                }
            }
            row_ptr[i + 1] = static_cast<std::uint32_t>(col_idx.size());
        }
        return RowMatrix::sparse(static_cast<std::size_t>(m), static_cast<std::size_t>(n),
                                 std::move(row_ptr), std::move(col_idx), std::move(vals));
    }

    // array format: column-major dense values
    long long m = 0, n = 0;
    ss >> m >> n;
    if (ss.fail() || m < 1 || n < 1) throw ConfigError(path + ": malformed array size line");
    Vector dense(static_cast<std::size_t>(m * n), 0.0);
    auto read_value = [&](double& out) {
        if (!mm_detail::next_data_line(in, line)) return false;
        std::istringstream es(line);
        es >> out;
        return !es.fail();
    };
    if (h.symmetry == "general") {
        for (long long j = 0; j < n; ++j)
            for (long long i = 0; i < m; ++i) {
                double v;
                if (!read_value(v)) throw ConfigError(path + ": fewer values than declared");
                dense[static_cast<std::size_t>(i * n + j)] = v;
            }
    } else {
        if (m != n) throw ConfigError(path + ": symmetric matrix must be square");
        for (long long j = 0; j < n; ++j)
            for (long long i = j; i < m; ++i) {
                double v;
                if (!read_value(v)) throw ConfigError(path + ": fewer values than declared");
                dense[static_cast<std::size_t>(i * n + j)] = v;
                dense[static_cast<std::size_t>(j * n + i)] = v;
            }
    }
    return RowMatrix::dense(static_cast<std::size_t>(m), static_cast<std::size_t>(n), std::move(dense));
}

/// Reads a right-hand side: an array-format m x 1 (or 1 x m) file.
inline Vector load_matrix_market_vector(const std::string& path) {
    const RowMatrix v = load_matrix_market(path);
    if (v.cols() != 1 && v.rows() != 1) throw ConfigError(path + ": expected a vector");
    Vector out;
    out.reserve(v.rows() * v.cols());
    for (std::size_t i = 0; i < v.rows(); ++i)
        for (std::size_t j = 0; j < v.cols(); ++j) out.push_back(v.entry(i, j));
    return out;
}

/// Writes dense matrices in array format and sparse ones in coordinate
/// format, with enough digits ("%.17g") that reading the file back
/// reproduces every value bit-exactly.
inline void save_matrix_market(const RowMatrix& a, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError(path + ": cannot open file for writing");
    char buf[64];
    if (a.is_sparse()) {
        out << "%%MatrixMarket matrix coordinate real general\n";
        out << a.rows() << " " << a.cols() << " " << a.nnz() << "\n";
        for (std::size_t i = 0; i < a.rows(); ++i) {
            const RowView r = a.row(i);
            for (std::size_t t = 0; t < r.nnz; ++t) {
                std::snprintf(buf, sizeof buf, "%.17g", r.val[t]);
                out << (i + 1) << " " << (r.idx[t] + 1) << " " << buf << "\n";
            }
        }
    } else {
        out << "%%MatrixMarket matrix array real general\n";
        out << a.rows() << " " << a.cols() << "\n";
        for (std::size_t j = 0; j < a.cols(); ++j)
            for (std::size_t i = 0; i < a.rows(); ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", a.entry(i, j));
                out << buf << "\n";
            }
    }
    if (!out) throw ConfigError(path + ": write failed");
}

inline void save_matrix_market_vector(const Vector& v, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError(path + ": cannot open file for writing");
    out << "%%MatrixMarket matrix array real general\n";
    out << v.size() << " 1\n";
    char buf[64];
    for (double x : v) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out << buf << "\n";
    }
    if (!out) throw ConfigError(path + ": write failed");
}

/// Assembles a Problem from a matrix file. all_ones synthesizes b = A*1 with
/// certified solution; from_file reads a sidecar right-hand side and leaves
/// the solution unknown.
inline Problem load_problem(const std::string& matrix_path, RhsMode mode,
                            const std::string& rhs_path = "") {
    RowMatrix mat = load_matrix_market(matrix_path);
    if (mode == RhsMode::all_ones) {
        Vector b(mat.rows());
        for (std::size_t i = 0; i < mat.rows(); ++i) {
            const RowView r = mat.row(i);
            double s = 0.0;
            for (std::size_t t = 0; t < r.nnz; ++t) s += r.val[t];
            b[i] = s;
        }
        const std::size_t n = mat.cols();
        return make_problem(std::move(mat), std::move(b), Vector(n, 1.0), Provenance::file);
    }
    if (rhs_path.empty()) throw ConfigError("from-file rhs mode requires an rhs path");
    Vector b = load_matrix_market_vector(rhs_path);
    return make_problem(std::move(mat), std::move(b), std::nullopt, Provenance::file);
}

}  // namespace kaczmarz
