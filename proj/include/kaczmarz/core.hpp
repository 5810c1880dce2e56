#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace kaczmarz {

using Vector = std::vector<double>;

/// Bad arguments, malformed files, inconsistent configuration. CLI exit 1.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Numerical refusal: invalid matrix, violated method precondition,
/// non-convergent auxiliary iteration. CLI exit 2.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// All reductions below accumulate sequentially left-to-right so that a run is
// bit-reproducible given the same inputs.

inline double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_sq(const Vector& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return s;
}

inline double norm(const Vector& a) { return std::sqrt(norm_sq(a)); }

/// y += alpha * x
inline void axpy(double alpha, const Vector& x, Vector& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline double dist_sq(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline bool all_finite(const Vector& a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

/// Compensated summation; keeps aggregate statistics deterministic to ~1e-16
/// regardless of how many terms are folded in.
class KahanSum {
  public:
    void add(double v) {
        const double y = v - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

  private:
    double s_ = 0.0;
    double c_ = 0.0;
};

}  // namespace kaczmarz
