#pragma once

#include "kaczmarz/core.hpp"
#include "kaczmarz/solver.hpp"
#include "kaczmarz/spectral.hpp"

namespace kaczmarz {

/// One-step expected contraction factor of the randomized oblique solver:
/// rho = 1 - sigma_min^2 / ((m-2) (||A||_F^2 - sigma_min^2)), defined for
/// m > 2. Uses the spectral oracle for sigma_min.
struct ContractionBound {
    std::size_t m = 0;
    double fro_norm_sq = 0.0;
    double sigma_min_sq = 0.0;
    double rho = 0.0;
};

inline ContractionBound contraction_bound(const RowMatrix& a, double tol = 1e-12) {
    if (a.rows() <= 2) throw NumericError("contraction_bound: requires m > 2");
    const SpectralStats st = spectral_stats(a, tol);
    const double denom =
        static_cast<double>(a.rows() - 2) * (st.fro_norm_sq - st.sigma_min_sq);
    if (!(denom > 0.0))
        throw NumericError("contraction_bound: undefined when sigma_min^2 equals ||A||_F^2");
    ContractionBound cb;
    cb.m = a.rows();
    cb.fro_norm_sq = st.fro_norm_sq;
    cb.sigma_min_sq = st.sigma_min_sq;
    cb.rho = 1.0 - st.sigma_min_sq / denom;
    if (!(cb.rho > 0.0 && cb.rho < 1.0))
        throw NumericError("contraction_bound: factor outside (0,1); matrix violates hypotheses");
    return cb;
}

struct InvariantTolerances {
    double orthogonality = 1e-8;       // |<w, x_after - x~>| / (||w|| ||x_after - x~||)
    double decrease = 1e-8;            // |(e2_before - e2_after) - r^2/h| / max(e2_before, r^2/h)
    double membership = 1e-10;         // |b_i - <a_i,x>| / (||a_i|| ||x|| + |b_i|)
    double monotonicity_slack = 1e-12; // ||x_after - x~|| <= (1+slack) ||x_before - x~||
    double direction = 1e-10;          // |<w, a_prev>| / (||w|| ||a_prev||), |h - ||w||^2| / M(next)
};

struct InvariantReport {
    std::size_t steps = 0;
    std::size_t oblique_steps = 0;

    double max_orthogonality = 0.0;
    double max_decrease_mismatch = 0.0;
    double max_membership = 0.0;
    double max_monotonicity_excess = 0.0;
    double max_direction_residual = 0.0;
    double max_h_mismatch = 0.0;

    std::size_t worst_orthogonality_k = 0;
    std::size_t worst_decrease_k = 0;
    std::size_t worst_membership_k = 0;
    std::size_t worst_monotonicity_k = 0;

    bool pass(const InvariantTolerances& tol = {}) const {
        return max_orthogonality <= tol.orthogonality && max_decrease_mismatch <= tol.decrease &&
               max_membership <= tol.membership &&
               max_monotonicity_excess <= tol.monotonicity_slack &&
               max_direction_residual <= tol.direction && max_h_mismatch <= tol.direction;
    }
};

/// Streaming evaluation of the per-step solver invariants against a known
/// solution: direction orthogonal to the previous row, the error-decrease
/// identity e2_before - e2_after = r^2/h, hyperplane membership of the rows
/// touched, and monotone error decay. Feed it each record together with the
/// iterate it produced.
class InvariantChecker {
  public:
    InvariantChecker(const Problem& problem, Vector x_true)
        : problem_(&problem), x_true_(std::move(x_true)) {}

    void observe(const StepRecord& rec, const Vector& x_after) {
        const RowMatrix& a = problem_->mat;
        ++rep_.steps;

        if (rec.kind != StepKind::skipped_degenerate) note_membership(rec.k, rec.row, x_after);

        if (!std::isnan(rec.error_sq_before) && !std::isnan(rec.error_sq_after)) {
            const double eb = std::sqrt(rec.error_sq_before);
            const double ea = std::sqrt(rec.error_sq_after);
            double excess = 0.0;
            if (eb > 0.0) excess = ea / eb - 1.0;
            else if (ea > 1e-150) excess = std::numeric_limits<double>::infinity();
            if (excess > rep_.max_monotonicity_excess) {
                rep_.max_monotonicity_excess = excess;
                rep_.worst_monotonicity_k = rec.k;
            }
        }

        if (rec.kind != StepKind::oblique || !rec.geometry) return;
        ++rep_.oblique_steps;
        const ObliqueGeometry& g = *rec.geometry;
        if (rec.prev_row) note_membership(rec.k, *rec.prev_row, x_after);

        if (!g.w.empty()) {
            const double wn = std::sqrt(g.w.norm_sq_computed());
            // x_after - x~ orthogonal to the step direction
            Vector d(x_after.size());
            for (std::size_t j = 0; j < d.size(); ++j) d[j] = x_after[j] - x_true_[j];
            const double dn = norm(d);
            if (dn > 1e-13 * (norm(x_after) + norm(x_true_) + 1.0)) {
                const double v = std::abs(g.w.dot(d)) / (wn * dn + 1e-300);
                if (v > rep_.max_orthogonality) {
                    rep_.max_orthogonality = v;
                    rep_.worst_orthogonality_k = rec.k;
                }
            }
            if (rec.prev_row) {
                const double pn = std::sqrt(a.row_norm_sq(*rec.prev_row));
                const double v = std::abs(g.w.dot_row(a.row(*rec.prev_row))) / (wn * pn + 1e-300);
                rep_.max_direction_residual = std::max(rep_.max_direction_residual, v);
            }
            // h from the closed formula vs the direction's actual norm,
            // scale-relative to M(next)
            const double hm = std::abs(g.h - g.w.norm_sq_computed()) / a.row_norm_sq(rec.row);
            rep_.max_h_mismatch = std::max(rep_.max_h_mismatch, hm);
        }

        if (!std::isnan(rec.error_sq_before) && !std::isnan(rec.error_sq_after) && g.h > 0.0) {
            const double drop = rec.error_sq_before - rec.error_sq_after;
            const double predicted = g.r * g.r / g.h;
            const double scale = std::max(rec.error_sq_before, predicted);
            if (scale > 1e-300) {
                const double v = std::abs(drop - predicted) / scale;
                if (v > rep_.max_decrease_mismatch) {
                    rep_.max_decrease_mismatch = v;
                    rep_.worst_decrease_k = rec.k;
                }
            }
        }
    }

    const InvariantReport& report() const { return rep_; }

  private:
    void note_membership(std::size_t k, std::size_t row, const Vector& x) {
        const RowMatrix& a = problem_->mat;
        const double res = std::abs(problem_->b[row] - a.row(row).dot(x));
        const double scale =
            std::sqrt(a.row_norm_sq(row)) * norm(x) + std::abs(problem_->b[row]) + 1e-300;
        const double v = res / scale;
        if (v > rep_.max_membership) {
            rep_.max_membership = v;
            rep_.worst_membership_k = k;
        }
    }

    const Problem* problem_;
    Vector x_true_;
    InvariantReport rep_;
};

/// Runs the configured solver and evaluates every step against the known
/// solution. The records never need to be stored: steps are checked as the
/// stream produces them.
inline InvariantReport check_run(const Problem& problem, const SolverConfig& cfg) {
    if (!problem.x_true) throw ConfigError("check_run: problem has no known solution");
    StepStream stream(problem, cfg, true);
    InvariantChecker chk(problem, *problem.x_true);
    while (auto rec = stream.next()) chk.observe(*rec, stream.state().x);
    return chk.report();
}

/// One-step conditional contraction experiment for the randomized oblique
/// solver: run a shared prefix of k_probe updates from the configured seed,
/// then take `trials` independent randomized steps from that state and
/// average ||x^(k+1)-x*||^2 / ||x^(k)-x*||^2. Kahan-compensated aggregation
/// keeps the outcome deterministic.
struct ContractionProbe {
    double mean_ratio = std::numeric_limits<double>::quiet_NaN();
    double std_err = std::numeric_limits<double>::quiet_NaN();
    std::size_t trials = 0;
    std::size_t k_probe = 0;
    bool already_converged = false;
};

inline ContractionProbe empirical_contraction(const Problem& problem, const SolverConfig& cfg,
                                              std::size_t trials, std::size_t k_probe) {
    if (!problem.x_true) throw ConfigError("empirical_contraction: problem has no known solution");
    if (cfg.selection != Selection::uniform_random || cfg.projection != Projection::oblique)
        throw ConfigError("empirical_contraction: requires the randomized oblique configuration");
    if (trials < 100) throw ConfigError("empirical_contraction: needs at least 100 trials");
    if (k_probe < 2) throw ConfigError("empirical_contraction: probe step must be >= 2");
    if (problem.mat.rows() <= 2) throw NumericError("empirical_contraction: requires m > 2");

    SolverConfig pre = cfg;
    pre.stop = StopRule::none;
    pre.max_iters = k_probe;
    pre.stagnation_window = std::numeric_limits<std::size_t>::max();
    StepStream stream(problem, pre, false);
    while (stream.next()) {}

    const Vector& xk = stream.state().x;
    const Vector& xs = *problem.x_true;
    const double e2k = dist_sq(xk, xs);

    ContractionProbe out;
    out.trials = trials;
    out.k_probe = k_probe;
    if (e2k <= 1e-28 * (norm_sq(xs) + 1.0)) {
        out.already_converged = true;
        return out;
    }

    const std::size_t m = problem.mat.rows();
    KahanSum sum, sum_sq;
    for (std::size_t t = 0; t < trials; ++t) {
        SplitMix64 rng(derive_seed(cfg.rng_seed, "contraction-probe", t));
        const std::size_t j =
            uniform_excluding(rng, m, stream.state().last_index, stream.state().prev_index);
        auto [x_next, rec] = oblique_step(problem.mat, problem.b, xk, *stream.state().last_index, j, cfg);
        const double ratio = dist_sq(x_next, xs) / e2k;
        sum.add(ratio);
        sum_sq.add(ratio * ratio);
    }
    const double n = static_cast<double>(trials);
    out.mean_ratio = sum.value() / n;
    const double var = std::max(0.0, (sum_sq.value() - n * out.mean_ratio * out.mean_ratio) / (n - 1.0));
    out.std_err = std::sqrt(var / n);
    return out;
}

}  // namespace kaczmarz
