#pragma once

#include <cassert>
#include <chrono>
#include <limits>
#include <optional>
#include <string_view>

#include "kaczmarz/problem.hpp"
#include "kaczmarz/rng.hpp"
#include "kaczmarz/row_matrix.hpp"

namespace kaczmarz {

enum class Selection { cyclic, uniform_random, norm_proportional, max_residual, max_distance };
enum class Projection { orthogonal, oblique };
enum class KoMode { online, preprocessing };
enum class StopRule { rse, abs_error, residual, none };
enum class DegeneratePolicy { fallback_orthogonal, skip };
enum class StepKind { orthogonal, oblique, skipped_degenerate };
enum class Termination { converged, iteration_cap, stagnation };

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::converged: return "converged";
        case Termination::iteration_cap: return "iteration-cap";
        case Termination::stagnation: return "stagnation";
    }
    return "?";
}

struct SolverConfig {
    std::size_t max_iters = 100000;

    // Exactly one stop rule is active per run. `rse` and `abs_error` need a
    // known solution; `none` runs to the iteration cap (probe/diagnostic use).
    StopRule stop = StopRule::rse;
    double rse_tol = 0.5e-6;     // ||x-x*||^2 / ||x*||^2 < rse_tol
    double abs_err_tol = 0.5e-6; // ||x-x*|| <= abs_err_tol
    double residual_tol = 1e-10; // ||b-Ax|| <= residual_tol

    // A pairing is degenerate when h <= epsilon_rel * M(i_next), i.e. the
    // consecutive rows are parallel to within sin^2(theta) <= epsilon_rel.
    double epsilon_rel = 1e-12;
    DegeneratePolicy degenerate = DegeneratePolicy::fallback_orthogonal;

    std::uint64_t rng_seed = 0;
    KoMode mode = KoMode::online;  // preprocessing: cyclic oblique only
    Selection selection = Selection::cyclic;
    Projection projection = Projection::orthogonal;

    // A run that moves ||x|| by less than stagnation_rel (relatively) for
    // stagnation_window consecutive updates terminates with reason
    // `stagnation` instead of burning the iteration cap.
    std::size_t stagnation_window = 1000;
    double stagnation_rel = 1e-16;

    std::size_t history_stride = 0;  // 0: keep no error history
    bool record_steps = false;       // keep full per-step records in the result
};

/// Named baseline configurations used by the CLI and the bench harness.
inline SolverConfig solver_preset(std::string_view name) {
    SolverConfig c;
    if (name == "k") {
        c.selection = Selection::cyclic;
        c.projection = Projection::orthogonal;
    } else if (name == "rk") {
        c.selection = Selection::uniform_random;
        c.projection = Projection::orthogonal;
    } else if (name == "ko") {
        c.selection = Selection::cyclic;
        c.projection = Projection::oblique;
    } else if (name == "rko") {
        c.selection = Selection::uniform_random;
        c.projection = Projection::oblique;
    } else if (name == "mr") {
        c.selection = Selection::max_residual;
        c.projection = Projection::orthogonal;
    } else if (name == "md") {
        c.selection = Selection::max_distance;
        c.projection = Projection::orthogonal;
    } else {
        throw ConfigError("unknown solver preset: " + std::string(name));
    }
    return c;
}

struct SolverState {
    Vector x;
    std::size_t k = 0;  // projection updates applied so far (init included)
    std::optional<std::size_t> last_index;
    std::optional<std::size_t> prev_index;
};

/// Uniform draw over {0..m-1} minus up to two excluded indices. Refuses
/// draws with an empty candidate set.
inline std::size_t uniform_excluding(SplitMix64& rng, std::size_t m, std::optional<std::size_t> a,
                                     std::optional<std::size_t> b) {
    std::size_t ex[2];
    std::size_t ne = 0;
    if (a) ex[ne++] = *a;
    if (b && (!a || *b != *a)) ex[ne++] = *b;
    if (m <= ne) throw NumericError("uniform_excluding: no candidate rows left");
    if (ne == 2 && ex[0] > ex[1]) std::swap(ex[0], ex[1]);
    std::size_t j = rng.below(m - ne);
    for (std::size_t t = 0; t < ne; ++t)
        if (j >= ex[t]) ++j;
    return j;
}

/// Direction w of an oblique update. Dense when the matrix rows are dense,
/// otherwise a packed sparse vector over the union of the two rows' supports.
struct DirectionVector {
    bool dense = true;
    Vector values;                      // dense: length n; sparse: packed
    std::vector<std::uint32_t> indices; // sparse only, strictly increasing

    bool empty() const { return values.empty(); }

    double dot(const Vector& x) const {
        double s = 0.0;
        if (dense) {
            for (std::size_t j = 0; j < values.size(); ++j) s += values[j] * x[j];
        } else {
            for (std::size_t t = 0; t < values.size(); ++t) s += values[t] * x[indices[t]];
        }
        return s;
    }

    void add_scaled(double alpha, Vector& x) const {
        if (dense) {
            for (std::size_t j = 0; j < values.size(); ++j) x[j] += alpha * values[j];
        } else {
            for (std::size_t t = 0; t < values.size(); ++t) x[indices[t]] += alpha * values[t];
        }
    }

    double norm_sq_computed() const {
        double s = 0.0;
        for (double v : values) s += v * v;
        return s;
    }

    double dot_row(const RowView& r) const {
        double s = 0.0;
        if (dense) {
            for (std::size_t t = 0; t < r.nnz; ++t) s += r.val[t] * values[r.idx ? r.idx[t] : t];
        } else if (r.idx == nullptr) {
            for (std::size_t t = 0; t < values.size(); ++t) s += values[t] * r.val[indices[t]];
        } else {
            std::size_t p = 0, q = 0;
            while (p < values.size() && q < r.nnz) {
                if (indices[p] < r.idx[q]) ++p;
                else if (indices[p] > r.idx[q]) ++q;
                else s += values[p++] * r.val[q++];
            }
        }
        return s;
    }
};

/// Everything one oblique pairing produces: D = <a_prev, a_next>, the
/// direction w = a_next - (D/M(prev)) a_prev, its squared norm h by the
/// closed formula h = M(next) - D^2/M(prev), the residual r of the target
/// hyperplane, step size alpha = r/h, and sin^2 of the angle between the
/// hyperplanes, h / M(next).
struct ObliqueGeometry {
    double D = 0.0;
    double h = 0.0;
    double r = std::numeric_limits<double>::quiet_NaN();
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double sin2_theta = 0.0;
    DirectionVector w;
};

struct StepRecord {
    std::size_t k = 0;    // ordinal of this update, 1-based (init step is k=1)
    std::size_t row = 0;  // chosen row, 0-based
    std::optional<std::size_t> prev_row;
    StepKind kind = StepKind::orthogonal;
    std::optional<ObliqueGeometry> geometry;
    double error_sq_before = std::numeric_limits<double>::quiet_NaN();
    double error_sq_after = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

/// D, w, h for the row pair (i_prev -> i_next). w is written into `w_out`
/// (buffers reused across calls); h comes from the closed formula, never
/// from renorming w.
inline void oblique_pair(const RowMatrix& mat, std::size_t i_prev, std::size_t i_next,
                         DirectionVector& w_out, double& D, double& h) {
    const RowView rp = mat.row(i_prev);
    const RowView rn = mat.row(i_next);
    const double Mp = mat.row_norm_sq(i_prev);
    const double Mn = mat.row_norm_sq(i_next);

    double d = 0.0;
    if (rp.idx == nullptr && rn.idx == nullptr) {
        for (std::size_t j = 0; j < rp.nnz; ++j) d += rp.val[j] * rn.val[j];
    } else if (rp.idx == nullptr) {
        for (std::size_t t = 0; t < rn.nnz; ++t) d += rp.val[rn.idx[t]] * rn.val[t];
    } else if (rn.idx == nullptr) {
        for (std::size_t t = 0; t < rp.nnz; ++t) d += rn.val[rp.idx[t]] * rp.val[t];
    } else {
        std::size_t p = 0, q = 0;
        while (p < rp.nnz && q < rn.nnz) {
            if (rp.idx[p] < rn.idx[q]) ++p;
            else if (rp.idx[p] > rn.idx[q]) ++q;
            else d += rp.val[p++] * rn.val[q++];
        }
    }
    D = d;
    const double coeff = D / Mp;
    h = Mn - coeff * D;

    if (rp.idx == nullptr) {
        w_out.dense = true;
        w_out.indices.clear();
        w_out.values.resize(mat.cols());
        for (std::size_t j = 0; j < mat.cols(); ++j) w_out.values[j] = rn.val[j] - coeff * rp.val[j];
    } else {
        w_out.dense = false;
        w_out.indices.clear();
        w_out.values.clear();
        std::size_t p = 0, q = 0;
        while (p < rp.nnz || q < rn.nnz) {
            const std::uint32_t jp = p < rp.nnz ? rp.idx[p] : 0xffffffffu;
            const std::uint32_t jq = q < rn.nnz ? rn.idx[q] : 0xffffffffu;
            if (jp < jq) {
                w_out.indices.push_back(jp);
                w_out.values.push_back(-coeff * rp.val[p++]);
            } else if (jq < jp) {
                w_out.indices.push_back(jq);
                w_out.values.push_back(rn.val[q++]);
            } else {
                w_out.indices.push_back(jp);
                w_out.values.push_back(rn.val[q++] - coeff * rp.val[p++]);
            }
        }
    }
#ifndef NDEBUG
    const double wn = w_out.norm_sq_computed();
    assert(std::abs(h - wn) <= 1e-10 * Mn + 1e-10 * std::abs(h));
#endif
}

}  // namespace detail

/// One orthogonal projection of x onto hyperplane i. Pure.
inline Vector orthogonal_step(const RowMatrix& mat, const Vector& b, std::size_t i, const Vector& x) {
    if (i >= mat.rows()) throw ConfigError("orthogonal_step: row index out of range");
    if (x.size() != mat.cols() || b.size() != mat.rows())
        throw ConfigError("orthogonal_step: dimension mismatch");
    const double Mi = mat.row_norm_sq(i);
    if (Mi < kZeroRowThreshold) throw NumericError("orthogonal_step: zero row");
    Vector y = x;
    const double r = b[i] - mat.row(i).dot(x);
    mat.row(i).add_scaled(r / Mi, y);
    return y;
}

/// Direction geometry for the pair (i_prev -> i_next). Pure; h may be ~0 for
/// (near-)parallel rows, the caller decides what to do with that.
inline ObliqueGeometry oblique_direction(const RowMatrix& mat, std::size_t i_prev, std::size_t i_next) {
    if (i_prev >= mat.rows() || i_next >= mat.rows())
        throw ConfigError("oblique_direction: row index out of range");
    if (i_prev == i_next) throw ConfigError("oblique_direction: row indices must differ");
    if (mat.row_norm_sq(i_prev) < kZeroRowThreshold || mat.row_norm_sq(i_next) < kZeroRowThreshold)
        throw NumericError("oblique_direction: zero row");
    ObliqueGeometry g;
    detail::oblique_pair(mat, i_prev, i_next, g.w, g.D, g.h);
    g.sin2_theta = g.h / mat.row_norm_sq(i_next);
    return g;
}

/// One oblique update from x (assumed on hyperplane i_prev) onto hyperplane
/// i_next. Degenerate pairings follow the configured policy: project
/// orthogonally onto i_next (default) or leave x unchanged. Pure.
inline std::pair<Vector, StepRecord> oblique_step(const RowMatrix& mat, const Vector& b,
                                                  const Vector& x, std::size_t i_prev,
                                                  std::size_t i_next, const SolverConfig& cfg) {
    ObliqueGeometry g = oblique_direction(mat, i_prev, i_next);
    g.r = b[i_next] - mat.row(i_next).dot(x);

    StepRecord rec;
    rec.row = i_next;
    rec.prev_row = i_prev;
    Vector y = x;
    if (g.h > cfg.epsilon_rel * mat.row_norm_sq(i_next)) {
        g.alpha = g.r / g.h;
        g.w.add_scaled(g.alpha, y);
        rec.kind = StepKind::oblique;
    } else if (cfg.degenerate == DegeneratePolicy::fallback_orthogonal) {
        y = orthogonal_step(mat, b, i_next, x);
        rec.kind = StepKind::orthogonal;
        g.w = DirectionVector{};
    } else {
        rec.kind = StepKind::skipped_degenerate;
        g.w = DirectionVector{};
    }
    rec.geometry = std::move(g);
    return {std::move(y), std::move(rec)};
}

/// Lazily replays the exact projection sequence a solve would take: each
/// next() applies one update and yields its record, bit-identical for a
/// given seed. The stream owns the solver state; state() exposes the current
/// iterate between steps.
class StepStream {
  public:
    StepStream(const Problem& problem, const SolverConfig& cfg, bool with_geometry = true)
        : problem_(&problem), cfg_(cfg), with_geometry_(with_geometry), rng_(cfg.rng_seed) {
        const RowMatrix& a = problem.mat;
        require_valid(a);
        if (cfg_.max_iters < 1) throw ConfigError("max_iters must be at least 1");
        if (cfg_.stop == StopRule::rse || cfg_.stop == StopRule::abs_error) {
            if (!problem.x_true) throw ConfigError("solution-error stop rules require a known solution");
            if (cfg_.stop == StopRule::rse) {
                xtrue_norm_sq_ = norm_sq(*problem.x_true);
                if (!(xtrue_norm_sq_ > 0.0)) throw ConfigError("RSE stop rule needs a nonzero solution");
                if (!(cfg_.rse_tol > 0.0)) throw ConfigError("rse_tol must be positive");
            } else if (!(cfg_.abs_err_tol > 0.0)) {
                throw ConfigError("abs_err_tol must be positive");
            }
        }
        if (cfg_.stop == StopRule::residual && !(cfg_.residual_tol > 0.0))
            throw ConfigError("residual_tol must be positive");
        if (cfg_.mode == KoMode::preprocessing &&
            (cfg_.selection != Selection::cyclic || cfg_.projection != Projection::oblique))
            throw ConfigError("preprocessing mode applies to the cyclic oblique solver only");
        if (cfg_.projection == Projection::oblique && cfg_.selection == Selection::uniform_random &&
            a.rows() <= 2)
            throw NumericError("random oblique selection excludes the last two rows and needs m > 2");

        st_.x.assign(a.cols(), 0.0);
        if (problem.x_true) err_sq_ = dist_sq(st_.x, *problem.x_true);

        for (std::size_t i = 0; i < a.rows(); ++i) fro_ += a.row_norm_sq(i);
        if (cfg_.selection == Selection::norm_proportional) {
            cum_.resize(a.rows());
            double acc = 0.0;
            for (std::size_t i = 0; i < a.rows(); ++i) {
                acc += a.row_norm_sq(i);
                cum_[i] = acc;
            }
        }
        if (cfg_.mode == KoMode::preprocessing) {
            const std::size_t m = a.rows();
            pre_.resize(m);
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t j = (i + 1) % m;
                if (j == i) continue;  // m == 1: no pairs
                detail::oblique_pair(a, i, j, pre_[i].w, pre_[i].D, pre_[i].h);
                pre_[i].sin2_theta = pre_[i].h / a.row_norm_sq(j);
            }
        }
    }

    bool finished() const { return finished_; }
    Termination reason() const { return reason_; }
    const SolverState& state() const { return st_; }
    const Problem& problem() const { return *problem_; }
    double error_sq() const { return err_sq_; }

    std::optional<StepRecord> next() {
        if (finished_) return std::nullopt;

        StepRecord rec;
        rec.error_sq_before = err_sq_;
        double displacement = 0.0;

        if (st_.k == 0 || cfg_.projection == Projection::orthogonal) {
            const std::size_t i = st_.k == 0 ? select_initial() : select_next();
            displacement = apply_orthogonal(i, rec);
        } else {
            const std::size_t i = select_next();
            displacement = apply_oblique(i, rec);
        }

        ++st_.k;
        rec.k = st_.k;
        rec.prev_row = st_.last_index;
        st_.prev_index = st_.last_index;
        st_.last_index = rec.row;

        if (problem_->x_true) {
            err_sq_ = dist_sq(st_.x, *problem_->x_true);
            rec.error_sq_after = err_sq_;
        }
        evaluate_stop(displacement);
        return rec;
    }

  private:
    std::size_t select_initial() {
        switch (cfg_.selection) {
            case Selection::cyclic: return 0;
            case Selection::uniform_random: return rng_.below(problem_->mat.rows());
            case Selection::norm_proportional: return draw_norm_proportional();
            case Selection::max_residual: return argmax_residual(false);
            case Selection::max_distance: return argmax_residual(true);
        }
        return 0;
    }

    std::size_t select_next() {
        const std::size_t m = problem_->mat.rows();
        switch (cfg_.selection) {
            case Selection::cyclic: return st_.k % m;
            case Selection::uniform_random:
                if (cfg_.projection == Projection::oblique) return draw_excluding();
                return rng_.below(m);
            case Selection::norm_proportional: return draw_norm_proportional();
            case Selection::max_residual: return argmax_residual(false);
            case Selection::max_distance: return argmax_residual(true);
        }
        return 0;
    }

    /// Uniform over the rows minus {last, prev}; the first randomized step
    /// after initialization excludes only the initial row.
    std::size_t draw_excluding() {
        return uniform_excluding(rng_, problem_->mat.rows(), st_.last_index, st_.prev_index);
    }

    std::size_t draw_norm_proportional() {
        const double u = rng_.uniform01() * fro_;
        const auto it = std::lower_bound(cum_.begin(), cum_.end(), u);
        return it == cum_.end() ? cum_.size() - 1 : static_cast<std::size_t>(it - cum_.begin());
    }

    /// Greedy rules; ties broken by lowest row index.
    std::size_t argmax_residual(bool scale_by_norm) {
        const RowMatrix& a = problem_->mat;
        std::size_t best = 0;
        double best_val = -1.0;
        for (std::size_t i = 0; i < a.rows(); ++i) {
            double v = std::abs(problem_->b[i] - a.row(i).dot(st_.x));
            if (scale_by_norm) v /= std::sqrt(a.row_norm_sq(i));
            if (v > best_val) {
                best_val = v;
                best = i;
            }
        }
        return best;
    }

    double apply_orthogonal(std::size_t i, StepRecord& rec) {
        const RowMatrix& a = problem_->mat;
        const double Mi = a.row_norm_sq(i);
        const double r = problem_->b[i] - a.row(i).dot(st_.x);
        const double t = r / Mi;
        a.row(i).add_scaled(t, st_.x);
        rec.row = i;
        rec.kind = StepKind::orthogonal;
        return std::abs(t) * std::sqrt(Mi);
    }

    double apply_oblique(std::size_t i_next, StepRecord& rec) {
        const RowMatrix& a = problem_->mat;
        const std::size_t i_prev = *st_.last_index;
        rec.row = i_next;

        if (i_next == i_prev) {
            // Same hyperplane twice (possible under norm-proportional
            // selection): treat as a degenerate pairing.
            return apply_degenerate(i_next, a.row_norm_sq(i_prev), 0.0, rec);
        }

        double D, h;
        const DirectionVector* w;
        if (cfg_.mode == KoMode::preprocessing) {
            const ObliqueGeometry& pg = pre_[i_prev];
            D = pg.D;
            h = pg.h;
            w = &pg.w;
        } else {
            detail::oblique_pair(a, i_prev, i_next, scratch_w_, D, h);
            w = &scratch_w_;
        }

        if (h <= cfg_.epsilon_rel * a.row_norm_sq(i_next)) return apply_degenerate(i_next, D, h, rec);

        const double r = problem_->b[i_next] - a.row(i_next).dot(st_.x);
        const double alpha = r / h;
        w->add_scaled(alpha, st_.x);
        rec.kind = StepKind::oblique;
        if (with_geometry_) {
            ObliqueGeometry g;
            g.D = D;
            g.h = h;
            g.r = r;
            g.alpha = alpha;
            g.sin2_theta = h / a.row_norm_sq(i_next);
            g.w = *w;
            rec.geometry = std::move(g);
        }
        return std::abs(alpha) * std::sqrt(h);
    }

    double apply_degenerate(std::size_t i_next, double D, double h, StepRecord& rec) {
        const RowMatrix& a = problem_->mat;
        if (with_geometry_) {
            ObliqueGeometry g;
            g.D = D;
            g.h = h;
            g.r = problem_->b[i_next] - a.row(i_next).dot(st_.x);
            g.sin2_theta = h / a.row_norm_sq(i_next);
            rec.geometry = std::move(g);
        }
        if (cfg_.degenerate == DegeneratePolicy::fallback_orthogonal) return apply_orthogonal(i_next, rec);
        rec.kind = StepKind::skipped_degenerate;
        return 0.0;
    }

    void evaluate_stop(double displacement) {
        bool converged = false;
        switch (cfg_.stop) {
            case StopRule::rse: converged = err_sq_ / xtrue_norm_sq_ < cfg_.rse_tol; break;
            case StopRule::abs_error: converged = std::sqrt(err_sq_) <= cfg_.abs_err_tol; break;
            case StopRule::residual:
                converged = consistency_residual(problem_->mat, problem_->b, st_.x) <= cfg_.residual_tol;
                break;
            case StopRule::none: break;
        }
        if (converged) {
            finished_ = true;
            reason_ = Termination::converged;
            return;
        }
        const double floor = cfg_.stagnation_rel * std::max(1.0, std::sqrt(norm_sq(st_.x)));
        if (displacement < floor) {
            if (++stagnant_ >= cfg_.stagnation_window) {
                finished_ = true;
                reason_ = Termination::stagnation;
                return;
            }
        } else {
            stagnant_ = 0;
        }
        if (st_.k >= cfg_.max_iters) {
            finished_ = true;
            reason_ = Termination::iteration_cap;
        }
    }

    const Problem* problem_;
    SolverConfig cfg_;
    bool with_geometry_;
    SolverState st_;
    SplitMix64 rng_;
    bool finished_ = false;
    Termination reason_ = Termination::iteration_cap;
    double err_sq_ = std::numeric_limits<double>::quiet_NaN();
    double xtrue_norm_sq_ = 0.0;
    double fro_ = 0.0;
    Vector cum_;
    std::vector<ObliqueGeometry> pre_;
    DirectionVector scratch_w_;
    std::size_t stagnant_ = 0;
};

struct RunResult {
    Termination reason = Termination::iteration_cap;
    std::size_t iterations = 0;  // projection updates applied, init included
    Vector x;
    double wall_seconds = 0.0;
    std::size_t orthogonal_steps = 0, oblique_steps = 0, skipped_steps = 0;
    double final_error_sq = std::numeric_limits<double>::quiet_NaN();
    double final_residual = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> error_sq_history;  // decimated by history_stride
    std::vector<StepRecord> records;       // populated when record_steps
};

/// Runs the configured solver to termination. Wall time covers solver work
/// only (including any preprocessing), not problem construction or I/O.
inline RunResult solve(const Problem& problem, const SolverConfig& cfg) {
    RunResult res;
    const auto t0 = std::chrono::steady_clock::now();
    StepStream stream(problem, cfg, cfg.record_steps);
    while (auto rec = stream.next()) {
        switch (rec->kind) {
            case StepKind::orthogonal: ++res.orthogonal_steps; break;
            case StepKind::oblique: ++res.oblique_steps; break;
            case StepKind::skipped_degenerate: ++res.skipped_steps; break;
        }
        if (cfg.history_stride > 0 && problem.x_true &&
            (rec->k % cfg.history_stride == 0 || stream.finished()))
            res.error_sq_history.push_back(rec->error_sq_after);
        if (cfg.record_steps) res.records.push_back(std::move(*rec));
    }
    const auto t1 = std::chrono::steady_clock::now();
    res.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    res.reason = stream.reason();
    res.iterations = stream.state().k;
    res.x = stream.state().x;
    if (problem.x_true) res.final_error_sq = stream.error_sq();
    res.final_residual = consistency_residual(problem.mat, problem.b, res.x);
    return res;
}

}  // namespace kaczmarz
