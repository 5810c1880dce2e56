#include <doctest.h>

#include "kaczmarz/diagnostics.hpp"
#include "kaczmarz/problem.hpp"
#include "kaczmarz/solver.hpp"
#include "test_support.hpp"

using namespace kaczmarz;

TEST_CASE("oblique solver finishes both bundled fixtures in init + one step") {
    for (int which : {1, 2}) {
        const Problem p = fixture_system(which);
        SolverConfig cfg = solver_preset("ko");
        cfg.record_steps = true;
        const RunResult r = solve(p, cfg);
        CHECK(r.reason == Termination::converged);
        CHECK(r.iterations == 2);
        CHECK(r.oblique_steps == 1);
        CHECK(r.orthogonal_steps == 1);
        CHECK(std::abs(r.x[0] - 1.0) <= 1e-10);
        CHECK(std::abs(r.x[1] - 1.0) <= 1e-10);
        REQUIRE(r.records.size() == 2);
        CHECK(r.records[0].kind == StepKind::orthogonal);
        CHECK(r.records[1].kind == StepKind::oblique);
    }
}

TEST_CASE("cyclic baseline reproduces the frozen iteration counts") {
    // Stop rule: squared relative error < 0.5e-6, every projection counted.
    const Problem p1 = fixture_system(1);
    SolverConfig cfg = solver_preset("k");
    cfg.stop = StopRule::rse;
    cfg.rse_tol = 0.5e-6;
    cfg.max_iters = 2000000;
    const RunResult r1 = solve(p1, cfg);
    CHECK(r1.reason == Termination::converged);
    CHECK(r1.iterations == 817);

    const Problem p2 = fixture_system(2);
    const RunResult r2 = solve(p2, cfg);
    CHECK(r2.reason == Termination::converged);
    CHECK(r2.iterations == 940627);
}

TEST_CASE("single-row systems converge in one projection") {
    const RowMatrix a = RowMatrix::dense(1, 3, {1, 2, 2});
    const Problem p = make_problem(a, {9}, std::nullopt, Provenance::fixture);
    SolverConfig cfg = solver_preset("k");
    cfg.stop = StopRule::residual;
    cfg.residual_tol = 1e-12;
    const RunResult r = solve(p, cfg);
    CHECK(r.reason == Termination::converged);
    CHECK(r.iterations == 1);
}

TEST_CASE("step streams start with an orthogonal step and replay bit-identically") {
    GeneratorSpec spec;
    spec.family = Family::uniform_dense;
    spec.m = 10;
    spec.n = 4;
    spec.seed = 31;
    const Problem p = generate(spec);
    SolverConfig cfg = solver_preset("rko");
    cfg.rng_seed = 1234;
    cfg.max_iters = 60;
    cfg.stop = StopRule::none;

    StepStream s1(p, cfg, true);
    StepStream s2(p, cfg, true);
    bool first = true;
    for (;;) {
        auto a = s1.next();
        auto b = s2.next();
        REQUIRE(a.has_value() == b.has_value());
        if (!a) break;
        if (first) {
            CHECK(a->kind == StepKind::orthogonal);
            first = false;
        }
        CHECK(a->k == b->k);
        CHECK(a->row == b->row);
        CHECK(a->kind == b->kind);
        if (a->geometry && b->geometry) {
            CHECK(a->geometry->alpha == b->geometry->alpha);
            CHECK(a->geometry->h == b->geometry->h);
        }
        for (std::size_t j = 0; j < s1.state().x.size(); ++j)
            CHECK(s1.state().x[j] == s2.state().x[j]);
    }
}

TEST_CASE("exactly orthogonal rows: oblique run equals the orthogonal run bitwise, D = 0") {
    // scaled permutation rows are exactly orthogonal
    const RowMatrix a = RowMatrix::dense(4, 4, {0, 2, 0, 0, 3, 0, 0, 0, 0, 0, 0, 5, 0, 0, 7, 0});
    const Vector b{4, 9, 10, 21};
    const Problem p = make_problem(a, b, Vector{3, 2, 3, 2}, Provenance::fixture);

    SolverConfig ko = solver_preset("ko");
    ko.stop = StopRule::none;
    ko.max_iters = 12;
    SolverConfig k = solver_preset("k");
    k.stop = StopRule::none;
    k.max_iters = 12;

    StepStream sko(p, ko, true);
    StepStream sk(p, k, false);
    for (;;) {
        auto ra = sko.next();
        auto rb = sk.next();
        REQUIRE(ra.has_value() == rb.has_value());
        if (!ra) break;
        if (ra->geometry) CHECK(ra->geometry->D == 0.0);
        for (std::size_t j = 0; j < 4; ++j) CHECK(sko.state().x[j] == sk.state().x[j]);
    }
}

TEST_CASE("near-orthonormal rows keep oblique and orthogonal runs within 1e-14 per entry") {
    const RowMatrix a = testsup::orthonormal_rows(12, 12, 4);
    SplitMix64 rng(6);
    Vector xt(12);
    for (double& v : xt) v = rng.uniform(-1.0, 1.0);
    Vector b;
    a.apply(xt, b);
    const Problem p = make_problem(a, b, xt, Provenance::generated);

    SolverConfig ko = solver_preset("ko");
    ko.stop = StopRule::none;
    ko.max_iters = 100;
    SolverConfig k = solver_preset("k");
    k.stop = StopRule::none;
    k.max_iters = 100;
    StepStream sko(p, ko, false);
    StepStream sk(p, k, false);
    while (true) {
        auto ra = sko.next();
        auto rb = sk.next();
        if (!ra || !rb) break;
        for (std::size_t j = 0; j < 12; ++j)
            CHECK(std::abs(sko.state().x[j] - sk.state().x[j]) <= 1e-14);
    }
}

TEST_CASE("preprocessing and online modes produce bit-identical runs") {
    GeneratorSpec spec;
    spec.family = Family::uniform_interval;
    spec.m = 25;
    spec.n = 6;
    spec.c = 0.4;
    spec.seed = 17;
    const Problem p = generate(spec);

    SolverConfig on = solver_preset("ko");
    on.mode = KoMode::online;
    SolverConfig pre = solver_preset("ko");
    pre.mode = KoMode::preprocessing;

    StepStream s1(p, on, false);
    StepStream s2(p, pre, false);
    for (;;) {
        auto a = s1.next();
        auto b = s2.next();
        REQUIRE(a.has_value() == b.has_value());
        if (!a) break;
        CHECK(a->row == b->row);
        CHECK(a->kind == b->kind);
        for (std::size_t j = 0; j < p.mat.cols(); ++j) CHECK(s1.state().x[j] == s2.state().x[j]);
    }
    CHECK(s1.reason() == s2.reason());

    SolverConfig bad = solver_preset("rko");
    bad.mode = KoMode::preprocessing;
    CHECK_THROWS_AS(StepStream(p, bad, false), ConfigError);
}

TEST_CASE("literal skip mode stalls on coincident rows and reports stagnation") {
    const RowMatrix a = RowMatrix::dense(2, 2, {1, 2, 2, 4});
    const Problem p = make_problem(a, {3, 6}, std::nullopt, Provenance::fixture);
    SolverConfig cfg = solver_preset("ko");
    cfg.degenerate = DegeneratePolicy::skip;
    cfg.stop = StopRule::none;  // nothing else would ever fire: the skip loop is a stall
    cfg.stagnation_window = 50;
    cfg.max_iters = 10000;
    const RunResult r = solve(p, cfg);
    CHECK(r.reason == Termination::stagnation);
    CHECK(r.skipped_steps > 0);
    CHECK(r.iterations < 200);
}

TEST_CASE("degenerate fallback keeps a cyclic run converging past a duplicated hyperplane") {
    const RowMatrix a = RowMatrix::dense(3, 2, {1, 2, 2, 4, 3, 1});
    const Vector b{3, 6, 4};  // consistent with (1,1); rows 0 and 1 coincident
    const Problem p = make_problem(a, b, Vector{1, 1}, Provenance::fixture);
    SolverConfig cfg = solver_preset("ko");
    cfg.rse_tol = 1e-20;
    cfg.record_steps = true;
    cfg.max_iters = 1000;
    const RunResult r = solve(p, cfg);
    CHECK(r.reason == Termination::converged);
    CHECK(std::abs(r.x[0] - 1.0) <= 1e-9);
    CHECK(std::abs(r.x[1] - 1.0) <= 1e-9);
    bool saw_fallback = false;
    for (const StepRecord& rec : r.records)
        if (rec.k > 1 && rec.kind == StepKind::orthogonal && rec.geometry) {
            saw_fallback = true;
            CHECK(rec.geometry->h <= cfg.epsilon_rel * p.mat.row_norm_sq(rec.row));
        }
    CHECK(saw_fallback);
}

TEST_CASE("all four solvers converge to the least-norm point on rank-deficient systems") {
    const Problem base = testsup::rank_deficient_problem(6, 4, 2, 33);
    const Vector xstar = least_norm_solution(base);
    const Problem p = make_problem(base.mat, base.b, xstar, Provenance::generated);

    for (const char* name : {"k", "rk", "ko", "rko"}) {
        SolverConfig cfg = solver_preset(name);
        cfg.stop = StopRule::abs_error;
        cfg.abs_err_tol = 1e-6;
        cfg.max_iters = 500000;
        cfg.rng_seed = 101;
        const RunResult r = solve(p, cfg);
        INFO(name);
        CHECK(r.reason == Termination::converged);
        CHECK(std::sqrt(dist_sq(r.x, xstar)) <= 1e-5);
    }
}

TEST_CASE("oblique decrease dominates the orthogonal decrease for the same row pair") {
    GeneratorSpec spec;
    spec.family = Family::uniform_interval;
    spec.m = 15;
    spec.n = 5;
    spec.c = 0.3;
    spec.seed = 77;
    const Problem p = generate(spec);
    SolverConfig cfg = solver_preset("ko");
    cfg.record_steps = true;
    cfg.max_iters = 500;
    const RunResult r = solve(p, cfg);
    for (const StepRecord& rec : r.records) {
        if (rec.kind != StepKind::oblique || !rec.geometry) continue;
        const double M_next = p.mat.row_norm_sq(rec.row);
        CHECK(rec.geometry->h <= M_next * (1.0 + 1e-12));
        CHECK(rec.geometry->sin2_theta <= 1.0 + 1e-12);
        CHECK(rec.geometry->sin2_theta >= -1e-12);
    }
}

TEST_CASE("error history decimation and stop-rule validation") {
    const Problem p = fixture_system(1);
    SolverConfig cfg = solver_preset("k");
    cfg.history_stride = 100;
    cfg.max_iters = 2000000;
    const RunResult r = solve(p, cfg);
    CHECK(r.error_sq_history.size() >= r.iterations / 100);
    for (std::size_t i = 1; i < r.error_sq_history.size(); ++i)
        CHECK(r.error_sq_history[i] <= r.error_sq_history[i - 1] * (1.0 + 1e-12));

    const Problem no_sol =
        make_problem(RowMatrix::dense(1, 1, {1.0}), {1.0}, std::nullopt, Provenance::fixture);
    CHECK_THROWS_AS(solve(no_sol, solver_preset("k")), ConfigError);  // rse needs x_true

    SolverConfig bad = solver_preset("k");
    bad.rse_tol = 0.0;
    CHECK_THROWS_AS(solve(p, bad), ConfigError);
    bad = solver_preset("k");
    bad.max_iters = 0;
    CHECK_THROWS_AS(solve(p, bad), ConfigError);
}

TEST_CASE("greedy presets converge end to end") {
    GeneratorSpec spec;
    spec.family = Family::uniform_dense;
    spec.m = 30;
    spec.n = 6;
    spec.seed = 55;
    const Problem p = generate(spec);
    for (const char* name : {"mr", "md"}) {
        SolverConfig cfg = solver_preset(name);
        cfg.max_iters = 50000;
        const RunResult r = solve(p, cfg);
        INFO(name);
        CHECK(r.reason == Termination::converged);
        CHECK(r.oblique_steps == 0);
        CHECK(dist_sq(r.x, *p.x_true) / norm_sq(*p.x_true) < 0.5e-6);
    }
}

TEST_CASE("norm-proportional selection composes with oblique projection") {
    // same-row draws are possible here; they must take the degenerate path
    // rather than attempting an oblique pairing against the row itself
    GeneratorSpec spec;
    spec.family = Family::uniform_interval;
    spec.m = 4;
    spec.n = 3;
    spec.c = 0.2;
    spec.seed = 66;
    const Problem p = generate(spec);
    SolverConfig cfg;
    cfg.selection = Selection::norm_proportional;
    cfg.projection = Projection::oblique;
    cfg.rng_seed = 8;
    cfg.max_iters = 20000;
    cfg.record_steps = true;
    const RunResult r = solve(p, cfg);
    CHECK(r.reason == Termination::converged);
    bool saw_same_row = false;
    for (const StepRecord& rec : r.records)
        if (rec.prev_row && rec.k > 1 && *rec.prev_row == rec.row) saw_same_row = true;
    CHECK(saw_same_row);  // seed chosen so a repeat actually occurs
    // the run still satisfies the oblique invariants
    const InvariantReport rep = [&] {
        InvariantChecker chk(p, *p.x_true);
        StepStream stream(p, cfg, true);
        while (auto rec = stream.next()) chk.observe(*rec, stream.state().x);
        return chk.report();
    }();
    CHECK(rep.pass());
}

TEST_CASE("solvers refuse invalid matrices") {
    const RowMatrix a = RowMatrix::dense(2, 2, {1, 1, 0, 0});
    Problem p{a, {1, 0}, std::nullopt, Provenance::fixture, 0, 0};
    SolverConfig cfg = solver_preset("k");
    cfg.stop = StopRule::residual;
    CHECK_THROWS_AS(solve(p, cfg), NumericError);
}
