#pragma once

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "kaczmarz/bench.hpp"
#include "kaczmarz/diagnostics.hpp"
#include "kaczmarz/matrix_market.hpp"
#include "kaczmarz/solver.hpp"

namespace kaczmarz::cli {

namespace detail {

struct ProblemFlags {
    int fixture = 0;  // 0 = unset
    std::string mm_path, rhs_path;
    std::string rhs_mode = "all-ones";
    std::string family;
    std::size_t m = 0, n = 0;
    double c = 0.0;
    double density = 0.05;
    std::uint64_t problem_seed = 0;

    void attach(CLI::App* app) {
        app->add_option("--fixture", fixture, "bundled 2x2 system (1 or 2)");
        app->add_option("--mm", mm_path, "Matrix Market file for the coefficient matrix");
        app->add_option("--rhs", rhs_path, "Matrix Market file for the right-hand side");
        app->add_option("--rhs-mode", rhs_mode, "all-ones | from-file")
            ->check(CLI::IsMember({"all-ones", "from-file"}));
        app->add_option("--family", family,
                        "generator family: uniform-dense | uniform-interval | sparse-uniform");
        app->add_option("--m", m, "generated row count");
        app->add_option("--n", n, "generated column count");
        app->add_option("--c", c, "lower bound of the entry interval [c,1)");
        app->add_option("--density", density, "sparse generator density");
        app->add_option("--problem-seed", problem_seed, "generator seed");
    }

    GeneratorSpec spec() const {
        GeneratorSpec g;
        g.family = family_from_name(family);
        g.m = m;
        g.n = n;
        g.c = c;
        g.density = density;
        g.seed = problem_seed;
        return g;
    }

    Problem build() const {
        const int sources = (fixture != 0) + !mm_path.empty() + !family.empty();
        if (sources != 1)
            throw ConfigError("choose exactly one problem source: --fixture, --mm or --family");
        if (fixture != 0) return fixture_system(fixture);
        if (!mm_path.empty()) {
            const RhsMode mode = rhs_mode == "from-file" ? RhsMode::from_file : RhsMode::all_ones;
            return load_problem(mm_path, mode, rhs_path);
        }
        return generate(spec());
    }
};

inline StopRule stop_rule(const std::string& s) {
    if (s == "rse") return StopRule::rse;
    if (s == "abs-error") return StopRule::abs_error;
    if (s == "residual") return StopRule::residual;
    throw ConfigError("unknown stop rule: " + s);
}

inline void write_or_print(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::fputs(text.c_str(), stdout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw ConfigError(path + ": cannot open output file");
    out << text;
}

}  // namespace detail

/// Entry point behind the kobench binary. Exit codes: 0 success, 1 usage or
/// configuration error, 2 numerical refusal or failed check.
inline int run(int argc, const char* const* argv) {
    CLI::App app{"Row-action solvers (cyclic, randomized, greedy, oblique) and their benchmark harness"};
    app.require_subcommand(1);

    // --- solve ---
    CLI::App* solve_cmd = app.add_subcommand("solve", "run one solver on one problem");
    detail::ProblemFlags solve_prob;
    solve_prob.attach(solve_cmd);
    std::string solver_name = "ko";
    std::string mode = "online", degenerate = "fallback", stop = "rse";
    std::uint64_t seed = 0;
    std::size_t max_iters = 100000;
    double rse_tol = 0.5e-6, abs_tol = 0.5e-6, residual_tol = 1e-10, epsilon_rel = 1e-12;
    solve_cmd->add_option("--solver", solver_name, "k | rk | ko | rko | mr | md");
    solve_cmd->add_option("--mode", mode, "online | preprocess")
        ->check(CLI::IsMember({"online", "preprocess"}));
    solve_cmd->add_option("--degenerate", degenerate, "fallback | skip")
        ->check(CLI::IsMember({"fallback", "skip"}));
    solve_cmd->add_option("--stop", stop, "rse | abs-error | residual")
        ->check(CLI::IsMember({"rse", "abs-error", "residual"}));
    solve_cmd->add_option("--seed", seed, "solver RNG seed");
    solve_cmd->add_option("--max-iters", max_iters, "iteration cap");
    solve_cmd->add_option("--rse-tol", rse_tol, "RSE stop tolerance");
    solve_cmd->add_option("--abs-tol", abs_tol, "absolute solution-error stop tolerance");
    solve_cmd->add_option("--residual-tol", residual_tol, "residual stop tolerance");
    solve_cmd->add_option("--epsilon-rel", epsilon_rel, "relative degeneracy guard on h");

    // --- bench ---
    CLI::App* bench_cmd = app.add_subcommand("bench", "run an experiment plan file");
    std::string config_path, out_path, format = "csv";
    std::size_t threads_override = 0;
    bench_cmd->add_option("--config", config_path, "plan file")->required();
    bench_cmd->add_option("--out", out_path, "output path (default: plan's out, else stdout)");
    bench_cmd->add_option("--format", format, "csv | table")
        ->check(CLI::IsMember({"csv", "table"}));
    bench_cmd->add_option("--threads", threads_override, "worker threads (overrides plan)");

    // --- check ---
    CLI::App* check_cmd = app.add_subcommand("check", "run the invariant suite over a plan");
    std::string check_config;
    std::size_t check_cap = 20000;
    check_cmd->add_option("--config", check_config, "plan file")->required();
    check_cmd->add_option("--max-iters", check_cap, "per-run cap for the checked solve");

    // --- gen ---
    CLI::App* gen_cmd = app.add_subcommand("gen", "write a generated problem as Matrix Market");
    detail::ProblemFlags gen_prob;
    gen_prob.attach(gen_cmd);
    std::string gen_out;
    gen_cmd->add_option("--out", gen_out, "matrix output path (rhs goes to <out>.rhs.mtx)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (solve_cmd->parsed()) {
            const Problem problem = solve_prob.build();
            SolverConfig cfg = solver_preset(solver_name);
            cfg.mode = mode == "preprocess" ? KoMode::preprocessing : KoMode::online;
            cfg.degenerate = degenerate == "skip" ? DegeneratePolicy::skip
                                                  : DegeneratePolicy::fallback_orthogonal;
            cfg.stop = detail::stop_rule(stop);
            cfg.rng_seed = seed;
            cfg.max_iters = max_iters;
            cfg.rse_tol = rse_tol;
            cfg.abs_err_tol = abs_tol;
            cfg.residual_tol = residual_tol;
            cfg.epsilon_rel = epsilon_rel;

            const RunResult r = solve(problem, cfg);
            std::printf("solver: %s\n", solver_name.c_str());
            std::printf("problem: %zux%zu %s\n", problem.mat.rows(), problem.mat.cols(),
                        problem.mat.is_sparse() ? "sparse" : "dense");
            std::printf("termination: %s\n", to_string(r.reason));
            std::printf("IT: %zu (orthogonal %zu, oblique %zu, skipped %zu)\n", r.iterations,
                        r.orthogonal_steps, r.oblique_steps, r.skipped_steps);
            if (!std::isnan(r.final_error_sq))
                std::printf("final error: %.6e\n", std::sqrt(r.final_error_sq));
            std::printf("final residual: %.6e\n", r.final_residual);
            std::printf("wall: %.6f s\n", r.wall_seconds);
            return 0;
        }

        if (bench_cmd->parsed()) {
            ExperimentPlan plan = load_plan(config_path);
            if (threads_override > 0) plan.threads = threads_override;
            if (!out_path.empty()) plan.output_path = out_path;
            const std::vector<SolverBenchReport> reports = run_plan(plan);
            const std::string text = format == "table" ? emit_table(reports) : emit_csv(reports);
            detail::write_or_print(text, plan.output_path);
            return 0;
        }

        if (check_cmd->parsed()) {
            ExperimentPlan plan = load_plan(check_config);
            const Problem problem = build_problem(plan);
            bool all_pass = true;
            const InvariantTolerances tol;
            for (const SolverEntry& e : plan.solvers) {
                SolverConfig cfg = entry_config(plan, e, 0);
                cfg.max_iters = std::min(plan.max_iters, check_cap);
                const InvariantReport rep = check_run(problem, cfg);
                const bool ok = rep.pass(tol);
                all_pass = all_pass && ok;
                std::printf(
                    "[check] %-8s steps=%zu oblique=%zu orth=%.3e decrease=%.3e membership=%.3e "
                    "mono-excess=%.3e dir=%.3e -> %s\n",
                    e.label.c_str(), rep.steps, rep.oblique_steps, rep.max_orthogonality,
                    rep.max_decrease_mismatch, rep.max_membership, rep.max_monotonicity_excess,
                    std::max(rep.max_direction_residual, rep.max_h_mismatch), ok ? "PASS" : "FAIL");
            }
            return all_pass ? 0 : 2;
        }

        if (gen_cmd->parsed()) {
            if (gen_prob.family.empty()) throw ConfigError("gen requires --family/--m/--n");
            const Problem problem = generate(gen_prob.spec());
            save_matrix_market(problem.mat, gen_out);
            const std::string rhs_out = gen_out + ".rhs.mtx";
            save_matrix_market_vector(problem.b, rhs_out);
            std::printf("wrote %s (%zux%zu, %zu nonzeros) and %s\n", gen_out.c_str(),
                        problem.mat.rows(), problem.mat.cols(), problem.mat.nnz(), rhs_out.c_str());
            return 0;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "refused: %s\n", e.what());
        return 2;
    }
    return 1;
}

}  // namespace kaczmarz::cli
