#pragma once

#include <atomic>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "kaczmarz/matrix_market.hpp"
#include "kaczmarz/problem.hpp"
#include "kaczmarz/solver.hpp"

namespace kaczmarz {

enum class ProblemSource { generate, file, fixture };

struct SolverEntry {
    std::string label;  // CSV row name; defaults to the preset name
    std::string preset; // k | rk | ko | rko | mr | md
    KoMode mode = KoMode::online;
    double epsilon_rel = 1e-12;
    DegeneratePolicy degenerate = DegeneratePolicy::fallback_orthogonal;
};

/// One experiment: a problem, a list of solvers, a shared stop rule, and a
/// trial count. Every solver runs under the same starting vector, stop rule
/// and iteration cap; only its private random stream varies per trial.
struct ExperimentPlan {
    std::string id = "experiment";
    ProblemSource source = ProblemSource::generate;
    GeneratorSpec gen;
    std::string matrix_path, rhs_path;
    RhsMode rhs_mode = RhsMode::all_ones;
    int fixture = 1;

    std::vector<SolverEntry> solvers;
    std::size_t trials = 50;
    std::uint64_t base_seed = 0;
    StopRule stop = StopRule::rse;
    double stop_tol = 0.5e-6;
    std::size_t max_iters = 100000;
    std::size_t threads = 1;
    std::size_t history_stride = 0;  // record trial-0 error history every N updates
    std::string output_path;
};

/// Per-trial solver seed; fixed formula so a base seed pins every stream.
inline std::uint64_t trial_seed(std::uint64_t base, std::string_view solver_label, std::size_t trial) {
    return derive_seed(base, solver_label, trial);
}

inline SolverConfig entry_config(const ExperimentPlan& plan, const SolverEntry& e, std::size_t trial) {
    SolverConfig c = solver_preset(e.preset);
    c.mode = e.mode;
    c.epsilon_rel = e.epsilon_rel;
    c.degenerate = e.degenerate;
    c.max_iters = plan.max_iters;
    c.stop = plan.stop;
    switch (plan.stop) {
        case StopRule::rse: c.rse_tol = plan.stop_tol; break;
        case StopRule::abs_error: c.abs_err_tol = plan.stop_tol; break;
        case StopRule::residual: c.residual_tol = plan.stop_tol; break;
        case StopRule::none: break;
    }
    c.rng_seed = trial_seed(plan.base_seed, e.label, trial);
    if (trial == 0) c.history_stride = plan.history_stride;
    return c;
}

inline Problem build_problem(const ExperimentPlan& plan) {
    switch (plan.source) {
        case ProblemSource::generate: return generate(plan.gen);
        case ProblemSource::fixture: return fixture_system(plan.fixture);
        case ProblemSource::file: return load_problem(plan.matrix_path, plan.rhs_mode, plan.rhs_path);
    }
    throw ConfigError("unknown problem source");
}

struct TrialResult {
    std::size_t it = 0;
    double cpu_s = 0.0;
    Termination reason = Termination::iteration_cap;
};

struct SolverBenchReport {
    std::string experiment_id;
    std::string solver;
    std::size_t m = 0, n = 0;
    std::string c_or_density;  // blank when not applicable
    std::vector<TrialResult> per_trial;
    std::vector<double> error_sq_history;  // trial 0, decimated; empty unless requested

    std::size_t trials() const { return per_trial.size(); }
    std::uint64_t it_sum() const {
        std::uint64_t s = 0;
        for (const TrialResult& t : per_trial) s += t.it;
        return s;
    }
    double mean_it() const { return static_cast<double>(it_sum()) / static_cast<double>(trials()); }
    double mean_cpu() const {
        double s = 0.0;
        for (const TrialResult& t : per_trial) s += t.cpu_s;
        return s / static_cast<double>(trials());
    }
    std::size_t converged_count() const {
        std::size_t c = 0;
        for (const TrialResult& t : per_trial) c += t.reason == Termination::converged;
        return c;
    }
    bool all_converged() const { return converged_count() == trials(); }
};

/// Runs every (solver, trial) cell of the plan, optionally on a small worker
/// pool. Results are stored by (solver, trial) index, so the report is
/// independent of scheduling; iteration counts depend only on the base seed.
inline std::vector<SolverBenchReport> run_plan(const ExperimentPlan& plan) {
    if (plan.trials < 1) throw ConfigError("plan: trials must be at least 1");
    if (plan.solvers.empty()) throw ConfigError("plan: no solvers configured");
    // Validate every sub-config up front: a bad entry aborts before any run.
    for (const SolverEntry& e : plan.solvers) entry_config(plan, e, 0);

    const Problem problem = build_problem(plan);

    std::string c_or_density;
    if (plan.source == ProblemSource::generate) {
        char buf[32];
        if (plan.gen.family == Family::uniform_interval) {
            std::snprintf(buf, sizeof buf, "%.10g", plan.gen.c);
            c_or_density = buf;
        } else if (plan.gen.family == Family::sparse_uniform) {
            std::snprintf(buf, sizeof buf, "%.10g", plan.gen.density);
            c_or_density = buf;
        }
    }

    std::vector<SolverBenchReport> reports(plan.solvers.size());
    for (std::size_t s = 0; s < plan.solvers.size(); ++s) {
        reports[s].experiment_id = plan.id;
        reports[s].solver = plan.solvers[s].label;
        reports[s].m = problem.mat.rows();
        reports[s].n = problem.mat.cols();
        reports[s].c_or_density = c_or_density;
        reports[s].per_trial.resize(plan.trials);
    }

    const std::size_t tasks = plan.solvers.size() * plan.trials;
    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex err_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t t = cursor.fetch_add(1);
            if (t >= tasks || failed.load()) return;
            const std::size_t s = t / plan.trials;
            const std::size_t trial = t % plan.trials;
            try {
                const SolverConfig cfg = entry_config(plan, plan.solvers[s], trial);
                RunResult r = solve(problem, cfg);
                reports[s].per_trial[trial] = {r.iterations, r.wall_seconds, r.reason};
                if (trial == 0 && !r.error_sq_history.empty())
                    reports[s].error_sq_history = std::move(r.error_sq_history);
            } catch (const std::exception& ex) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!failed.exchange(true)) first_error = ex.what();
            }
        }
    };

    const std::size_t nthreads = std::max<std::size_t>(1, std::min(plan.threads, tasks));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (std::size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    if (failed.load()) throw NumericError("bench run failed: " + first_error);
    return reports;
}

namespace emit_detail {
inline std::string fmt(double v, const char* spec = "%.10g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}
}  // namespace emit_detail

/// CSV schema: experiment,solver,m,n,c_or_density,trials,mean_it,mean_cpu_s,
/// converged_fraction. Methods with any trial past the iteration cap render
/// "-" in the IT and CPU cells.
inline std::string emit_csv(const std::vector<SolverBenchReport>& reports) {
    std::string out = "experiment,solver,m,n,c_or_density,trials,mean_it,mean_cpu_s,converged_fraction\n";
    for (const SolverBenchReport& r : reports) {
        out += r.experiment_id + "," + r.solver + "," + std::to_string(r.m) + "," +
               std::to_string(r.n) + "," + r.c_or_density + "," + std::to_string(r.trials()) + ",";
        if (r.all_converged()) {
            out += emit_detail::fmt(r.mean_it()) + "," + emit_detail::fmt(r.mean_cpu(), "%.6f");
        } else {
            out += "-,-";
        }
        out += "," +
               emit_detail::fmt(static_cast<double>(r.converged_count()) /
                                static_cast<double>(r.trials())) +
               "\n";
    }
    return out;
}

/// Fixed-width table, one row per experiment, an IT/CPU column pair per
/// solver; cap-exceeded cells render "-".
inline std::string emit_table(const std::vector<SolverBenchReport>& reports) {
    std::vector<std::string> experiments;
    std::vector<std::string> solvers;
    std::map<std::pair<std::string, std::string>, const SolverBenchReport*> cell;
    for (const SolverBenchReport& r : reports) {
        if (std::find(experiments.begin(), experiments.end(), r.experiment_id) == experiments.end())
            experiments.push_back(r.experiment_id);
        if (std::find(solvers.begin(), solvers.end(), r.solver) == solvers.end())
            solvers.push_back(r.solver);
        cell[{r.experiment_id, r.solver}] = &r;
    }

    constexpr int wexp = 20, wit = 12, wcpu = 10;
    std::ostringstream os;
    os << std::left;
    os.width(wexp);
    os << "experiment";
    for (const std::string& s : solvers) {
        std::string it_h = s + ":IT";
        std::string cpu_h = "CPU(s)";
        os << "  ";
        os.width(wit);
        os << it_h;
        os.width(wcpu);
        os << cpu_h;
    }
    os << "\n";
    for (const std::string& e : experiments) {
        os.width(wexp);
        os << e;
        for (const std::string& s : solvers) {
            os << "  ";
            const auto it = cell.find({e, s});
            std::string vit = " ", vcpu = " ";
            if (it != cell.end()) {
                if (it->second->all_converged()) {
                    vit = emit_detail::fmt(it->second->mean_it());
                    vcpu = emit_detail::fmt(it->second->mean_cpu(), "%.4f");
                } else {
                    vit = "-";
                    vcpu = "-";
                }
            }
            os.width(wit);
            os << vit;
            os.width(wcpu);
            os << vcpu;
        }
        os << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Plan files: flat "key = value" lines, '#' comments, one [solver] block per
// solver. Keys outside any block describe the problem and the shared run
// rules. See README for the full key list.
// ---------------------------------------------------------------------------

namespace plan_detail {

inline std::string trim(const std::string& s) {
    const std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("plan: bad numeric value for '" + key + "': " + v);
    }
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long d = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("plan: bad integer value for '" + key + "': " + v);
    }
}

inline StopRule stop_from_name(const std::string& s) {
    if (s == "rse") return StopRule::rse;
    if (s == "abs-error") return StopRule::abs_error;
    if (s == "residual") return StopRule::residual;
    throw ConfigError("plan: unknown stop rule: " + s);
}

}  // namespace plan_detail

inline ExperimentPlan parse_plan(std::istream& in) {
    using plan_detail::to_double;
    using plan_detail::to_u64;
    ExperimentPlan plan;
    SolverEntry* current = nullptr;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = plan_detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t == "[solver]") {
            plan.solvers.emplace_back();
            current = &plan.solvers.back();
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("plan line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = plan_detail::trim(t.substr(0, eq));
        const std::string val = plan_detail::trim(t.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ConfigError("plan line " + std::to_string(lineno) + ": empty key or value");

        if (current) {
            if (key == "name") current->preset = val;
            else if (key == "label") current->label = val;
            else if (key == "mode") {
                if (val == "online") current->mode = KoMode::online;
                else if (val == "preprocess") current->mode = KoMode::preprocessing;
                else throw ConfigError("plan: unknown mode: " + val);
            } else if (key == "epsilon-rel") current->epsilon_rel = to_double(key, val);
            else if (key == "degenerate") {
                if (val == "fallback") current->degenerate = DegeneratePolicy::fallback_orthogonal;
                else if (val == "skip") current->degenerate = DegeneratePolicy::skip;
                else throw ConfigError("plan: unknown degenerate policy: " + val);
            } else throw ConfigError("plan: unknown solver key: " + key);
            continue;
        }

        if (key == "id") plan.id = val;
        else if (key == "source") {
            if (val == "generate") plan.source = ProblemSource::generate;
            else if (val == "file") plan.source = ProblemSource::file;
            else if (val == "fixture") plan.source = ProblemSource::fixture;
            else throw ConfigError("plan: unknown source: " + val);
        } else if (key == "family") plan.gen.family = family_from_name(val);
        else if (key == "m") plan.gen.m = to_u64(key, val);
        else if (key == "n") plan.gen.n = to_u64(key, val);
        else if (key == "c") plan.gen.c = to_double(key, val);
        else if (key == "density") plan.gen.density = to_double(key, val);
        else if (key == "problem-seed") plan.gen.seed = to_u64(key, val);
        else if (key == "fixture") plan.fixture = static_cast<int>(to_u64(key, val));
        else if (key == "matrix") plan.matrix_path = val;
        else if (key == "rhs") plan.rhs_path = val;
        else if (key == "rhs-mode") {
            if (val == "all-ones") plan.rhs_mode = RhsMode::all_ones;
            else if (val == "from-file") plan.rhs_mode = RhsMode::from_file;
            else throw ConfigError("plan: unknown rhs-mode: " + val);
        } else if (key == "trials") plan.trials = to_u64(key, val);
        else if (key == "base-seed") plan.base_seed = to_u64(key, val);
        else if (key == "stop") plan.stop = plan_detail::stop_from_name(val);
        else if (key == "stop-tol") plan.stop_tol = to_double(key, val);
        else if (key == "max-iters") plan.max_iters = to_u64(key, val);
        else if (key == "threads") plan.threads = to_u64(key, val);
        else if (key == "history-stride") plan.history_stride = to_u64(key, val);
        else if (key == "out") plan.output_path = val;
        else throw ConfigError("plan: unknown key: " + key);
    }
    for (SolverEntry& e : plan.solvers) {
        if (e.preset.empty()) throw ConfigError("plan: [solver] block without a name");
        solver_preset(e.preset);  // validates
        if (e.label.empty()) e.label = e.preset;
    }
    for (std::size_t i = 0; i < plan.solvers.size(); ++i)
        for (std::size_t j = i + 1; j < plan.solvers.size(); ++j)
            if (plan.solvers[i].label == plan.solvers[j].label)
                throw ConfigError("plan: duplicate solver label '" + plan.solvers[i].label +
                                  "' (use label = ... to distinguish)");
    return plan;
}

inline ExperimentPlan load_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open plan file");
    return parse_plan(in);
}

}  // namespace kaczmarz
