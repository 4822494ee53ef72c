#include <cstdint>
#include <filesystem>
#include <thread>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ash/estimate.hpp"
#include "ash/eval.hpp"
#include "ash/io.hpp"
#include "ash/psi.hpp"
#include "ash/rng.hpp"
#include "ash/shape.hpp"
#include "ash/simulate.hpp"
#include "ash/types.hpp"

namespace {

using ash::Index;
using ash::VectorXd;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitUsage = 2;

json load_config(const std::string& path) {
    if (path.empty()) {
        return json::object();
    }
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(path + ": cannot open config file");
    }
    json cfg;
    in >> cfg;
    if (!cfg.is_object()) {
        throw std::runtime_error(path + ": config must be a JSON object");
    }
    return cfg;
}

/// Command-line flags win over config-file values; config values win over
/// built-in defaults.
template <typename T>
void merge(const CLI::App& cmd, const json& cfg, const std::string& flag, const std::string& key,
           T& value) {
    if (cmd.count(flag) == 0 && cfg.contains(key)) {
        value = cfg.at(key).get<T>();
    }
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        values.push_back(std::stod(item));
    }
    return values;
}

std::vector<std::string> parse_string_list(const std::string& text) {
    std::vector<std::string> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        values.push_back(item);
    }
    return values;
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

VectorXd load_costs(const std::string& spec, Index m) {
    if (spec.empty() || spec == "uniform") {
        return VectorXd::Ones(m);
    }
    return ash::read_vector(spec, m);
}

struct TaskArgs {
    std::string kind = "cam";
    std::string caps_path;
    bool caps_auto = false;
    std::string weights_path;
    std::string target_path;
    double gamma = 0.0;
};

void add_task_options(CLI::App* cmd, TaskArgs& args) {
    cmd->add_option("--task", args.kind, "Shaping task: cam, mmash, lsash, hom");
    cmd->add_option("--caps", args.caps_path, "Per-user activity caps file (cam)");
    cmd->add_flag("--caps-auto", args.caps_auto,
                  "Derive caps as lambda0 + U[0, 2 mean(lambda0)] from the model and --seed");
    cmd->add_option("--weights", args.weights_path,
                    "Sparse weight matrix file for lsash (row,col,value); default identity");
    cmd->add_option("--target", args.target_path, "Target activity profile file (lsash)");
    cmd->add_option("--gamma", args.gamma, "l1 sparsity weight");
}

ash::SparseMatrix read_weights(const std::string& path, Index m) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(path + ": cannot open for reading");
    }
    std::string line;
    std::getline(in, line);
    if (line != "row,col,value") {
        throw std::runtime_error(path + ": expected header row,col,value");
    }
    std::vector<ash::Triplet> entries;
    long line_no = 1;
    Index max_row = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string r, c, v;
        if (!std::getline(ss, r, ',') || !std::getline(ss, c, ',') || !std::getline(ss, v)) {
            throw std::runtime_error(path + ": malformed triplet (line " +
                                     std::to_string(line_no) + ")");
        }
        entries.push_back({std::stol(r), std::stol(c), std::stod(v)});
        max_row = std::max(max_row, entries.back().row);
    }
    return ash::SparseMatrix(max_row + 1, m, std::move(entries));
}

ash::ShapingTask build_task(const TaskArgs& args, const ash::Model& model, std::uint64_t seed) {
    const auto kind = ash::task_kind_from_name(args.kind);
    if (!kind) {
        throw std::runtime_error("unknown task kind '" + args.kind + "'");
    }
    const Index m = model.net.m;
    switch (*kind) {
        case ash::TaskKind::CappedActivityMax: {
            VectorXd caps;
            if (args.caps_auto) {
                ash::Rng rng(seed);
                const double mean = model.lambda0.mean();
                caps = model.lambda0;
                for (Index i = 0; i < m; ++i) {
                    caps[i] += rng.uniform(0.0, 2.0 * mean);
                }
            } else if (!args.caps_path.empty()) {
                caps = ash::read_vector(args.caps_path, m);
            } else {
                throw std::runtime_error("cam needs --caps FILE or --caps-auto");
            }
            return ash::ShapingTask::capped_activity_max(std::move(caps), args.gamma);
        }
        case ash::TaskKind::MinimaxShaping:
            return ash::ShapingTask::minimax(args.gamma);
        case ash::TaskKind::LeastSquaresShaping: {
            if (args.target_path.empty()) {
                throw std::runtime_error("lsash needs --target FILE");
            }
            ash::SparseMatrix weights = args.weights_path.empty()
                                            ? ash::SparseMatrix::identity(m)
                                            : read_weights(args.weights_path, m);
            VectorXd target = ash::read_vector(args.target_path, weights.rows());
            return ash::ShapingTask::least_squares(std::move(weights), std::move(target),
                                                   args.gamma);
        }
        case ash::TaskKind::Homogenization:
            return ash::ShapingTask::homogenization(args.gamma);
    }
    throw std::runtime_error("unknown task kind");
}

int run_simulate(const std::string& config_path, CLI::App* cmd, std::string model_path,
                 std::string out_path, double horizon, long runs, std::uint64_t seed,
                 int threads, std::size_t cap) {
    const json cfg = load_config(config_path);
    merge(*cmd, cfg, "--model", "model", model_path);
    merge(*cmd, cfg, "--out", "out", out_path);
    merge(*cmd, cfg, "--horizon", "horizon", horizon);
    merge(*cmd, cfg, "--runs", "runs", runs);
    merge(*cmd, cfg, "--seed", "seed", seed);
    merge(*cmd, cfg, "--threads", "threads", threads);
    merge(*cmd, cfg, "--cap", "cap", cap);
    if (model_path.empty() || out_path.empty() || !(horizon > 0.0) || runs < 1) {
        std::cerr << "simulate: need --model, --out, positive --horizon, --runs >= 1\n";
        return kExitUsage;
    }
    const ash::Model model = ash::read_model(model_path);
    const ash::SpectralRadiusResult rho = ash::spectral_radius(model.net);
    if (rho.value >= 1.0) {
        std::cerr << "warning: branching spectral radius " << rho.value
                  << " >= 1; cascades may explode (event cap " << cap << ")\n";
    }
    ash::SimulateOptions opts;
    opts.max_events = cap;
    const ash::EventLog log = ash::simulate_cascades(model.net, model.lambda0, horizon,
                                                     static_cast<std::size_t>(runs), seed,
                                                     threads, opts);
    ash::write_events(out_path, log, /*labels=*/true);

    const auto generations = ash::generation_counts(log, horizon);
    std::cout << "cascades: " << log.cascades.size() << "\n";
    std::cout << "events:   " << log.total_events() << "\n";
    for (std::size_t g = 0; g < generations.size(); ++g) {
        std::cout << "  generation " << g << ": " << generations[g] << "\n";
    }
    std::vector<std::size_t> per_user(static_cast<std::size_t>(model.net.m), 0);
    for (const ash::Cascade& c : log.cascades) {
        for (const ash::Event& e : c.events) {
            ++per_user[static_cast<std::size_t>(e.user)];
        }
    }
    const std::size_t shown = std::min<std::size_t>(per_user.size(), 100);
    std::cout << "events per user:";
    for (std::size_t u = 0; u < shown; ++u) {
        std::cout << ' ' << per_user[u];
    }
    if (shown < per_user.size()) {
        std::cout << " ... (" << per_user.size() - shown << " more)";
    }
    std::cout << "\nwrote " << out_path << "\n";
    return kExitOk;
}

int run_estimate(const std::string& config_path, CLI::App* cmd, std::string events_path,
                 std::string out_path, double horizon, Index users, double omega,
                 std::string omega_grid, int folds, std::string support_path, long max_iter,
                 double tol, double l1) {
    const json cfg = load_config(config_path);
    merge(*cmd, cfg, "--events", "events", events_path);
    merge(*cmd, cfg, "--out", "out", out_path);
    merge(*cmd, cfg, "--horizon", "horizon", horizon);
    merge(*cmd, cfg, "--users", "users", users);
    merge(*cmd, cfg, "--omega", "omega", omega);
    merge(*cmd, cfg, "--omega-grid", "omega_grid", omega_grid);
    merge(*cmd, cfg, "--folds", "folds", folds);
    merge(*cmd, cfg, "--support", "support", support_path);
    merge(*cmd, cfg, "--max-iter", "max_iter", max_iter);
    merge(*cmd, cfg, "--tol", "tol", tol);
    merge(*cmd, cfg, "--l1", "l1", l1);
    if (events_path.empty() || out_path.empty() || !(horizon > 0.0)) {
        std::cerr << "estimate: need --events, --out, positive --horizon\n";
        return kExitUsage;
    }
    if (omega <= 0.0 && omega_grid.empty()) {
        std::cerr << "estimate: need --omega W or --omega-grid a,b,c\n";
        return kExitUsage;
    }
    const ash::EventLog log = ash::read_events(events_path, horizon);
    Index m = users;
    if (m <= 0) {
        for (const ash::Cascade& c : log.cascades) {
            for (const ash::Event& e : c.events) {
                m = std::max<Index>(m, e.user + 1);
            }
        }
    }
    if (m <= 0) {
        std::cerr << "estimate: empty log and no --users given\n";
        return kExitUsage;
    }
    if (auto issue = ash::validate_event_log(log, m)) {
        std::cerr << "estimate: invalid events: " << *issue << "\n";
        return kExitUsage;
    }
    ash::SupportPattern support;
    if (support_path.empty() || support_path == "full") {
        support = ash::SupportPattern::full(m);
    } else {
        support = ash::read_support(support_path, m);
        // Self-excitation stays a free parameter even when the supplied
        // graph omits loops.
        for (Index i = 0; i < m; ++i) {
            support.entries.emplace_back(i, i);
        }
    }

    ash::FitOptions fit_opts;
    fit_opts.max_iterations = max_iter;
    fit_opts.gradient_tolerance = tol;
    fit_opts.l1_penalty = l1;

    double chosen_omega = omega;
    if (!omega_grid.empty()) {
        const std::vector<double> grid = parse_double_list(omega_grid);
        const ash::SelectOmegaResult sel = ash::select_omega(log, grid, folds, support, fit_opts);
        chosen_omega = sel.omega;
        std::cout << "selected omega " << chosen_omega << " by " << folds
                  << "-fold cross validation\n";
    }
    const ash::FitResult fit = ash::fit_mle(log, chosen_omega, support, fit_opts);
    ash::write_model(out_path, ash::Model{fit.net, fit.lambda0});
    std::cout << "log-likelihood " << fit.loglik << " after " << fit.iterations
              << " iterations (" << (fit.converged ? "converged" : "not converged") << ")\n";
    std::cout << "wrote " << out_path << "\n";
    return fit.converged ? kExitOk : kExitNumerical;
}

int run_shape(const std::string& config_path, CLI::App* cmd, std::string model_path,
              std::string out_dir, TaskArgs task_args, double budget_total,
              std::string costs_spec, double horizon, std::uint64_t seed, std::string base_mode,
              long max_iter, double tol, double step, long patience, double psi_tol,
              std::string gammas_text, bool sweep_mode) {
    const json cfg = load_config(config_path);
    merge(*cmd, cfg, "--model", "model", model_path);
    merge(*cmd, cfg, "--out", "out", out_dir);
    merge(*cmd, cfg, "--task", "task", task_args.kind);
    merge(*cmd, cfg, "--caps", "caps", task_args.caps_path);
    merge(*cmd, cfg, "--weights", "weights", task_args.weights_path);
    merge(*cmd, cfg, "--target", "target", task_args.target_path);
    merge(*cmd, cfg, "--gamma", "gamma", task_args.gamma);
    merge(*cmd, cfg, "--budget", "budget", budget_total);
    merge(*cmd, cfg, "--costs", "costs", costs_spec);
    merge(*cmd, cfg, "--horizon", "horizon", horizon);
    merge(*cmd, cfg, "--seed", "seed", seed);
    merge(*cmd, cfg, "--base", "base", base_mode);
    merge(*cmd, cfg, "--max-iter", "max_iter", max_iter);
    merge(*cmd, cfg, "--tol", "tol", tol);
    merge(*cmd, cfg, "--step", "step", step);
    merge(*cmd, cfg, "--patience", "patience", patience);
    merge(*cmd, cfg, "--psi-tol", "psi_tol", psi_tol);
    if (sweep_mode) {
        merge(*cmd, cfg, "--gammas", "gammas", gammas_text);
    }
    if (model_path.empty() || out_dir.empty() || !(horizon > 0.0)) {
        std::cerr << "shape: need --model, --out, positive --horizon\n";
        return kExitUsage;
    }
    if (budget_total < 0.0) {
        std::cerr << "shape: budget must be nonnegative\n";
        return kExitUsage;
    }
    const ash::Model model = ash::read_model(model_path);
    const ash::ShapingTask task = build_task(task_args, model, seed);
    std::filesystem::create_directories(out_dir);

    ash::SolveOptions solve;
    solve.max_iterations = max_iter;
    solve.tolerance = tol;
    solve.initial_step = step;
    solve.patience = patience;
    solve.psi_tol = psi_tol;
    if (base_mode == "model") {
        solve.base_intensity = model.lambda0;
    } else if (base_mode != "zero") {
        std::cerr << "shape: --base must be 'zero' or 'model'\n";
        return kExitUsage;
    }

    if (sweep_mode) {
        const std::vector<double> gammas = parse_double_list(gammas_text);
        if (gammas.empty()) {
            std::cerr << "sweep: need --gammas g1,g2,...\n";
            return kExitUsage;
        }
        const auto rows = ash::sparsity_sweep(
            task, model.net, horizon,
            ash::BudgetSpec{load_costs(costs_spec, model.net.m), budget_total}, gammas, solve);
        const std::string path = join_path(out_dir, "sweep.csv");
        ash::write_sweep_csv(path, rows);
        std::cout << "wrote " << path << "\n";
        for (const auto& row : rows) {
            if (row.failed) {
                std::cerr << "gamma " << row.gamma << " failed: " << row.error << "\n";
            }
        }
        return kExitOk;
    }

    ash::SolveReport report;
    if (budget_total == 0.0) {
        // Degenerate budget: the only feasible point is zero.
        report.allocation = VectorXd::Zero(model.net.m);
        report.converged = true;
        report.objective = ash::objective_value(task, model.net, horizon, report.allocation,
                                                psi_tol, solve.base_intensity);
        report.trace.push_back(report.objective);
    } else {
        report = ash::pgd_solve(
            task, model.net, horizon,
            ash::BudgetSpec{load_costs(costs_spec, model.net.m), budget_total}, solve);
    }
    ash::write_vector(join_path(out_dir, "allocation.csv"), report.allocation, "lambda0");
    ash::write_solve_report(join_path(out_dir, "report.json"), report,
                            ash::task_kind_name(task.kind), task.gamma);
    ash::write_trace_csv(join_path(out_dir, "trace.csv"), report.trace);
    std::cout << "objective " << report.objective << ", budget consumed "
              << report.budget_consumed << ", nonzeros " << report.nonzeros << " ("
              << (report.converged ? "converged" : "not converged") << ")\n";
    std::cout << "wrote " << join_path(out_dir, "allocation.csv") << "\n";
    return report.converged ? kExitOk : kExitNumerical;
}

int run_eval(const std::string& config_path, CLI::App* cmd, std::string model_path,
             std::string out_dir, TaskArgs task_args, double budget_total,
             std::string costs_spec, double horizon, std::string schemes_text, long runs,
             double window, std::uint64_t seed, std::string events_path, double interval_horizon,
             int threads, long max_iter, double tol, double psi_tol) {
    const json cfg = load_config(config_path);
    merge(*cmd, cfg, "--model", "model", model_path);
    merge(*cmd, cfg, "--out", "out", out_dir);
    merge(*cmd, cfg, "--task", "task", task_args.kind);
    merge(*cmd, cfg, "--caps", "caps", task_args.caps_path);
    merge(*cmd, cfg, "--weights", "weights", task_args.weights_path);
    merge(*cmd, cfg, "--target", "target", task_args.target_path);
    merge(*cmd, cfg, "--gamma", "gamma", task_args.gamma);
    merge(*cmd, cfg, "--budget", "budget", budget_total);
    merge(*cmd, cfg, "--costs", "costs", costs_spec);
    merge(*cmd, cfg, "--horizon", "horizon", horizon);
    merge(*cmd, cfg, "--schemes", "schemes", schemes_text);
    merge(*cmd, cfg, "--runs", "runs", runs);
    merge(*cmd, cfg, "--window", "window", window);
    merge(*cmd, cfg, "--seed", "seed", seed);
    merge(*cmd, cfg, "--events", "events", events_path);
    merge(*cmd, cfg, "--interval-horizon", "interval_horizon", interval_horizon);
    merge(*cmd, cfg, "--threads", "threads", threads);
    merge(*cmd, cfg, "--max-iter", "max_iter", max_iter);
    merge(*cmd, cfg, "--tol", "tol", tol);
    merge(*cmd, cfg, "--psi-tol", "psi_tol", psi_tol);
    if (model_path.empty() || out_dir.empty() || !(horizon > 0.0) || !(budget_total > 0.0)) {
        std::cerr << "eval: need --model, --out, positive --horizon and --budget\n";
        return kExitUsage;
    }
    const ash::Model model = ash::read_model(model_path);
    const Index m = model.net.m;
    const ash::ShapingTask task = build_task(task_args, model, seed);
    const ash::BudgetSpec budget{load_costs(costs_spec, m), budget_total};
    if (window <= 0.0) {
        window = horizon / 10.0;
    }
    std::filesystem::create_directories(out_dir);

    bool want_theoretical = false, want_simulated = false, want_heldout = false;
    for (const std::string& s : parse_string_list(schemes_text)) {
        if (s == "theoretical") {
            want_theoretical = true;
        } else if (s == "simulated") {
            want_simulated = true;
        } else if (s == "heldout") {
            want_heldout = true;
        } else {
            std::cerr << "eval: unknown scheme '" << s << "'\n";
            return kExitUsage;
        }
    }

    // Allocations: the optimizer and every applicable baseline, all as
    // increments on top of the model's exogenous intensity.
    const VectorXd& base = model.lambda0;
    const VectorXd* target =
        task.kind == ash::TaskKind::LeastSquaresShaping && task.target.size() == m
            ? &task.target
            : nullptr;
    std::vector<std::pair<std::string, VectorXd>> methods;
    {
        ash::SolveOptions solve;
        solve.max_iterations = max_iter;
        solve.tolerance = tol;
        solve.psi_tol = psi_tol;
        solve.base_intensity = base;
        const ash::SolveReport opt = ash::pgd_solve(task, model.net, horizon, budget, solve);
        methods.emplace_back("OPT", opt.allocation);
    }
    for (ash::BaselineKind kind : ash::all_baselines()) {
        if (ash::baseline_needs_target(kind) && target == nullptr) {
            continue;
        }
        methods.emplace_back(
            ash::baseline_name(kind),
            ash::baseline_allocate(kind, model.net, horizon, budget, base, target, psi_tol));
    }

    std::vector<ash::HeldoutContext> contexts;
    if (want_heldout) {
        if (events_path.empty()) {
            std::cerr << "eval: the heldout scheme needs --events\n";
            return kExitUsage;
        }
        if (interval_horizon <= 0.0) {
            interval_horizon = horizon;
        }
        const ash::EventLog heldout_log = ash::read_events(events_path, interval_horizon);
        if (auto issue = ash::validate_event_log(heldout_log, m)) {
            std::cerr << "eval: invalid events: " << *issue << "\n";
            return kExitUsage;
        }
        const auto intervals = ash::split_into_intervals(heldout_log);
        if (intervals.size() < 3) {
            std::cerr << "eval: heldout needs at least 3 cascades in --events\n";
            return kExitUsage;
        }
        ash::HeldoutOptions hopts;
        hopts.omega = model.net.omega;
        hopts.support = ash::SupportPattern::from_matrix(model.net.A, true);
        hopts.runs = static_cast<std::size_t>(runs);
        hopts.window = window;
        hopts.seed = seed;
        hopts.threads = threads;
        int skipped = 0;
        for (std::size_t k = 0; k < intervals.size(); ++k) {
            try {
                contexts.push_back(ash::heldout_fit_context(intervals, k, task, horizon, hopts));
            } catch (const ash::Error& e) {
                ++skipped;
                std::cerr << "heldout: skipping training interval " << k << ": " << e.what()
                          << "\n";
            }
        }
        if (skipped > 0) {
            std::cerr << "heldout: skipped " << skipped << " of " << intervals.size()
                      << " training intervals\n";
        }
        if (contexts.empty()) {
            std::cerr << "eval: every held-out training interval failed\n";
            return kExitNumerical;
        }
    }

    std::ofstream comparison(join_path(out_dir, "comparison.csv"), std::ios::binary);
    comparison << "method";
    if (want_theoretical) {
        comparison << ",theoretical";
    }
    if (want_simulated) {
        comparison << ",simulated";
    }
    if (want_heldout) {
        comparison << ",heldout";
    }
    comparison << "\n";
    for (std::size_t i = 0; i < methods.size(); ++i) {
        const auto& [name, delta] = methods[i];
        const VectorXd full = base + delta;
        comparison << name;
        if (want_theoretical) {
            comparison << ','
                       << ash::format_double(
                              ash::evaluate_theoretical(task, model.net, horizon, full, psi_tol));
        }
        if (want_simulated) {
            comparison << ','
                       << ash::format_double(ash::evaluate_simulated(
                              task, model.net, horizon, full, static_cast<std::size_t>(runs),
                              window, ash::derive_stream(seed, 7000 + i), threads));
        }
        if (want_heldout) {
            // Fully in-pipeline: per training interval, recompute the
            // method's allocation from that interval's fit and score it.
            double mean = 0.0;
            for (const auto& ctx : contexts) {
                ash::SolveOptions solve;
                solve.max_iterations = max_iter;
                solve.tolerance = tol;
                solve.psi_tol = psi_tol;
                VectorXd allocation;
                if (name == "OPT") {
                    solve.base_intensity = ctx.lambda_train;
                    allocation = ctx.lambda_train +
                                 ash::pgd_solve(task, ctx.net, horizon, budget, solve).allocation;
                } else {
                    const ash::BaselineKind kind = *ash::baseline_from_name(name);
                    allocation = ctx.lambda_train +
                                 ash::baseline_allocate(kind, ctx.net, horizon, budget,
                                                        ctx.lambda_train, target, psi_tol);
                }
                mean += ash::heldout_score(ctx, allocation);
            }
            comparison << ',' << ash::format_double(mean / static_cast<double>(contexts.size()));
        }
        comparison << "\n";
    }
    comparison.close();

    // Per-user expected activity profile for each method.
    std::ofstream profile(join_path(out_dir, "profile.csv"), std::ios::binary);
    profile << "user_id,mu_base";
    if (target != nullptr) {
        profile << ",target";
    }
    for (const auto& [name, delta] : methods) {
        profile << ',' << name;
    }
    profile << "\n";
    const VectorXd mu_base = ash::psi_apply(model.net, horizon, base, psi_tol);
    std::vector<VectorXd> mu_methods;
    for (const auto& [name, delta] : methods) {
        mu_methods.push_back(ash::psi_apply(model.net, horizon, VectorXd(base + delta), psi_tol));
    }
    for (Index u = 0; u < m; ++u) {
        profile << u << ',' << ash::format_double(mu_base[u]);
        if (target != nullptr) {
            profile << ',' << ash::format_double((*target)[u]);
        }
        for (const VectorXd& mu : mu_methods) {
            profile << ',' << ash::format_double(mu[u]);
        }
        profile << "\n";
    }
    profile.close();
    std::cout << "wrote " << join_path(out_dir, "comparison.csv") << " and "
              << join_path(out_dir, "profile.csv") << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "ash: steer multivariate Hawkes network activity by shaping exogenous incentives"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path,
                   "JSON config file; command-line flags override its values");

    auto* sim = app.add_subcommand("simulate", "Sample cascades from a model");
    std::string sim_model, sim_out;
    double sim_horizon = 0.0;
    long sim_runs = 1;
    std::uint64_t sim_seed = 0;
    int sim_threads = std::max(1u, std::thread::hardware_concurrency());
    std::size_t sim_cap = 10'000'000;
    sim->add_option("--model", sim_model, "Model JSON file");
    sim->add_option("--out", sim_out, "Events CSV to write");
    sim->add_option("--horizon", sim_horizon, "Cascade horizon (time units)");
    sim->add_option("--runs", sim_runs, "Number of cascades");
    sim->add_option("--seed", sim_seed, "RNG seed");
    sim->add_option("--threads", sim_threads, "Worker threads");
    sim->add_option("--cap", sim_cap, "Explosion guard: max events per cascade");

    auto* est = app.add_subcommand("estimate", "Fit a model from events by maximum likelihood");
    std::string est_events, est_out, est_grid, est_support;
    double est_horizon = 0.0, est_omega = 0.0, est_tol = 1e-6, est_l1 = 0.0;
    Index est_users = 0;
    int est_folds = 5;
    long est_max_iter = 2000;
    est->add_option("--events", est_events, "Events CSV file");
    est->add_option("--out", est_out, "Model JSON to write");
    est->add_option("--horizon", est_horizon, "Per-cascade horizon used for fitting");
    est->add_option("--users", est_users, "User count (default: max user id + 1)");
    est->add_option("--omega", est_omega, "Kernel decay rate");
    est->add_option("--omega-grid", est_grid, "Candidate omegas a,b,c for cross validation");
    est->add_option("--folds", est_folds, "Cross-validation folds");
    est->add_option("--support", est_support, "Support file row,col or 'full'");
    est->add_option("--max-iter", est_max_iter, "Max ascent iterations");
    est->add_option("--tol", est_tol, "Projected-gradient tolerance");
    est->add_option("--l1", est_l1, "l1 penalty on influence entries");

    auto* shape = app.add_subcommand("shape", "Solve for the optimal exogenous incentives");
    auto* sweep = app.add_subcommand("sweep", "Sparsity sweep over l1 weights");
    struct ShapeFlags {
        std::string model, out, costs = "uniform", base = "zero", gammas;
        TaskArgs task;
        double budget = -1.0, horizon = 0.0, tol = 1e-8, step = 0.1, psi_tol = 1e-10;
        std::uint64_t seed = 0;
        long max_iter = 2000, patience = 500;
    };
    ShapeFlags shape_flags, sweep_flags;
    for (auto [cmd, flags] : {std::pair{shape, &shape_flags}, std::pair{sweep, &sweep_flags}}) {
        cmd->add_option("--model", flags->model, "Model JSON file");
        cmd->add_option("--out", flags->out, "Output directory");
        add_task_options(cmd, flags->task);
        cmd->add_option("--budget", flags->budget, "Total budget C");
        cmd->add_option("--costs", flags->costs, "Cost vector file or 'uniform'");
        cmd->add_option("--horizon", flags->horizon, "Target time t");
        cmd->add_option("--seed", flags->seed, "Seed (used by --caps-auto)");
        cmd->add_option("--base", flags->base,
                        "'zero': solve for lambda0 itself; 'model': incentives on top of it");
        cmd->add_option("--max-iter", flags->max_iter, "Max solver iterations");
        cmd->add_option("--tol", flags->tol, "Relative objective tolerance");
        cmd->add_option("--step", flags->step, "Initial step size");
        cmd->add_option("--patience", flags->patience, "Best-iterate stall window");
        cmd->add_option("--psi-tol", flags->psi_tol, "Psi product tolerance");
    }
    sweep->add_option("--gammas", sweep_flags.gammas, "Ascending l1 weights g1,g2,...");

    auto* eval = app.add_subcommand("eval", "Compare the optimizer against baseline allocators");
    std::string eval_model, eval_out, eval_costs = "uniform",
                                      eval_schemes = "theoretical,simulated", eval_events;
    TaskArgs eval_task;
    double eval_budget = -1.0, eval_horizon = 0.0, eval_window = 0.0, eval_psi_tol = 1e-10;
    double eval_interval_horizon = 0.0, eval_tol = 1e-8;
    long eval_runs = 50, eval_max_iter = 2000;
    std::uint64_t eval_seed = 0;
    int eval_threads = std::max(1u, std::thread::hardware_concurrency());
    eval->add_option("--model", eval_model, "Model JSON file");
    eval->add_option("--out", eval_out, "Output directory");
    add_task_options(eval, eval_task);
    eval->add_option("--budget", eval_budget, "Total budget C");
    eval->add_option("--costs", eval_costs, "Cost vector file or 'uniform'");
    eval->add_option("--horizon", eval_horizon, "Target time t");
    eval->add_option("--schemes", eval_schemes, "theoretical,simulated,heldout");
    eval->add_option("--runs", eval_runs, "Simulated cascades per evaluation");
    eval->add_option("--window", eval_window, "Averaging window (default horizon/10)");
    eval->add_option("--seed", eval_seed, "RNG seed");
    eval->add_option("--events", eval_events, "Held-out intervals (one cascade each)");
    eval->add_option("--interval-horizon", eval_interval_horizon,
                     "Length of each held-out interval (default: --horizon)");
    eval->add_option("--threads", eval_threads, "Worker threads");
    eval->add_option("--max-iter", eval_max_iter, "Max solver iterations");
    eval->add_option("--tol", eval_tol, "Relative objective tolerance for the solver");
    eval->add_option("--psi-tol", eval_psi_tol, "Psi product tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (sim->parsed()) {
            return run_simulate(config_path, sim, sim_model, sim_out, sim_horizon, sim_runs,
                                sim_seed, sim_threads, sim_cap);
        }
        if (est->parsed()) {
            return run_estimate(config_path, est, est_events, est_out, est_horizon, est_users,
                                est_omega, est_grid, est_folds, est_support, est_max_iter,
                                est_tol, est_l1);
        }
        if (shape->parsed()) {
            const auto& f = shape_flags;
            return run_shape(config_path, shape, f.model, f.out, f.task, f.budget, f.costs,
                             f.horizon, f.seed, f.base, f.max_iter, f.tol, f.step, f.patience,
                             f.psi_tol, "", false);
        }
        if (sweep->parsed()) {
            const auto& f = sweep_flags;
            return run_shape(config_path, sweep, f.model, f.out, f.task, f.budget, f.costs,
                             f.horizon, f.seed, f.base, f.max_iter, f.tol, f.step, f.patience,
                             f.psi_tol, f.gammas, true);
        }
        if (eval->parsed()) {
            return run_eval(config_path, eval, eval_model, eval_out, eval_task, eval_budget,
                            eval_costs, eval_horizon, eval_schemes, eval_runs, eval_window,
                            eval_seed, eval_events, eval_interval_horizon, eval_threads,
                            eval_max_iter, eval_tol, eval_psi_tol);
        }
    } catch (const ash::Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
