#include "ash/shape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ash {

namespace {

constexpr double kArmijoC = 1e-4;
constexpr double kMinStep = 1e-16;
constexpr double kHomLogFloor = 1e-12;

void check_inputs(const ShapingTask& task, const HawkesNetwork& net, const VectorXd& lam,
                  const VectorXd& base) {
    if (auto msg = validate_task(task, net.m)) {
        throw std::invalid_argument("invalid task: " + *msg);
    }
    if (lam.size() != net.m) {
        throw std::invalid_argument("intensity length does not match user count");
    }
    if (base.size() != 0 && base.size() != net.m) {
        throw std::invalid_argument("base intensity length does not match user count");
    }
}

VectorXd effective_intensity(const VectorXd& lam, const VectorXd& base) {
    return base.size() == 0 ? lam : VectorXd(base + lam);
}

} // namespace

VectorXd project_feasible(const VectorXd& lam, const VectorXd& costs, double total) {
    if (costs.size() != lam.size()) {
        throw std::invalid_argument("cost vector length mismatch");
    }
    VectorXd x = lam.cwiseMax(0.0);
    const double spent = costs.dot(x);
    if (spent <= total) {
        return x;
    }
    // Budget active: x_i(tau) = max(0, lam_i - tau c_i) with the unique
    // tau > 0 solving costs . x(tau) = total. Walk the breakpoints
    // lam_i / c_i downward, keeping the active sums.
    const Index n = lam.size();
    std::vector<Index> order;
    order.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        if (lam[i] > 0.0) {
            order.push_back(i);
        }
    }
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        return lam[a] / costs[a] > lam[b] / costs[b];
    });
    double active_cl = 0.0;  // sum of c_i lam_i over the active set
    double active_cc = 0.0;  // sum of c_i^2
    double tau = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const Index i = order[k];
        active_cl += costs[i] * lam[i];
        active_cc += costs[i] * costs[i];
        const double candidate = (active_cl - total) / active_cc;
        const double lower =
            k + 1 < order.size() ? lam[order[k + 1]] / costs[order[k + 1]] : 0.0;
        if (candidate >= lower - 1e-300 && candidate <= lam[i] / costs[i]) {
            tau = candidate;
            break;
        }
    }
    x = (lam.array() - tau * costs.array()).cwiseMax(0.0).matrix();
    // One Newton correction keeps the budget exact to rounding.
    double cc = 0.0;
    for (Index i = 0; i < n; ++i) {
        if (x[i] > 0.0) {
            cc += costs[i] * costs[i];
        }
    }
    if (cc > 0.0) {
        const double miss = costs.dot(x) - total;
        if (std::abs(miss) > 1e-14 * total) {
            tau += miss / cc;
            x = (lam.array() - tau * costs.array()).cwiseMax(0.0).matrix();
        }
    }
    return x;
}

double task_utility(const ShapingTask& task, const VectorXd& mu) {
    switch (task.kind) {
        case TaskKind::CappedActivityMax:
            return mu.cwiseMin(task.caps).sum();
        case TaskKind::MinimaxShaping:
            return mu.minCoeff();
        case TaskKind::LeastSquaresShaping: {
            const VectorXd r = task.weights.multiply(mu) - task.target;
            return -r.squaredNorm();
        }
        case TaskKind::Homogenization: {
            double u = 0.0;
            for (Index i = 0; i < mu.size(); ++i) {
                if (mu[i] > 0.0) {
                    u -= mu[i] * std::log(mu[i]);
                }
            }
            return u;
        }
    }
    throw std::logic_error("unknown task kind");
}

namespace {

ObjectiveGradient objective_at_mu(const ShapingTask& task, const HawkesNetwork& net, double t,
                                  const VectorXd& lam, double tol, VectorXd mu) {
    ObjectiveGradient out;
    out.mu = std::move(mu);
    switch (task.kind) {
        case TaskKind::CappedActivityMax: {
            VectorXd indicator = VectorXd::Zero(net.m);
            for (Index i = 0; i < net.m; ++i) {
                if (task.caps[i] > out.mu[i]) {
                    indicator[i] = 1.0;
                }
            }
            out.gradient = psi_transpose_apply(net, t, indicator, tol);
            break;
        }
        case TaskKind::MinimaxShaping: {
            // Uniform weight over the argmin set is a valid subgradient and
            // keeps the routine deterministic.
            const double lo = out.mu.minCoeff();
            const double tie = 1e-12 * std::max(1.0, std::abs(lo));
            VectorXd weights = VectorXd::Zero(net.m);
            Index hits = 0;
            for (Index i = 0; i < net.m; ++i) {
                if (out.mu[i] <= lo + tie) {
                    weights[i] = 1.0;
                    ++hits;
                }
            }
            weights /= static_cast<double>(hits);
            out.gradient = psi_transpose_apply(net, t, weights, tol);
            break;
        }
        case TaskKind::LeastSquaresShaping: {
            const VectorXd residual = task.weights.multiply(out.mu) - task.target;
            const VectorXd back = task.weights.multiply_transpose(residual);
            out.gradient = -2.0 * psi_transpose_apply(net, t, back, tol);
            break;
        }
        case TaskKind::Homogenization: {
            VectorXd logs(net.m);
            for (Index i = 0; i < net.m; ++i) {
                logs[i] = std::log(std::max(out.mu[i], kHomLogFloor)) + 1.0;
            }
            out.gradient = -psi_transpose_apply(net, t, logs, tol);
            break;
        }
    }
    out.value = task_utility(task, out.mu) - task.gamma * lam.sum();
    out.gradient.array() -= task.gamma;
    return out;
}

} // namespace

ObjectiveGradient objective_and_gradient(const ShapingTask& task, const HawkesNetwork& net,
                                         double t, const VectorXd& lam, double tol,
                                         const VectorXd& base) {
    check_inputs(task, net, lam, base);
    VectorXd mu = psi_apply(net, t, effective_intensity(lam, base), tol);
    return objective_at_mu(task, net, t, lam, tol, std::move(mu));
}

double objective_value(const ShapingTask& task, const HawkesNetwork& net, double t,
                       const VectorXd& lam, double tol, const VectorXd& base) {
    check_inputs(task, net, lam, base);
    const VectorXd mu = psi_apply(net, t, effective_intensity(lam, base), tol);
    return task_utility(task, mu) - task.gamma * lam.sum();
}

SolveReport pgd_solve(const ShapingTask& task, const HawkesNetwork& net, double t,
                      const BudgetSpec& budget, const SolveOptions& opts) {
    if (auto msg = validate_budget(budget, net.m)) {
        throw std::invalid_argument("invalid budget: " + *msg);
    }
    StepPolicy policy = opts.step_policy;
    if (policy == StepPolicy::Auto) {
        const bool smooth = task.kind == TaskKind::LeastSquaresShaping ||
                            task.kind == TaskKind::Homogenization;
        policy = smooth ? StepPolicy::Backtracking : StepPolicy::Diminishing;
    }

    VectorXd lam;
    if (opts.initial.size() != 0) {
        lam = project_feasible(opts.initial, budget.costs, budget.total);
    } else {
        VectorXd uniform =
            (budget.total / static_cast<double>(net.m)) * budget.costs.cwiseInverse();
        lam = project_feasible(uniform, budget.costs, budget.total);
    }

    ObjectiveGradient cur =
        objective_and_gradient(task, net, t, lam, opts.psi_tol, opts.base_intensity);

    SolveReport report;
    report.trace.push_back(cur.value);
    VectorXd best = lam;
    double best_value = cur.value;
    long last_improvement = 0;
    double step = opts.initial_step;

    long k = 1;
    for (; k <= opts.max_iterations; ++k) {
        if (policy == StepPolicy::Backtracking) {
            step = std::min(step * 2.0, 1e12);
            bool accepted = false;
            VectorXd cand;
            double cand_value = 0.0;
            while (step >= kMinStep) {
                cand = project_feasible(lam + step * cur.gradient, budget.costs, budget.total);
                cand_value =
                    objective_value(task, net, t, cand, opts.psi_tol, opts.base_intensity);
                const double predicted = cur.gradient.dot(cand - lam);
                if (cand_value >= cur.value + kArmijoC * predicted && predicted >= 0.0) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) {
                report.converged = true;  // stationary at float resolution
                break;
            }
            const double previous = cur.value;
            lam.swap(cand);
            cur = objective_and_gradient(task, net, t, lam, opts.psi_tol, opts.base_intensity);
            report.trace.push_back(cur.value);
            best = lam;
            best_value = cur.value;
            if (std::abs(cur.value - previous) <=
                opts.tolerance * std::max(1.0, std::abs(cur.value))) {
                report.converged = true;
                break;
            }
        } else {
            double s = opts.initial_step;
            if (policy == StepPolicy::Diminishing) {
                // Normalized subgradient steps with epoch-halved lengths:
                // the iterates reach an O(step) neighborhood of the optimum
                // within an epoch, so the final accuracy is the last epoch's
                // step length rather than the O(1/sqrt(K)) schedule tail.
                const double norm = cur.gradient.norm();
                if (norm == 0.0) {
                    report.converged = true;
                    break;
                }
                const long epoch = std::max<long>(50, opts.max_iterations / 24);
                s = opts.initial_step * std::pow(0.5, static_cast<double>(k / epoch)) / norm;
            }
            lam = project_feasible(lam + s * cur.gradient, budget.costs, budget.total);
            cur = objective_and_gradient(task, net, t, lam, opts.psi_tol, opts.base_intensity);
            report.trace.push_back(cur.value);
            if (cur.value > best_value + opts.tolerance * std::max(1.0, std::abs(best_value))) {
                best_value = cur.value;
                best = lam;
                last_improvement = k;
            } else if (cur.value > best_value) {
                best_value = cur.value;
                best = lam;
            }
            if (k - last_improvement >= opts.patience) {
                report.converged = true;
                break;
            }
        }
    }
    report.iterations = std::min(k, opts.max_iterations);
    report.allocation = best;
    report.objective = best_value;
    report.budget_consumed = budget.costs.dot(best);
    report.nonzeros = (best.array() > kNonzeroThreshold).count();
    return report;
}

std::vector<SweepRow> sparsity_sweep(const ShapingTask& task, const HawkesNetwork& net, double t,
                                     const BudgetSpec& budget, const std::vector<double>& gammas,
                                     const SolveOptions& opts) {
    if (!std::is_sorted(gammas.begin(), gammas.end())) {
        throw std::invalid_argument("gamma list must be ascending");
    }
    std::vector<SweepRow> rows;
    rows.reserve(gammas.size());
    SolveOptions row_opts = opts;
    for (double gamma : gammas) {
        SweepRow row;
        row.gamma = gamma;
        try {
            const SolveReport report =
                pgd_solve(task.with_gamma(gamma), net, t, budget, row_opts);
            row.nonzeros = report.nonzeros;
            row.budget_consumed = report.budget_consumed;
            row.utility = objective_value(task.with_gamma(0.0), net, t, report.allocation,
                                          opts.psi_tol, opts.base_intensity);
            row.converged = report.converged;
            row_opts.initial = report.allocation;  // warm start along the path
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace ash
