#pragma once

#include <string>
#include <vector>

#include "ash/psi.hpp"
#include "ash/types.hpp"

namespace ash {

/// Allocations below this count as zero in reports (projection leaves
/// numerical dust).
constexpr double kNonzeroThreshold = 1e-9;

enum class StepPolicy {
    Auto,          // backtracking for smooth tasks, diminishing otherwise
    Backtracking,  // Armijo line search (smooth objectives)
    Diminishing,   // s0 / sqrt(k) with best-iterate tracking (subgradients)
    Fixed,
};

struct SolveOptions {
    long max_iterations = 2000;
    /// Relative objective-change stopping tolerance.
    double tolerance = 1e-8;
    StepPolicy step_policy = StepPolicy::Auto;
    /// Initial step (first Armijo trial, or s0 of the diminishing schedule).
    double initial_step = 0.1;
    /// Diminishing policy stops once the best value stalls this long.
    long patience = 500;
    /// Starting point; projected first. Empty: uniform budget split.
    VectorXd initial;
    /// Optional fixed exogenous base: the objective is evaluated at
    /// mu = Psi(t) (base + lambda) and lambda is the purchased increment.
    VectorXd base_intensity;
    double psi_tol = kDefaultExpmTol;
};

struct SolveReport {
    VectorXd allocation;
    std::vector<double> trace;  // accepted objective values (incl. l1 term)
    long iterations = 0;
    bool converged = false;
    double objective = 0.0;
    double budget_consumed = 0.0;
    Index nonzeros = 0;
};

/// Euclidean projection onto { x >= 0, costs . x <= total }, exact via the
/// breakpoint walk of the KKT scalar.
VectorXd project_feasible(const VectorXd& lam, const VectorXd& costs, double total);

/// Task utility at an expected-intensity vector (no l1 term).
double task_utility(const ShapingTask& task, const VectorXd& mu);

struct ObjectiveGradient {
    double value = 0.0;  // utility - gamma * sum(lambda)
    VectorXd gradient;   // ascent (sub)gradient, including the -gamma term
    VectorXd mu;         // Psi(t) (base + lambda)
};

/// Objective value and ascent gradient. All four gradients are one
/// Psi product and one transposed Psi product (matrix-free).
ObjectiveGradient objective_and_gradient(const ShapingTask& task, const HawkesNetwork& net,
                                         double t, const VectorXd& lam,
                                         double tol = kDefaultExpmTol,
                                         const VectorXd& base = VectorXd());

/// Objective value only (one Psi product).
double objective_value(const ShapingTask& task, const HawkesNetwork& net, double t,
                       const VectorXd& lam, double tol = kDefaultExpmTol,
                       const VectorXd& base = VectorXd());

/// Projected gradient ascent over the budget polytope. Smooth tasks use
/// Armijo backtracking (monotone trace); the nonsmooth ones use diminishing
/// steps with best-iterate tracking. Never throws on slow progress; the
/// report carries a converged flag.
SolveReport pgd_solve(const ShapingTask& task, const HawkesNetwork& net, double t,
                      const BudgetSpec& budget, const SolveOptions& opts = {});

struct SweepRow {
    double gamma = 0.0;
    Index nonzeros = 0;
    double budget_consumed = 0.0;
    double utility = 0.0;  // at gamma = 0, the reported table objective
    bool converged = false;
    bool failed = false;
    std::string error;
};

/// One pgd_solve per gamma (ascending), warm-started along the path.
std::vector<SweepRow> sparsity_sweep(const ShapingTask& task, const HawkesNetwork& net, double t,
                                     const BudgetSpec& budget, const std::vector<double>& gammas,
                                     const SolveOptions& opts = {});

} // namespace ash
