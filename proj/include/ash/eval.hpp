#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ash/estimate.hpp"
#include "ash/psi.hpp"
#include "ash/shape.hpp"
#include "ash/simulate.hpp"
#include "ash/types.hpp"

namespace ash {

/// Heuristic allocators. All return a nonnegative increment on top of the
/// base exogenous intensity, spending at most the budget (Grd/LsGrd may
/// stop early).
enum class BaselineKind {
    Xmu,    // top half by current expected activity, proportional to it
    Wei,    // proportional to summed outgoing influence (column sums of A)
    Deg,    // proportional to out-degree (column counts of A)
    Prk,    // proportional to PageRank of the weighted influence graph
    Uni,    // equal split across all users
    MinMu,  // bottom half by expected activity, uniform split
    Grd,    // greedy: repeatedly fund the least active user
    Prop,   // proportional to the target profile
    LsGrd,  // greedy: close the largest (target - activity) gap
};

std::string baseline_name(BaselineKind kind);
std::optional<BaselineKind> baseline_from_name(const std::string& name);

/// All kinds in a fixed order; Prop and LsGrd require a target.
std::vector<BaselineKind> all_baselines();
bool baseline_needs_target(BaselineKind kind);

VectorXd baseline_allocate(BaselineKind kind, const HawkesNetwork& net, double t,
                           const BudgetSpec& budget, const VectorXd& base_lambda0,
                           const VectorXd* target = nullptr, double psi_tol = kDefaultExpmTol);

/// Task utility at mu = Psi(t) lam with the l1 term excluded.
double evaluate_theoretical(const ShapingTask& task, const HawkesNetwork& net, double t,
                            const VectorXd& lam, double psi_tol = kDefaultExpmTol);

/// Simulates cascades on [0, t], averages the empirical intensity, and
/// scores the task utility on the final complete window.
double evaluate_simulated(const ShapingTask& task, const HawkesNetwork& net, double t,
                          const VectorXd& lam, std::size_t runs, double window,
                          std::uint64_t seed, int threads = 1, const SimulateOptions& sim = {});

/// Fraction of index pairs ordered consistently by two rankings (1 when
/// identical, 0 when exactly reversed). Inputs must be permutations of the
/// same index set.
double rank_correlation(const std::vector<std::size_t>& order_a,
                        const std::vector<std::size_t>& order_b);

struct HeldoutOptions {
    double omega = 1.0;
    SupportPattern support;  // empty entries + m = 0: full support
    FitOptions fit;
    SolveOptions solve;
    std::size_t runs = 50;  // simulated-objective cascades per interval
    double window = 1.0;
    std::uint64_t seed = 0;
    double psi_tol = kDefaultExpmTol;
    int threads = 1;
    /// Badly fitted intervals can go supercritical; a tight cap turns a
    /// runaway simulation into a skippable error.
    SimulateOptions sim{.max_events = 1'000'000};
};

/// Everything fitted once per training interval: the network, the per-test
/// interval exogenous estimates, and their simulated objectives. Scores of
/// arbitrary allocations reuse this.
struct HeldoutContext {
    std::size_t train_index = 0;
    HawkesNetwork net;
    VectorXd lambda_train;
    std::vector<std::size_t> test_indices;
    std::vector<VectorXd> lambda_test;
    std::vector<double> simulated_objective;
};

HeldoutContext heldout_fit_context(const std::vector<EventLog>& intervals,
                                   std::size_t train_index, const ShapingTask& task, double t,
                                   const HeldoutOptions& opts);

struct HeldoutOrderings {
    std::vector<std::size_t> by_distance;   // ascending |alloc - lambda_i|
    std::vector<std::size_t> by_objective;  // descending simulated objective
};

HeldoutOrderings heldout_orderings(const HeldoutContext& ctx, const VectorXd& allocation);

double heldout_score(const HeldoutContext& ctx, const VectorXd& allocation);

struct HeldoutResult {
    double mean_score = 0.0;
    std::vector<double> scores;  // one per usable training interval
    int skipped = 0;
};

/// The full pipeline: per training interval, fit the network, estimate the
/// other intervals' exogenous intensities, solve the task, and correlate
/// the distance ordering with the simulated-objective ordering.
HeldoutResult heldout_rank_correlation(const std::vector<EventLog>& intervals,
                                       const ShapingTask& task, const BudgetSpec& budget,
                                       double t, const HeldoutOptions& opts,
                                       std::vector<HeldoutContext>* contexts = nullptr);

} // namespace ash
