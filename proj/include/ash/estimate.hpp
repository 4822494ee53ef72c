#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "ash/types.hpp"

namespace ash {

/// Free-parameter pattern for the influence matrix: sorted (row, col)
/// coordinates, row-major.
struct SupportPattern {
    Index m = 0;
    std::vector<std::pair<Index, Index>> entries;

    static SupportPattern full(Index m);
    /// Pattern of a given matrix; optionally augmented with the diagonal.
    static SupportPattern from_matrix(const SparseMatrix& a, bool add_diagonal = true);

    Index nonzeros() const { return static_cast<Index>(entries.size()); }
};

struct FitOptions {
    long max_iterations = 2000;
    /// Stop when the projected-gradient inf-norm (per-event normalized
    /// objective) falls below this.
    double gradient_tolerance = 1e-6;
    /// Secondary stop on relative objective change.
    double objective_tolerance = 1e-13;
    /// Optional l1 penalty on influence entries (sparser inferred graph).
    double l1_penalty = 0.0;
    /// Event intensities are floored here while fitting so the objective
    /// stays finite at boundary iterates.
    double intensity_floor = 1e-12;
};

struct LogLikelihoodResult {
    double value = 0.0;  // -inf when some event has zero intensity
    std::optional<std::pair<std::size_t, std::size_t>> zero_intensity_event;  // (cascade, event)
};

/// Exact exponential-kernel Hawkes log-likelihood, summed over cascades:
/// sum_i log lambda_{u_i}(t_i) - sum_u [lambda0_u T + sum_j a(u,u_j)(1-e^{-w(T-t_j)})/w].
LogLikelihoodResult log_likelihood(const HawkesNetwork& net, const VectorXd& lambda0,
                                   const EventLog& log);

struct LogLikGradient {
    VectorXd wrt_lambda0;
    VectorXd wrt_influence;  // aligned with net.A.entries()
};

/// Gradient via the standard recursive decay sums, O(events * degree).
LogLikGradient ll_gradient(const HawkesNetwork& net, const VectorXd& lambda0,
                           const EventLog& log);

struct FitResult {
    HawkesNetwork net;
    VectorXd lambda0;
    double loglik = 0.0;
    long iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;
};

/// Projected gradient ascent (Armijo backtracking, factor 0.5, c = 1e-4) on
/// the concave likelihood over lambda0 >= 0 and A >= 0 restricted to the
/// support pattern.
FitResult fit_mle(const EventLog& log, double omega, const SupportPattern& support,
                  const FitOptions& opts = {});

/// Exact per-user MLE of lambda0 with the influence matrix held fixed
/// (the per-user problems are 1-D and concave).
VectorXd fit_lambda0_given_influence(const HawkesNetwork& net, const EventLog& log);

struct SelectOmegaResult {
    double omega = 0.0;
    std::vector<double> mean_heldout;  // per grid value
    int skipped_folds = 0;
};

/// Cross-validated kernel bandwidth: folds are cascade subsets (round
/// robin); picks the grid value with the best mean held-out likelihood,
/// first index winning ties.
SelectOmegaResult select_omega(const EventLog& log, const std::vector<double>& grid, int folds,
                               const SupportPattern& support, const FitOptions& opts = {});

} // namespace ash
