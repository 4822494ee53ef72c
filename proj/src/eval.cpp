#include "ash/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "ash/rng.hpp"
#include "ash/simulate.hpp"

namespace ash {

namespace {

/// Indices of the k extreme users by score; ties resolve by user index.
std::vector<Index> select_extreme(const VectorXd& scores, Index k, bool largest) {
    std::vector<Index> order(static_cast<std::size_t>(scores.size()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        if (scores[a] != scores[b]) {
            return largest ? scores[a] > scores[b] : scores[a] < scores[b];
        }
        return a < b;
    });
    order.resize(static_cast<std::size_t>(std::max<Index>(k, 0)));
    return order;
}

/// Spends the whole budget on `selected`, proportional to their scores;
/// falls back to a uniform split when every score is zero.
VectorXd proportional_split(const std::vector<Index>& selected, const VectorXd& scores,
                            const BudgetSpec& budget) {
    VectorXd delta = VectorXd::Zero(budget.costs.size());
    if (selected.empty()) {
        return delta;
    }
    double weighted_cost = 0.0;
    for (Index i : selected) {
        weighted_cost += budget.costs[i] * scores[i];
    }
    if (weighted_cost > 0.0) {
        const double k = budget.total / weighted_cost;
        for (Index i : selected) {
            delta[i] = k * scores[i];
        }
        return delta;
    }
    double cost_sum = 0.0;
    for (Index i : selected) {
        cost_sum += budget.costs[i];
    }
    for (Index i : selected) {
        delta[i] = budget.total / cost_sum;
    }
    return delta;
}

VectorXd pagerank(const SparseMatrix& a, double damping, double tol) {
    const Index m = a.cols();
    const VectorXd col_sums = a.column_sums();
    VectorXd p = VectorXd::Constant(m, 1.0 / static_cast<double>(m));
    VectorXd scaled(m), next(m);
    for (long iter = 0; iter < 100000; ++iter) {
        double dangling = 0.0;
        for (Index i = 0; i < m; ++i) {
            if (col_sums[i] > 0.0) {
                scaled[i] = p[i] / col_sums[i];
            } else {
                scaled[i] = 0.0;
                dangling += p[i];
            }
        }
        a.multiply(scaled, next);
        next *= damping;
        next.array() += (1.0 - damping + damping * dangling) / static_cast<double>(m);
        const double change = (next - p).lpNorm<1>();
        p.swap(next);
        if (change <= tol) {
            break;
        }
    }
    return p;
}

/// Expected-intensity columns Psi(t) e_u, computed lazily for the greedy
/// allocators (adding x to user u shifts mu by x * column(u)).
class PsiColumnCache {
public:
    PsiColumnCache(const HawkesNetwork& net, double t, double tol)
        : net_(net), t_(t), tol_(tol) {}

    const VectorXd& column(Index u) {
        auto it = columns_.find(u);
        if (it == columns_.end()) {
            VectorXd unit = VectorXd::Zero(net_.m);
            unit[u] = 1.0;
            it = columns_.emplace(u, psi_apply(net_, t_, unit, tol_)).first;
        }
        return it->second;
    }

private:
    const HawkesNetwork& net_;
    double t_;
    double tol_;
    std::map<Index, VectorXd> columns_;
};

Index argmin_with_index_ties(const VectorXd& v) {
    Index best = 0;
    for (Index i = 1; i < v.size(); ++i) {
        if (v[i] < v[best]) {
            best = i;
        }
    }
    return best;
}

} // namespace

std::string baseline_name(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::Xmu: return "XMU";
        case BaselineKind::Wei: return "WEI";
        case BaselineKind::Deg: return "DEG";
        case BaselineKind::Prk: return "PRK";
        case BaselineKind::Uni: return "UNI";
        case BaselineKind::MinMu: return "MINMU";
        case BaselineKind::Grd: return "GRD";
        case BaselineKind::Prop: return "PROP";
        case BaselineKind::LsGrd: return "LSGRD";
    }
    return "?";
}

std::optional<BaselineKind> baseline_from_name(const std::string& name) {
    for (BaselineKind kind : all_baselines()) {
        if (baseline_name(kind) == name) {
            return kind;
        }
    }
    return std::nullopt;
}

std::vector<BaselineKind> all_baselines() {
    return {BaselineKind::Xmu, BaselineKind::Wei,   BaselineKind::Deg,
            BaselineKind::Prk, BaselineKind::Uni,   BaselineKind::MinMu,
            BaselineKind::Grd, BaselineKind::Prop,  BaselineKind::LsGrd};
}

bool baseline_needs_target(BaselineKind kind) {
    return kind == BaselineKind::Prop || kind == BaselineKind::LsGrd;
}

VectorXd baseline_allocate(BaselineKind kind, const HawkesNetwork& net, double t,
                           const BudgetSpec& budget, const VectorXd& base_lambda0,
                           const VectorXd* target, double psi_tol) {
    if (auto msg = validate_budget(budget, net.m)) {
        throw std::invalid_argument("invalid budget: " + *msg);
    }
    if (base_lambda0.size() != net.m) {
        throw std::invalid_argument("base intensity length does not match user count");
    }
    if (baseline_needs_target(kind)) {
        if (target == nullptr || target->size() != net.m) {
            throw MissingTargetError(baseline_name(kind) + " requires a target profile");
        }
    }
    const Index m = net.m;
    const Index half = m / 2;

    switch (kind) {
        case BaselineKind::Xmu: {
            const VectorXd mu = psi_apply(net, t, base_lambda0, psi_tol);
            return proportional_split(select_extreme(mu, half, /*largest=*/true), mu, budget);
        }
        case BaselineKind::Wei: {
            const VectorXd weights = net.A.column_sums();
            std::vector<Index> all(static_cast<std::size_t>(m));
            std::iota(all.begin(), all.end(), 0);
            return proportional_split(all, weights, budget);
        }
        case BaselineKind::Deg: {
            // Out-degree counts actual edges, not stored zeros (fitted
            // models may carry an explicit zero for every support entry).
            VectorXd degrees = VectorXd::Zero(m);
            for (const Triplet& e : net.A.entries()) {
                if (e.value > kNonzeroThreshold) {
                    degrees[e.col] += 1.0;
                }
            }
            std::vector<Index> all(static_cast<std::size_t>(m));
            std::iota(all.begin(), all.end(), 0);
            return proportional_split(all, degrees, budget);
        }
        case BaselineKind::Prk: {
            const VectorXd scores = pagerank(net.A, 0.85, 1e-10);
            std::vector<Index> all(static_cast<std::size_t>(m));
            std::iota(all.begin(), all.end(), 0);
            return proportional_split(all, scores, budget);
        }
        case BaselineKind::Uni: {
            std::vector<Index> all(static_cast<std::size_t>(m));
            std::iota(all.begin(), all.end(), 0);
            return proportional_split(all, VectorXd::Ones(m), budget);
        }
        case BaselineKind::MinMu: {
            const VectorXd mu = psi_apply(net, t, base_lambda0, psi_tol);
            return proportional_split(select_extreme(mu, half, /*largest=*/false),
                                      VectorXd::Ones(m), budget);
        }
        case BaselineKind::Grd: {
            // Fund the current least active user one budget quantum at a
            // time until half the users have been touched or the budget is
            // gone, refreshing mu after every grant.
            VectorXd delta = VectorXd::Zero(m);
            if (half == 0) {
                return delta;
            }
            PsiColumnCache cache(net, t, psi_tol);
            VectorXd mu = psi_apply(net, t, base_lambda0, psi_tol);
            const double quantum = budget.total / (10.0 * static_cast<double>(m));
            double spent = 0.0;
            std::vector<bool> touched(static_cast<std::size_t>(m), false);
            Index touched_count = 0;
            while (spent < budget.total - 1e-15 * budget.total) {
                const Index u = argmin_with_index_ties(mu);
                const double grant = std::min(quantum, budget.total - spent);
                const double amount = grant / budget.costs[u];
                delta[u] += amount;
                mu += amount * cache.column(u);
                spent += grant;
                if (!touched[static_cast<std::size_t>(u)]) {
                    touched[static_cast<std::size_t>(u)] = true;
                    ++touched_count;
                    if (touched_count >= half) {
                        break;
                    }
                }
            }
            return delta;
        }
        case BaselineKind::Prop: {
            std::vector<Index> all(static_cast<std::size_t>(m));
            std::iota(all.begin(), all.end(), 0);
            return proportional_split(all, *target, budget);
        }
        case BaselineKind::LsGrd: {
            // Close the largest target gap outright, then move to the next.
            VectorXd delta = VectorXd::Zero(m);
            PsiColumnCache cache(net, t, psi_tol);
            VectorXd mu = psi_apply(net, t, base_lambda0, psi_tol);
            double remaining = budget.total;
            for (Index round = 0; round < m; ++round) {
                Index best = -1;
                double best_gap = 0.0;
                for (Index i = 0; i < m; ++i) {
                    const double gap = (*target)[i] - mu[i];
                    if (gap > best_gap) {
                        best_gap = gap;
                        best = i;
                    }
                }
                if (best < 0 || remaining <= 1e-15 * budget.total) {
                    break;
                }
                const double self_effect = cache.column(best)[best];
                double amount = best_gap / self_effect;
                amount = std::min(amount, remaining / budget.costs[best]);
                delta[best] += amount;
                mu += amount * cache.column(best);
                remaining -= amount * budget.costs[best];
            }
            return delta;
        }
    }
    throw std::invalid_argument("unknown baseline kind");
}

double evaluate_theoretical(const ShapingTask& task, const HawkesNetwork& net, double t,
                            const VectorXd& lam, double psi_tol) {
    return objective_value(task.with_gamma(0.0), net, t, lam, psi_tol);
}

double evaluate_simulated(const ShapingTask& task, const HawkesNetwork& net, double t,
                          const VectorXd& lam, std::size_t runs, double window,
                          std::uint64_t seed, int threads, const SimulateOptions& sim) {
    if (runs < 1) {
        throw std::invalid_argument("need at least one simulation run");
    }
    const EventLog log = simulate_cascades(net, lam, t, runs, seed, threads, sim);
    const IntensityCurve curve = empirical_intensity(log, net.m, window, t);
    return task_utility(task, curve.values.col(curve.windows() - 1));
}

double rank_correlation(const std::vector<std::size_t>& order_a,
                        const std::vector<std::size_t>& order_b) {
    const std::size_t n = order_a.size();
    if (n != order_b.size() || n < 2) {
        throw LengthMismatchError("rankings must have equal length >= 2");
    }
    std::vector<std::size_t> sorted_a = order_a;
    std::vector<std::size_t> sorted_b = order_b;
    std::sort(sorted_a.begin(), sorted_a.end());
    std::sort(sorted_b.begin(), sorted_b.end());
    if (sorted_a != sorted_b ||
        std::adjacent_find(sorted_a.begin(), sorted_a.end()) != sorted_a.end()) {
        throw LengthMismatchError("rankings must be permutations of the same index set");
    }
    std::map<std::size_t, std::size_t> pos_b;
    for (std::size_t i = 0; i < n; ++i) {
        pos_b[order_b[i]] = i;
    }
    std::size_t concordant = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (pos_b[order_a[i]] < pos_b[order_a[j]]) {
                ++concordant;
            }
        }
    }
    return static_cast<double>(concordant) / (static_cast<double>(n) * (n - 1) / 2.0);
}

HeldoutContext heldout_fit_context(const std::vector<EventLog>& intervals,
                                   std::size_t train_index, const ShapingTask& task, double t,
                                   const HeldoutOptions& opts) {
    if (train_index >= intervals.size()) {
        throw std::invalid_argument("training interval out of range");
    }
    SupportPattern support = opts.support;
    HeldoutContext ctx;
    ctx.train_index = train_index;
    if (support.m == 0) {
        throw std::invalid_argument("held-out options must declare the support (or full(m))");
    }
    FitResult fit = fit_mle(intervals[train_index], opts.omega, support, opts.fit);
    ctx.net = std::move(fit.net);
    ctx.lambda_train = std::move(fit.lambda0);
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        if (i == train_index) {
            continue;
        }
        ctx.test_indices.push_back(i);
        ctx.lambda_test.push_back(fit_lambda0_given_influence(ctx.net, intervals[i]));
        ctx.simulated_objective.push_back(
            evaluate_simulated(task, ctx.net, t, ctx.lambda_test.back(), opts.runs, opts.window,
                               derive_stream(opts.seed, 1000003 * (train_index + 1) + i),
                               opts.threads, opts.sim));
    }
    return ctx;
}

HeldoutOrderings heldout_orderings(const HeldoutContext& ctx, const VectorXd& allocation) {
    const std::size_t n = ctx.test_indices.size();
    std::vector<double> distance(n);
    for (std::size_t i = 0; i < n; ++i) {
        distance[i] = (allocation - ctx.lambda_test[i]).norm();
    }
    std::vector<std::size_t> by_distance(n), by_objective(n);
    std::iota(by_distance.begin(), by_distance.end(), 0);
    std::iota(by_objective.begin(), by_objective.end(), 0);
    // Ties break by interval index so the orderings are deterministic.
    std::sort(by_distance.begin(), by_distance.end(), [&](std::size_t a, std::size_t b) {
        if (distance[a] != distance[b]) {
            return distance[a] < distance[b];
        }
        return ctx.test_indices[a] < ctx.test_indices[b];
    });
    std::sort(by_objective.begin(), by_objective.end(), [&](std::size_t a, std::size_t b) {
        if (ctx.simulated_objective[a] != ctx.simulated_objective[b]) {
            return ctx.simulated_objective[a] > ctx.simulated_objective[b];
        }
        return ctx.test_indices[a] < ctx.test_indices[b];
    });
    HeldoutOrderings out;
    out.by_distance.reserve(n);
    out.by_objective.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.by_distance.push_back(ctx.test_indices[by_distance[i]]);
        out.by_objective.push_back(ctx.test_indices[by_objective[i]]);
    }
    return out;
}

double heldout_score(const HeldoutContext& ctx, const VectorXd& allocation) {
    const HeldoutOrderings orderings = heldout_orderings(ctx, allocation);
    return rank_correlation(orderings.by_distance, orderings.by_objective);
}

HeldoutResult heldout_rank_correlation(const std::vector<EventLog>& intervals,
                                       const ShapingTask& task, const BudgetSpec& budget,
                                       double t, const HeldoutOptions& opts,
                                       std::vector<HeldoutContext>* contexts) {
    if (intervals.size() < 3) {
        throw std::invalid_argument("held-out evaluation needs at least 3 intervals");
    }
    HeldoutResult result;
    for (std::size_t k = 0; k < intervals.size(); ++k) {
        try {
            HeldoutContext ctx = heldout_fit_context(intervals, k, task, t, opts);
            const SolveReport solved = pgd_solve(task, ctx.net, t, budget, opts.solve);
            result.scores.push_back(heldout_score(ctx, solved.allocation));
            if (contexts != nullptr) {
                contexts->push_back(std::move(ctx));
            }
        } catch (const Error&) {
            ++result.skipped;
        }
    }
    if (result.scores.empty()) {
        throw NoConvergenceError("every held-out training interval failed",
                                 static_cast<long>(intervals.size()), 0.0);
    }
    result.mean_score = std::accumulate(result.scores.begin(), result.scores.end(), 0.0) /
                        static_cast<double>(result.scores.size());
    return result;
}

} // namespace ash
