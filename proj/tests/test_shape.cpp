#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "ash/psi.hpp"
#include "ash/rng.hpp"
#include "ash/shape.hpp"
#include "helpers.hpp"

using namespace ash;

namespace {

/// Active-set enumeration oracle for the projection: tries every support
/// set and keeps the KKT-consistent candidate.
VectorXd projection_oracle(const VectorXd& lam, const VectorXd& costs, double total) {
    const Index n = lam.size();
    VectorXd clamp = lam.cwiseMax(0.0);
    if (costs.dot(clamp) <= total) {
        return clamp;
    }
    VectorXd best = VectorXd::Zero(n);
    double best_dist = (lam - best).squaredNorm();
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        double cl = 0.0, cc = 0.0;
        for (Index i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                cl += costs[i] * lam[i];
                cc += costs[i] * costs[i];
            }
        }
        const double tau = (cl - total) / cc;
        if (tau < 0.0) {
            continue;
        }
        VectorXd x = VectorXd::Zero(n);
        bool ok = true;
        for (Index i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                x[i] = lam[i] - tau * costs[i];
                ok = ok && x[i] >= -1e-12;
            } else {
                ok = ok && lam[i] - tau * costs[i] <= 1e-12;
            }
        }
        if (!ok) {
            continue;
        }
        const double dist = (lam - x).squaredNorm();
        if (dist < best_dist) {
            best_dist = dist;
            best = x;
        }
    }
    return best;
}

} // namespace

TEST_CASE("projection leaves feasible points untouched") {
    const VectorXd lam = (VectorXd(2) << 0.1, 0.1).finished();
    const VectorXd got = project_feasible(lam, VectorXd::Ones(2), 0.5);
    CHECK((got - lam).norm() == 0.0);
}

TEST_CASE("projection scales onto the budget facet") {
    const VectorXd lam = (VectorXd(2) << 1.0, 1.0).finished();
    const VectorXd got = project_feasible(lam, VectorXd::Ones(2), 0.5);
    CHECK(got[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(got[1] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("projection clamps negatives when the budget is slack") {
    const VectorXd lam = (VectorXd(2) << -1.0, 2.0).finished();
    const VectorXd got = project_feasible(lam, VectorXd::Ones(2), 5.0);
    CHECK(got[0] == 0.0);
    CHECK(got[1] == doctest::Approx(2.0));
}

TEST_CASE("projection matches the active-set oracle on random instances") {
    Rng rng(111);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 1 + static_cast<Index>(rng.next_below(6));
        const VectorXd lam = testing::random_vector(rng, n, -1.0, 2.0);
        const VectorXd costs = testing::random_vector(rng, n, 0.2, 3.0);
        const double total = rng.uniform(0.1, 2.0);
        const VectorXd got = project_feasible(lam, costs, total);
        const VectorXd want = projection_oracle(lam, costs, total);
        CHECK((got - want).lpNorm<Eigen::Infinity>() < 1e-8);
        CHECK((got.array() >= 0.0).all());
        CHECK(costs.dot(got) <= total * (1.0 + 1e-12));
        if (costs.dot(lam.cwiseMax(0.0)) > total) {
            CHECK(std::abs(costs.dot(got) - total) <= 1e-12 * total);
        }
    }
}

TEST_CASE("capped utility at the caps has an empty ascent set") {
    const HawkesNetwork net{2, SparseMatrix(2, 2, {}), 1.0};
    const VectorXd caps = (VectorXd(2) << 0.4, 0.7).finished();
    const ShapingTask task = ShapingTask::capped_activity_max(caps);
    const auto og = objective_and_gradient(task, net, 1.0, caps);
    CHECK(og.value == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(og.gradient.norm() == 0.0);  // gamma = 0 and mu == caps
}

TEST_CASE("least-squares objective vanishes at an exact fit") {
    Rng rng(121);
    const HawkesNetwork net = testing::make_random_network(rng, 3, 2.0, 1.0, 0.5);
    const VectorXd lam = testing::random_vector(rng, 3, 0.2, 0.8);
    const VectorXd target = psi_apply(net, 1.5, lam, 1e-13);
    const ShapingTask task = ShapingTask::least_squares(SparseMatrix::identity(3), target);
    const auto og = objective_and_gradient(task, net, 1.5, lam, 1e-13);
    CHECK(std::abs(og.value) < 1e-12);
    CHECK(og.gradient.lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("minimax subgradient averages the argmin set") {
    const HawkesNetwork net{2, SparseMatrix(2, 2, {}), 1.0};
    const ShapingTask task = ShapingTask::minimax();
    const auto og = objective_and_gradient(task, net, 1.0, VectorXd::Ones(2));
    CHECK(og.value == doctest::Approx(1.0));
    CHECK(og.gradient[0] == doctest::Approx(0.5));
    CHECK(og.gradient[1] == doctest::Approx(0.5));
}

TEST_CASE("least-squares gradient matches finite differences") {
    Rng rng(131);
    for (int trial = 0; trial < 5; ++trial) {
        const Index m = 2 + static_cast<Index>(rng.next_below(3));
        const HawkesNetwork net = testing::make_random_network(rng, m, 2.0, 1.0, 0.6);
        SparseMatrix b = SparseMatrix::identity(m);
        const VectorXd target = testing::random_vector(rng, m, 0.5, 1.5);
        const ShapingTask task =
            ShapingTask::least_squares(std::move(b), target, rng.uniform(0.0, 0.2));
        const VectorXd lam = testing::random_vector(rng, m, 0.3, 1.0);
        const double t = rng.uniform(0.5, 2.0);
        const auto og = objective_and_gradient(task, net, t, lam, 1e-13);
        const double h = 1e-6;
        for (Index i = 0; i < m; ++i) {
            VectorXd up = lam, dn = lam;
            up[i] += h;
            dn[i] -= h;
            const double fd = (objective_value(task, net, t, up, 1e-13) -
                               objective_value(task, net, t, dn, 1e-13)) /
                              (2.0 * h);
            CHECK(og.gradient[i] == doctest::Approx(fd).epsilon(1e-5).scale(std::abs(fd) + 1.0));
        }
    }
}

TEST_CASE("homogenization gradient matches finite differences at interior points") {
    Rng rng(141);
    for (int trial = 0; trial < 5; ++trial) {
        const Index m = 2 + static_cast<Index>(rng.next_below(3));
        const HawkesNetwork net = testing::make_random_network(rng, m, 2.0, 1.0, 0.6);
        const ShapingTask task = ShapingTask::homogenization(rng.uniform(0.0, 0.1));
        const VectorXd lam = testing::random_vector(rng, m, 0.3, 1.0);
        const double t = rng.uniform(0.5, 2.0);
        const auto og = objective_and_gradient(task, net, t, lam, 1e-13);
        const double h = 1e-6;
        for (Index i = 0; i < m; ++i) {
            VectorXd up = lam, dn = lam;
            up[i] += h;
            dn[i] -= h;
            const double fd = (objective_value(task, net, t, up, 1e-13) -
                               objective_value(task, net, t, dn, 1e-13)) /
                              (2.0 * h);
            CHECK(og.gradient[i] == doctest::Approx(fd).epsilon(1e-5).scale(std::abs(fd) + 1.0));
        }
    }
}

TEST_CASE("homogenization handles zero intensity by convention") {
    const HawkesNetwork net{2, SparseMatrix(2, 2, {}), 1.0};
    const ShapingTask task = ShapingTask::homogenization();
    CHECK(objective_value(task, net, 1.0, VectorXd::Zero(2)) == 0.0);
}

TEST_CASE("single-user capped maximization spends the whole budget") {
    const HawkesNetwork net = make_network(1, {{0, 0, 0.3}}, 1.0);
    const ShapingTask task = ShapingTask::capped_activity_max(VectorXd::Constant(1, 100.0));
    SolveOptions opts;
    opts.initial = VectorXd::Zero(1);
    opts.max_iterations = 3000;
    const SolveReport report = pgd_solve(task, net, 1.0, BudgetSpec::uniform(1, 0.5), opts);
    CHECK(report.allocation[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(report.budget_consumed == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("symmetric minimax shaping splits the budget evenly") {
    const HawkesNetwork net{2, SparseMatrix(2, 2, {}), 1.0};
    const ShapingTask task = ShapingTask::minimax();
    SolveOptions opts;
    opts.max_iterations = 5000;
    const SolveReport report = pgd_solve(task, net, 1.0, BudgetSpec::uniform(2, 0.5), opts);
    CHECK(report.allocation[0] == doctest::Approx(0.25).epsilon(2e-3));
    CHECK(report.allocation[1] == doctest::Approx(0.25).epsilon(2e-3));
}

TEST_CASE("backtracking trace is monotone nondecreasing") {
    Rng rng(151);
    const HawkesNetwork net = testing::make_random_network(rng, 4, 2.0, 1.0, 0.6);
    const VectorXd target = testing::random_vector(rng, 4, 0.5, 1.5);
    const ShapingTask task = ShapingTask::least_squares(SparseMatrix::identity(4), target);
    const SolveReport report = pgd_solve(task, net, 1.0, BudgetSpec::uniform(4, 1.0));
    CHECK(std::is_sorted(report.trace.begin(), report.trace.end()));
    CHECK(report.converged);
    CHECK((report.allocation.array() >= 0.0).all());
}

TEST_CASE("uniform cost rescaling leaves the solution value unchanged") {
    Rng rng(161);
    const HawkesNetwork net = testing::make_random_network(rng, 3, 2.0, 1.0, 0.5);
    const VectorXd caps = testing::random_vector(rng, 3, 0.5, 1.5);
    const ShapingTask task = ShapingTask::capped_activity_max(caps);
    const VectorXd costs = testing::random_vector(rng, 3, 0.5, 2.0);
    SolveOptions opts;
    opts.max_iterations = 2000;
    const SolveReport a = pgd_solve(task, net, 1.0, BudgetSpec{costs, 0.7}, opts);
    const SolveReport b = pgd_solve(task, net, 1.0, BudgetSpec{3.0 * costs, 3.0 * 0.7}, opts);
    CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-8));
}

TEST_CASE("solver reaches the grid-search optimum on tiny instances") {
    Rng rng(171);
    for (TaskKind kind : {TaskKind::CappedActivityMax, TaskKind::MinimaxShaping,
                          TaskKind::LeastSquaresShaping, TaskKind::Homogenization}) {
        const Index m = 2;
        const HawkesNetwork net = testing::make_random_network(rng, m, 1.5, 1.0, 0.5);
        ShapingTask task = ShapingTask::minimax();
        switch (kind) {
            case TaskKind::CappedActivityMax:
                task = ShapingTask::capped_activity_max(testing::random_vector(rng, m, 0.4, 1.0));
                break;
            case TaskKind::MinimaxShaping:
                task = ShapingTask::minimax();
                break;
            case TaskKind::LeastSquaresShaping:
                task = ShapingTask::least_squares(SparseMatrix::identity(m),
                                                  testing::random_vector(rng, m, 0.3, 1.0));
                break;
            case TaskKind::Homogenization:
                task = ShapingTask::homogenization();
                break;
        }
        const double t = 1.0;
        const BudgetSpec budget = BudgetSpec::uniform(m, 1.0);

        const MatrixXd dense = psi_dense(net, t);
        double best = -std::numeric_limits<double>::infinity();
        const int steps = 1000;
        for (int i = 0; i <= steps; ++i) {
            for (int j = 0; i + j <= steps; ++j) {
                const VectorXd lam =
                    (VectorXd(2) << i / double(steps), j / double(steps)).finished();
                best = std::max(best, task_utility(task, dense * lam));
            }
        }
        SolveOptions opts;
        opts.max_iterations = 40000;
        opts.tolerance = 1e-10;
        opts.patience = 4000;
        const SolveReport report = pgd_solve(task, net, t, budget, opts);
        CHECK(std::abs(report.objective - best) <= 1e-3);
    }
}

TEST_CASE("sparsity sweep dries up the allocation as gamma grows") {
    Rng rng(181);
    const Index m = 20;
    const HawkesNetwork net = testing::make_random_network(rng, m, 3.0, 1.0, 0.7);
    const ShapingTask task =
        ShapingTask::capped_activity_max(testing::random_vector(rng, m, 5.0, 9.0));
    const BudgetSpec budget = BudgetSpec::uniform(m, 0.5);

    // A gamma beyond max_u (Psi^T 1)_u kills every coordinate.
    const VectorXd influence = psi_transpose_apply(net, 1.0, VectorXd::Ones(m));
    const double gamma_max = influence.maxCoeff();

    SolveOptions opts;
    opts.max_iterations = 6000;
    opts.patience = 1500;
    const std::vector<double> gammas{0.0, 0.2 * gamma_max, 0.5 * gamma_max, 0.8 * gamma_max,
                                     1.05 * gamma_max};
    const auto rows = sparsity_sweep(task, net, 1.0, budget, gammas, opts);
    REQUIRE(rows.size() == gammas.size());
    // Caps are far above reach, so the zero-gamma optimum exhausts the budget.
    CHECK(rows[0].budget_consumed == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(rows.back().nonzeros == 0);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].nonzeros <= rows[i - 1].nonzeros);
        CHECK(rows[i].budget_consumed <= rows[i - 1].budget_consumed + 1e-9);
    }
}

TEST_CASE("sweep requires ascending gammas") {
    const HawkesNetwork net{1, SparseMatrix(1, 1, {}), 1.0};
    const ShapingTask task = ShapingTask::minimax();
    CHECK_THROWS_AS(
        sparsity_sweep(task, net, 1.0, BudgetSpec::uniform(1, 1.0), {0.5, 0.1}),
        std::invalid_argument);
}

TEST_CASE("degenerate shaping inputs are rejected up front") {
    const HawkesNetwork net{2, SparseMatrix(2, 2, {}), 1.0};
    const ShapingTask task = ShapingTask::minimax();
    CHECK_THROWS_AS(pgd_solve(task, net, 1.0, BudgetSpec{VectorXd::Ones(2), -1.0}, {}),
                    std::invalid_argument);
    CHECK_THROWS_AS(objective_and_gradient(ShapingTask::capped_activity_max(VectorXd::Ones(3)),
                                           net, 1.0, VectorXd::Ones(2)),
                    std::invalid_argument);
}
