#include <cmath>

#include <doctest.h>

#include "ash/estimate.hpp"
#include "ash/rng.hpp"
#include "ash/simulate.hpp"
#include "helpers.hpp"

using namespace ash;

namespace {

EventLog single_cascade(double horizon, std::vector<Event> events) {
    EventLog log;
    log.cascades.push_back(Cascade{horizon, std::move(events)});
    return log;
}

} // namespace

TEST_CASE("log likelihood of an empty log is the pure compensator") {
    const HawkesNetwork net{1, SparseMatrix(1, 1, {}), 1.0};
    const VectorXd lambda0 = VectorXd::Constant(1, 0.7);
    const auto ll = log_likelihood(net, lambda0, single_cascade(10.0, {}));
    CHECK(ll.value == doctest::Approx(-7.0).epsilon(1e-14));
    CHECK_FALSE(ll.zero_intensity_event.has_value());
}

TEST_CASE("log likelihood of one Poisson event matches the closed form") {
    const HawkesNetwork net{1, SparseMatrix(1, 1, {}), 1.0};
    const VectorXd lambda0 = VectorXd::Constant(1, 2.0);
    const auto ll = log_likelihood(net, lambda0, single_cascade(10.0, {{0, 1.0, 0, kNoParent}}));
    CHECK(ll.value == doctest::Approx(std::log(2.0) - 20.0).epsilon(1e-14));
}

TEST_CASE("zero-intensity events flag the offending event") {
    const HawkesNetwork net{1, SparseMatrix(1, 1, {}), 1.0};
    const auto ll =
        log_likelihood(net, VectorXd::Zero(1), single_cascade(10.0, {{0, 1.0, 0, kNoParent}}));
    CHECK(ll.value == -std::numeric_limits<double>::infinity());
    REQUIRE(ll.zero_intensity_event.has_value());
    CHECK(ll.zero_intensity_event->first == 0);
    CHECK(ll.zero_intensity_event->second == 0);
}

TEST_CASE("zero influence reduces to a product of Poisson likelihoods") {
    Rng rng(47);
    const Index m = 3;
    const HawkesNetwork net{m, SparseMatrix(m, m, {}), 1.0};
    const VectorXd lambda0 = testing::random_vector(rng, m, 0.4, 1.2);
    const double horizon = 30.0;
    const EventLog log = simulate_cascades(net, lambda0, horizon, 4, 9);
    const auto ll = log_likelihood(net, lambda0, log);
    double want = 0.0;
    VectorXd counts = VectorXd::Zero(m);
    for (const Cascade& c : log.cascades) {
        for (const Event& e : c.events) {
            counts[e.user] += 1.0;
        }
    }
    for (Index u = 0; u < m; ++u) {
        want += counts[u] * std::log(lambda0[u]) -
                lambda0[u] * horizon * static_cast<double>(log.cascades.size());
    }
    CHECK(ll.value == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("likelihood sums over cascades") {
    const HawkesNetwork net = make_network(2, {{0, 1, 0.4}, {1, 1, 0.2}}, 1.3);
    const VectorXd lambda0 = (VectorXd(2) << 0.5, 0.9).finished();
    EventLog both;
    both.cascades.push_back(Cascade{8.0, {{0, 1.0, 0, kNoParent}, {1, 2.5, 0, kNoParent}}});
    both.cascades.push_back(Cascade{5.0, {{1, 0.5, 0, kNoParent}, {0, 3.0, 0, kNoParent}}});
    EventLog first, second;
    first.cascades.push_back(both.cascades[0]);
    second.cascades.push_back(both.cascades[1]);
    CHECK(log_likelihood(net, lambda0, both).value ==
          doctest::Approx(log_likelihood(net, lambda0, first).value +
                          log_likelihood(net, lambda0, second).value)
              .epsilon(1e-13));
}

TEST_CASE("gradient of an empty log is minus the horizon") {
    const HawkesNetwork net{2, SparseMatrix(2, 2, {}), 1.0};
    const auto grad = ll_gradient(net, VectorXd::Ones(2), single_cascade(10.0, {}));
    CHECK(grad.wrt_lambda0[0] == doctest::Approx(-10.0));
    CHECK(grad.wrt_lambda0[1] == doctest::Approx(-10.0));
}

TEST_CASE("Poisson score matches n/lambda - T") {
    const HawkesNetwork net{1, SparseMatrix(1, 1, {}), 1.0};
    const VectorXd lambda0 = VectorXd::Constant(1, 0.8);
    EventLog log = single_cascade(
        10.0, {{0, 1.0, 0, kNoParent}, {0, 4.0, 0, kNoParent}, {0, 7.5, 0, kNoParent}});
    const auto grad = ll_gradient(net, lambda0, log);
    CHECK(grad.wrt_lambda0[0] == doctest::Approx(3.0 / 0.8 - 10.0).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches central finite differences") {
    Rng rng(57);
    const Index m = 4;
    const HawkesNetwork truth = testing::make_random_network(rng, m, 2.5, 1.0, 0.5);
    const VectorXd lambda_true = testing::random_vector(rng, m, 0.3, 0.8);
    const EventLog log = simulate_cascades(truth, lambda_true, 25.0, 3, 71);

    // Evaluate at a generic point away from the truth.
    std::vector<Triplet> entries(truth.A.entries().begin(), truth.A.entries().end());
    for (Triplet& e : entries) {
        e.value = rng.uniform(0.05, 0.4);
    }
    const HawkesNetwork net = make_network(m, entries, 1.0);
    const VectorXd lambda0 = testing::random_vector(rng, m, 0.2, 0.9);

    const auto grad = ll_gradient(net, lambda0, log);
    const double h = 1e-6;

    for (Index u = 0; u < m; ++u) {
        VectorXd up = lambda0, dn = lambda0;
        up[u] += h;
        dn[u] -= h;
        const double fd = (log_likelihood(net, up, log).value -
                           log_likelihood(net, dn, log).value) /
                          (2.0 * h);
        CHECK(grad.wrt_lambda0[u] ==
              doctest::Approx(fd).epsilon(1e-5).scale(std::abs(fd) + 1.0));
    }
    for (std::size_t k = 0; k < entries.size(); ++k) {
        auto bump = [&](double delta) {
            std::vector<Triplet> e2 = entries;
            e2[k].value += delta;
            return make_network(m, e2, 1.0);
        };
        const double fd = (log_likelihood(bump(h), lambda0, log).value -
                           log_likelihood(bump(-h), lambda0, log).value) /
                          (2.0 * h);
        CHECK(grad.wrt_influence[static_cast<Index>(k)] ==
              doctest::Approx(fd).epsilon(1e-5).scale(std::abs(fd) + 1.0));
    }
}

TEST_CASE("fitting an empty log returns zero rates") {
    EventLog log;
    log.cascades.push_back(Cascade{10.0, {}});
    const FitResult fit = fit_mle(log, 1.0, SupportPattern::full(2));
    CHECK(fit.converged);
    CHECK(fit.lambda0.norm() == 0.0);
    CHECK(fit.net.A.entries().size() == 4);
    for (const Triplet& e : fit.net.A.entries()) {
        CHECK(e.value == 0.0);
    }
}

TEST_CASE("fit recovers Poisson rates with a near-zero influence matrix") {
    const Index m = 2;
    const HawkesNetwork truth{m, SparseMatrix(m, m, {}), 1.0};
    const VectorXd lambda_true = VectorXd::Ones(m);
    const EventLog log = simulate_cascades(truth, lambda_true, 10000.0, 1, 13);
    const FitResult fit = fit_mle(log, 1.0, SupportPattern::full(m));
    for (Index u = 0; u < m; ++u) {
        CHECK(fit.lambda0[u] >= 0.95);
        CHECK(fit.lambda0[u] <= 1.05);
    }
    for (const Triplet& e : fit.net.A.entries()) {
        CHECK(e.value <= 0.02);
    }
}

TEST_CASE("fit never decreases the likelihood from its starting point") {
    Rng rng(67);
    const Index m = 3;
    const HawkesNetwork truth = testing::make_random_network(rng, m, 2.0, 1.0, 0.5);
    const VectorXd lambda_true = testing::random_vector(rng, m, 0.3, 0.7);
    const EventLog log = simulate_cascades(truth, lambda_true, 60.0, 5, 17);

    // The optimizer starts from per-user empirical rates and zero influence.
    VectorXd counts = VectorXd::Zero(m);
    double horizon_total = 0.0;
    for (const Cascade& c : log.cascades) {
        horizon_total += c.horizon;
        for (const Event& e : c.events) {
            counts[e.user] += 1.0;
        }
    }
    const HawkesNetwork empty{m, SparseMatrix(m, m, {}), 1.0};
    const double initial = log_likelihood(empty, counts / horizon_total, log).value;
    const FitResult fit = fit_mle(log, 1.0, SupportPattern::full(m));
    CHECK(fit.loglik >= initial - 1e-9);
    CHECK(log_likelihood(fit.net, fit.lambda0, log).value ==
          doctest::Approx(fit.loglik).epsilon(1e-9));
}

TEST_CASE("small synthetic network is recovered within loose tolerances") {
    Rng rng(87);
    const Index m = 4;
    const HawkesNetwork truth = testing::make_random_network(rng, m, 2.0, 1.0, 0.4);
    const VectorXd lambda_true = testing::random_vector(rng, m, 0.2, 0.5);
    const EventLog log = simulate_cascades(truth, lambda_true, 50.0, 100, 19);

    const SupportPattern support = SupportPattern::from_matrix(truth.A, false);
    FitOptions opts;
    opts.max_iterations = 4000;
    const FitResult fit = fit_mle(log, 1.0, support, opts);

    CHECK_FALSE(validate_network(fit.net).has_value());
    CHECK(testing::relative_error(fit.lambda0, lambda_true) <= 0.25);
    VectorXd a_true(static_cast<Index>(truth.A.entries().size()));
    VectorXd a_fit(static_cast<Index>(fit.net.A.entries().size()));
    for (std::size_t i = 0; i < truth.A.entries().size(); ++i) {
        a_true[static_cast<Index>(i)] = truth.A.entries()[i].value;
        a_fit[static_cast<Index>(i)] = fit.net.A.entries()[i].value;
    }
    CHECK(testing::relative_error(a_fit, a_true) <= 0.25);
}

TEST_CASE("lambda0 refit with fixed influence is exact for Poisson users") {
    const HawkesNetwork net{2, SparseMatrix(2, 2, {}), 1.0};
    EventLog log = single_cascade(
        20.0, {{0, 1.0, 0, kNoParent}, {0, 5.0, 0, kNoParent}, {1, 9.0, 0, kNoParent}});
    const VectorXd fitted = fit_lambda0_given_influence(net, log);
    CHECK(fitted[0] == doctest::Approx(2.0 / 20.0).epsilon(1e-9));
    CHECK(fitted[1] == doctest::Approx(1.0 / 20.0).epsilon(1e-9));
}

TEST_CASE("lambda0 refit lands on a local maximum") {
    Rng rng(97);
    const Index m = 3;
    const HawkesNetwork net = testing::make_random_network(rng, m, 2.0, 1.0, 0.5);
    const VectorXd lambda_true = testing::random_vector(rng, m, 0.3, 0.8);
    const EventLog log = simulate_cascades(net, lambda_true, 80.0, 3, 23);
    const VectorXd fitted = fit_lambda0_given_influence(net, log);
    const double at = log_likelihood(net, fitted, log).value;
    for (Index u = 0; u < m; ++u) {
        VectorXd bumped = fitted;
        bumped[u] += 1e-5;
        CHECK(log_likelihood(net, bumped, log).value <= at + 1e-9);
        if (fitted[u] > 1e-5) {
            bumped[u] = fitted[u] - 1e-5;
            CHECK(log_likelihood(net, bumped, log).value <= at + 1e-9);
        }
    }
}

TEST_CASE("omega selection shortcuts and tie-breaks are deterministic") {
    EventLog log;
    log.cascades.push_back(Cascade{5.0, {{0, 1.0, 0, kNoParent}}});
    log.cascades.push_back(Cascade{5.0, {{0, 2.0, 0, kNoParent}}});
    const SupportPattern support = SupportPattern::full(1);
    CHECK(select_omega(log, {2.5}, 2, support).omega == 2.5);
    // Identical grid values: the first index wins.
    const auto tie = select_omega(log, {1.0, 1.0}, 2, support);
    CHECK(tie.omega == 1.0);
    CHECK(tie.mean_heldout[0] == tie.mean_heldout[1]);
    CHECK_THROWS_AS(select_omega(log, {}, 2, support), std::invalid_argument);
    CHECK_THROWS_AS(select_omega(log, {1.0, 2.0}, 1, support), std::invalid_argument);
}
