#include "ash/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>

#include "ash/rng.hpp"

namespace ash {

namespace {

void check_rates(const HawkesNetwork& net, const VectorXd& lambda0) {
    if (lambda0.size() != net.m) {
        throw std::invalid_argument("exogenous intensity length does not match user count");
    }
    for (Index i = 0; i < lambda0.size(); ++i) {
        if (!(lambda0[i] >= 0.0) || !std::isfinite(lambda0[i])) {
            throw std::invalid_argument("exogenous intensity must be nonnegative and finite");
        }
    }
}

} // namespace

Cascade simulate_hawkes(const HawkesNetwork& net, const VectorXd& lambda0, double horizon,
                        std::uint64_t seed, const SimulateOptions& opts) {
    check_rates(net, lambda0);
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw std::invalid_argument("horizon must be positive and finite");
    }
    const Index m = net.m;
    Rng rng(seed);

    Cascade cascade;
    cascade.horizon = horizon;

    // source_sum[w] = sum over w's past events of exp(-omega (now - t_j));
    // excitation[u] = sum_w a(u,w) source_sum[w], kept consistent by applying
    // the same decay factor to both and adding column u of A on each event.
    VectorXd source_sum = VectorXd::Zero(m);
    VectorXd excitation = VectorXd::Zero(m);
    std::vector<std::vector<Index>> events_by_user(static_cast<std::size_t>(m));

    const double exo_total = lambda0.sum();
    double now = 0.0;

    for (;;) {
        const double bound = exo_total + excitation.sum();
        if (!(bound > 0.0)) {
            break;
        }
        const double wait = rng.exponential(bound);
        const double t = now + wait;
        if (t > horizon) {
            break;
        }
        const double decay = std::exp(-net.omega * wait);
        source_sum *= decay;
        excitation *= decay;
        now = t;

        const double total = exo_total + excitation.sum();
        if (rng.next_unit() * bound >= total) {
            continue;  // rejected; the bound resets to the decayed intensity
        }

        // Accepted: pick the emitting user proportional to lambda_u(now).
        double z = rng.next_unit() * total;
        Index user = m - 1;
        for (Index i = 0; i < m; ++i) {
            const double lam_i = lambda0[i] + excitation[i];
            if (z < lam_i) {
                user = i;
                break;
            }
            z -= lam_i;
        }

        // Attribute a parent proportional to the contributions making up
        // lambda_user(now): the exogenous rate or one past event's kernel.
        int generation = 0;
        Index parent = kNoParent;
        double zp = rng.next_unit() * (lambda0[user] + excitation[user]);
        if (zp >= lambda0[user]) {
            zp -= lambda0[user];
            Index source = -1;
            for (const Triplet& e : net.A.row(user)) {
                const double contribution = e.value * source_sum[e.col];
                if (zp < contribution) {
                    source = e.col;
                    break;
                }
                zp -= contribution;
            }
            if (source >= 0 && !events_by_user[static_cast<std::size_t>(source)].empty()) {
                const auto& own = events_by_user[static_cast<std::size_t>(source)];
                // Walk newest-first: recent events dominate the decayed
                // weights, so the walk terminates in O(1) expected steps.
                const double zw = rng.next_unit() * source_sum[source];
                double acc = 0.0;
                parent = own.front();
                for (auto it = own.rbegin(); it != own.rend(); ++it) {
                    acc += std::exp(-net.omega *
                                    (now - cascade.events[static_cast<std::size_t>(*it)].time));
                    if (zw < acc) {
                        parent = *it;
                        break;
                    }
                }
                generation = cascade.events[static_cast<std::size_t>(parent)].generation + 1;
            }
            // else: rounding walked past the last contribution; treat as exogenous.
        }

        cascade.events.push_back(Event{static_cast<int>(user), now, generation, parent});
        events_by_user[static_cast<std::size_t>(user)].push_back(
            static_cast<Index>(cascade.events.size()) - 1);
        source_sum[user] += 1.0;
        for (const SparseMatrix::ColEntry& e : net.A.col(user)) {
            excitation[e.row] += e.value;
        }

        if (cascade.events.size() > opts.max_events) {
            throw ExplosionGuardError("cascade exceeded the event cap of " +
                                          std::to_string(opts.max_events) +
                                          "; dynamics are near- or super-critical",
                                      cascade.events.size());
        }
    }
    return cascade;
}

EventLog simulate_cascades(const HawkesNetwork& net, const VectorXd& lambda0, double horizon,
                           std::size_t count, std::uint64_t seed, int threads,
                           const SimulateOptions& opts) {
    EventLog log;
    log.cascades.resize(count);
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            log.cascades[i] = simulate_hawkes(net, lambda0, horizon, derive_stream(seed, i), opts);
        }
        return log;
    }
    const int workers = std::min<int>(threads, static_cast<int>(count));
    std::vector<std::future<void>> jobs;
    jobs.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        jobs.push_back(std::async(std::launch::async, [&, w]() {
            for (std::size_t i = static_cast<std::size_t>(w); i < count;
                 i += static_cast<std::size_t>(workers)) {
                log.cascades[i] =
                    simulate_hawkes(net, lambda0, horizon, derive_stream(seed, i), opts);
            }
        }));
    }
    for (auto& job : jobs) {
        job.get();
    }
    return log;
}

IntensityCurve empirical_intensity(const EventLog& log, Index m, double window, double horizon) {
    if (!(window > 0.0) || !std::isfinite(window)) {
        throw std::invalid_argument("window must be positive and finite");
    }
    if (horizon < window) {
        throw EmptyHorizonError("horizon shorter than one window");
    }
    if (log.cascades.empty()) {
        throw std::invalid_argument("event log has no cascades");
    }
    const Index windows = static_cast<Index>(std::floor(horizon / window + 1e-9));
    const double covered = static_cast<double>(windows) * window;
    for (const Cascade& c : log.cascades) {
        if (c.horizon + 1e-9 < covered) {
            throw std::invalid_argument("cascade horizon does not cover the averaged span");
        }
    }
    IntensityCurve curve;
    curve.window = window;
    curve.values = MatrixXd::Zero(m, windows);
    for (const Cascade& c : log.cascades) {
        for (const Event& e : c.events) {
            if (e.time >= covered) {
                continue;
            }
            if (e.user < 0 || static_cast<Index>(e.user) >= m) {
                throw std::invalid_argument("event user id out of range");
            }
            const Index j = std::min<Index>(static_cast<Index>(e.time / window), windows - 1);
            curve.values(e.user, j) += 1.0;
        }
    }
    curve.values /= window * static_cast<double>(log.cascades.size());
    return curve;
}

std::vector<std::size_t> generation_counts(const EventLog& log, double time) {
    std::vector<std::size_t> counts;
    for (const Cascade& c : log.cascades) {
        for (const Event& e : c.events) {
            if (e.time > time) {
                break;  // events are time-sorted within a cascade
            }
            if (e.generation < 0) {
                throw UnlabeledLogError("event log lacks generation labels");
            }
            const std::size_t g = static_cast<std::size_t>(e.generation);
            if (counts.size() <= g) {
                counts.resize(g + 1, 0);
            }
            ++counts[g];
        }
    }
    return counts;
}

} // namespace ash
