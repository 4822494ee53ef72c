#include "ash/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ash {

namespace {

constexpr double kArmijoC = 1e-4;
constexpr double kBacktrackFactor = 0.5;
constexpr double kMinStep = 1e-18;

struct PackedSupport {
    Index m = 0;
    std::vector<Index> row_ptr;  // m+1
    std::vector<Index> cols;     // column of each support entry, row-major
};

PackedSupport pack(const SupportPattern& support) {
    PackedSupport p;
    p.m = support.m;
    auto entries = support.entries;
    std::sort(entries.begin(), entries.end());
    entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
    p.row_ptr.assign(static_cast<std::size_t>(support.m) + 1, 0);
    p.cols.reserve(entries.size());
    for (const auto& [r, c] : entries) {
        if (r < 0 || r >= support.m || c < 0 || c >= support.m) {
            throw std::invalid_argument("support entry out of range");
        }
        ++p.row_ptr[static_cast<std::size_t>(r) + 1];
        p.cols.push_back(c);
    }
    for (Index r = 0; r < support.m; ++r) {
        p.row_ptr[static_cast<std::size_t>(r) + 1] += p.row_ptr[static_cast<std::size_t>(r)];
    }
    return p;
}

/// Parameter-independent per-event data: for event i of user u, the decayed
/// sums S_w(t_i) for every support entry (u, w), so likelihood passes need
/// no exponentials.
struct Workspace {
    PackedSupport support;
    double omega = 0.0;
    double total_horizon = 0.0;
    std::size_t total_events = 0;

    std::vector<int> event_user;            // flattened over cascades
    std::vector<Index> event_entry_ptr;     // offsets into entry_index/entry_decay
    std::vector<Index> entry_index;         // support entry hit by this event
    std::vector<double> entry_decay;        // S_w(t_i) for that entry
    std::vector<double> event_count;        // per user
    VectorXd compensator_coeff;             // per support entry: sum_j kappa(t_j) over col events
};

Workspace build_workspace(const EventLog& log, double omega, const SupportPattern& support) {
    Workspace ws;
    ws.support = pack(support);
    ws.omega = omega;
    const Index m = ws.support.m;
    ws.event_count.assign(static_cast<std::size_t>(m), 0.0);
    ws.compensator_coeff = VectorXd::Zero(static_cast<Index>(ws.support.cols.size()));

    VectorXd per_user_kappa = VectorXd::Zero(m);
    std::vector<double> decay_sum(static_cast<std::size_t>(m));
    std::vector<double> last_update(static_cast<std::size_t>(m));

    ws.event_entry_ptr.push_back(0);
    for (const Cascade& cascade : log.cascades) {
        ws.total_horizon += cascade.horizon;
        std::fill(decay_sum.begin(), decay_sum.end(), 0.0);
        std::fill(last_update.begin(), last_update.end(), 0.0);
        for (const Event& e : cascade.events) {
            if (e.user < 0 || static_cast<Index>(e.user) >= m) {
                throw std::invalid_argument("event user id out of range");
            }
            const Index u = e.user;
            ws.event_user.push_back(e.user);
            ++ws.event_count[static_cast<std::size_t>(u)];
            const Index lo = ws.support.row_ptr[static_cast<std::size_t>(u)];
            const Index hi = ws.support.row_ptr[static_cast<std::size_t>(u) + 1];
            for (Index p = lo; p < hi; ++p) {
                const Index w = ws.support.cols[static_cast<std::size_t>(p)];
                const double s = decay_sum[static_cast<std::size_t>(w)] *
                                 std::exp(-omega * (e.time - last_update[static_cast<std::size_t>(w)]));
                if (s > 0.0) {
                    ws.entry_index.push_back(p);
                    ws.entry_decay.push_back(s);
                }
            }
            ws.event_entry_ptr.push_back(static_cast<Index>(ws.entry_index.size()));
            double& s_u = decay_sum[static_cast<std::size_t>(u)];
            s_u = s_u * std::exp(-omega * (e.time - last_update[static_cast<std::size_t>(u)])) + 1.0;
            last_update[static_cast<std::size_t>(u)] = e.time;
            per_user_kappa[u] += (1.0 - std::exp(-omega * (cascade.horizon - e.time))) / omega;
        }
        ws.total_events += cascade.events.size();
    }
    for (std::size_t p = 0; p < ws.support.cols.size(); ++p) {
        ws.compensator_coeff[static_cast<Index>(p)] =
            per_user_kappa[ws.support.cols[p]];
    }
    return ws;
}

/// Floored log-likelihood and gradient in one pass. Returns the raw
/// (unnormalized) value; gradients are written when pointers are given.
double eval_loglik(const Workspace& ws, const VectorXd& lambda0, const VectorXd& values,
                   double floor, VectorXd* grad_lambda0, VectorXd* grad_values) {
    const Index m = ws.support.m;
    double ll = 0.0;
    if (grad_lambda0) {
        grad_lambda0->setZero(m);
    }
    if (grad_values) {
        grad_values->setZero(static_cast<Index>(ws.support.cols.size()));
    }
    const std::size_t n_events = ws.event_user.size();
    for (std::size_t i = 0; i < n_events; ++i) {
        const Index u = ws.event_user[i];
        double lam = lambda0[u];
        const Index lo = ws.event_entry_ptr[i];
        const Index hi = ws.event_entry_ptr[i + 1];
        for (Index k = lo; k < hi; ++k) {
            lam += values[ws.entry_index[static_cast<std::size_t>(k)]] *
                   ws.entry_decay[static_cast<std::size_t>(k)];
        }
        const double safe = std::max(lam, floor);
        ll += std::log(safe);
        if (grad_lambda0) {
            const double inv = 1.0 / safe;
            (*grad_lambda0)[u] += inv;
            for (Index k = lo; k < hi; ++k) {
                (*grad_values)[ws.entry_index[static_cast<std::size_t>(k)]] +=
                    ws.entry_decay[static_cast<std::size_t>(k)] * inv;
            }
        }
    }
    ll -= lambda0.sum() * ws.total_horizon;
    ll -= values.dot(ws.compensator_coeff);
    if (grad_lambda0) {
        grad_lambda0->array() -= ws.total_horizon;
        *grad_values -= ws.compensator_coeff;
    }
    return ll;
}

SparseMatrix support_matrix(const PackedSupport& support, const VectorXd& values) {
    std::vector<Triplet> entries;
    entries.reserve(support.cols.size());
    for (Index r = 0; r < support.m; ++r) {
        const Index lo = support.row_ptr[static_cast<std::size_t>(r)];
        const Index hi = support.row_ptr[static_cast<std::size_t>(r) + 1];
        for (Index p = lo; p < hi; ++p) {
            entries.push_back({r, support.cols[static_cast<std::size_t>(p)], values[p]});
        }
    }
    return SparseMatrix(support.m, support.m, std::move(entries));
}

} // namespace

SupportPattern SupportPattern::full(Index m) {
    SupportPattern s;
    s.m = m;
    s.entries.reserve(static_cast<std::size_t>(m) * static_cast<std::size_t>(m));
    for (Index r = 0; r < m; ++r) {
        for (Index c = 0; c < m; ++c) {
            s.entries.emplace_back(r, c);
        }
    }
    return s;
}

SupportPattern SupportPattern::from_matrix(const SparseMatrix& a, bool add_diagonal) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("support matrix must be square");
    }
    SupportPattern s;
    s.m = a.rows();
    for (const Triplet& e : a.entries()) {
        s.entries.emplace_back(e.row, e.col);
    }
    if (add_diagonal) {
        for (Index i = 0; i < s.m; ++i) {
            s.entries.emplace_back(i, i);
        }
    }
    std::sort(s.entries.begin(), s.entries.end());
    s.entries.erase(std::unique(s.entries.begin(), s.entries.end()), s.entries.end());
    return s;
}

LogLikelihoodResult log_likelihood(const HawkesNetwork& net, const VectorXd& lambda0,
                                   const EventLog& log) {
    if (lambda0.size() != net.m) {
        throw std::invalid_argument("exogenous intensity length does not match user count");
    }
    double ll = 0.0;
    std::vector<double> decay_sum(static_cast<std::size_t>(net.m));
    std::vector<double> last_update(static_cast<std::size_t>(net.m));
    for (std::size_t ci = 0; ci < log.cascades.size(); ++ci) {
        const Cascade& cascade = log.cascades[ci];
        std::fill(decay_sum.begin(), decay_sum.end(), 0.0);
        std::fill(last_update.begin(), last_update.end(), 0.0);
        VectorXd kappa = VectorXd::Zero(net.m);
        for (std::size_t i = 0; i < cascade.events.size(); ++i) {
            const Event& e = cascade.events[i];
            double lam = lambda0[e.user];
            for (const Triplet& a : net.A.row(e.user)) {
                const double s = decay_sum[static_cast<std::size_t>(a.col)] *
                                 std::exp(-net.omega *
                                          (e.time - last_update[static_cast<std::size_t>(a.col)]));
                lam += a.value * s;
            }
            if (!(lam > 0.0)) {
                return {-std::numeric_limits<double>::infinity(), std::make_pair(ci, i)};
            }
            ll += std::log(lam);
            double& s_u = decay_sum[static_cast<std::size_t>(e.user)];
            s_u = s_u * std::exp(-net.omega *
                                 (e.time - last_update[static_cast<std::size_t>(e.user)])) +
                  1.0;
            last_update[static_cast<std::size_t>(e.user)] = e.time;
            kappa[e.user] += (1.0 - std::exp(-net.omega * (cascade.horizon - e.time))) / net.omega;
        }
        ll -= lambda0.sum() * cascade.horizon;
        const VectorXd col_sums = net.A.column_sums();
        ll -= col_sums.dot(kappa);
    }
    return {ll, std::nullopt};
}

LogLikGradient ll_gradient(const HawkesNetwork& net, const VectorXd& lambda0,
                           const EventLog& log) {
    SupportPattern support = SupportPattern::from_matrix(net.A, /*add_diagonal=*/false);
    Workspace ws = build_workspace(log, net.omega, support);
    // Values aligned with the packed (sorted) support, which matches the
    // sorted order of net.A.entries().
    VectorXd values(static_cast<Index>(net.A.entries().size()));
    for (std::size_t i = 0; i < net.A.entries().size(); ++i) {
        values[static_cast<Index>(i)] = net.A.entries()[i].value;
    }
    LogLikGradient grad;
    eval_loglik(ws, lambda0, values, 0.0, &grad.wrt_lambda0, &grad.wrt_influence);
    return grad;
}

FitResult fit_mle(const EventLog& log, double omega, const SupportPattern& support,
                  const FitOptions& opts) {
    if (!(omega > 0.0) || !std::isfinite(omega)) {
        throw std::invalid_argument("omega must be positive and finite");
    }
    const Index m = support.m;
    if (m <= 0) {
        throw std::invalid_argument("support must declare a positive user count");
    }
    Workspace ws = build_workspace(log, omega, support);
    const Index n_entries = static_cast<Index>(ws.support.cols.size());

    FitResult result;
    if (ws.total_events == 0) {
        // The likelihood of an empty log is maximized by zero rates.
        result.net = HawkesNetwork{m, support_matrix(ws.support, VectorXd::Zero(n_entries)), omega};
        result.lambda0 = VectorXd::Zero(m);
        result.loglik = 0.0;
        result.converged = true;
        return result;
    }

    const double norm = static_cast<double>(ws.total_events);
    VectorXd lambda0(m);
    for (Index u = 0; u < m; ++u) {
        lambda0[u] = ws.event_count[static_cast<std::size_t>(u)] / ws.total_horizon;
    }
    VectorXd values = VectorXd::Zero(n_entries);

    VectorXd grad_l(m), grad_v(n_entries);
    auto objective = [&](const VectorXd& l0, const VectorXd& vals, VectorXd* gl, VectorXd* gv) {
        double obj = eval_loglik(ws, l0, vals, opts.intensity_floor, gl, gv);
        obj -= opts.l1_penalty * vals.sum();
        if (gv) {
            gv->array() -= opts.l1_penalty;
        }
        return obj / norm;
    };

    double current = objective(lambda0, values, &grad_l, &grad_v);
    grad_l /= norm;
    grad_v /= norm;

    double step = 1.0;
    VectorXd cand_l(m), cand_v(n_entries);
    long iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
        // Projected-gradient (KKT) residual: free coordinates use the raw
        // gradient, active bounds only count outward components.
        double kkt = 0.0;
        for (Index i = 0; i < m; ++i) {
            const double g = lambda0[i] > 0.0 ? grad_l[i] : std::max(grad_l[i], 0.0);
            kkt = std::max(kkt, std::abs(g));
        }
        for (Index i = 0; i < n_entries; ++i) {
            const double g = values[i] > 0.0 ? grad_v[i] : std::max(grad_v[i], 0.0);
            kkt = std::max(kkt, std::abs(g));
        }
        result.gradient_norm = kkt;
        if (kkt <= opts.gradient_tolerance) {
            result.converged = true;
            break;
        }

        step = std::min(step * 2.0, 1e8);
        bool accepted = false;
        while (step >= kMinStep) {
            cand_l = (lambda0 + step * grad_l).cwiseMax(0.0);
            cand_v = (values + step * grad_v).cwiseMax(0.0);
            const double cand_obj = objective(cand_l, cand_v, nullptr, nullptr);
            const double decrease = grad_l.dot(cand_l - lambda0) + grad_v.dot(cand_v - values);
            if (cand_obj >= current + kArmijoC * decrease) {
                accepted = true;
                break;
            }
            step *= kBacktrackFactor;
        }
        if (!accepted) {
            result.converged = true;  // no ascent step exists at float scale
            break;
        }
        lambda0.swap(cand_l);
        values.swap(cand_v);
        const double next = objective(lambda0, values, &grad_l, &grad_v);
        grad_l /= norm;
        grad_v /= norm;
        const double change = std::abs(next - current);
        current = next;
        if (change <= opts.objective_tolerance * std::max(1.0, std::abs(next))) {
            result.converged = true;
            ++iter;
            break;
        }
    }

    result.net = HawkesNetwork{m, support_matrix(ws.support, values), omega};
    result.lambda0 = std::move(lambda0);
    result.loglik = current * norm;
    result.iterations = iter;
    return result;
}

VectorXd fit_lambda0_given_influence(const HawkesNetwork& net, const EventLog& log) {
    // With A fixed the likelihood separates per user into 1-D concave
    // problems; solve each by bisection on the monotone derivative.
    std::vector<std::vector<double>> excitation(static_cast<std::size_t>(net.m));
    double total_horizon = 0.0;
    std::vector<double> decay_sum(static_cast<std::size_t>(net.m));
    std::vector<double> last_update(static_cast<std::size_t>(net.m));
    for (const Cascade& cascade : log.cascades) {
        total_horizon += cascade.horizon;
        std::fill(decay_sum.begin(), decay_sum.end(), 0.0);
        std::fill(last_update.begin(), last_update.end(), 0.0);
        for (const Event& e : cascade.events) {
            double endo = 0.0;
            for (const Triplet& a : net.A.row(e.user)) {
                endo += a.value * decay_sum[static_cast<std::size_t>(a.col)] *
                        std::exp(-net.omega *
                                 (e.time - last_update[static_cast<std::size_t>(a.col)]));
            }
            excitation[static_cast<std::size_t>(e.user)].push_back(endo);
            double& s_u = decay_sum[static_cast<std::size_t>(e.user)];
            s_u = s_u * std::exp(-net.omega *
                                 (e.time - last_update[static_cast<std::size_t>(e.user)])) +
                  1.0;
            last_update[static_cast<std::size_t>(e.user)] = e.time;
        }
    }
    VectorXd lambda0 = VectorXd::Zero(net.m);
    if (!(total_horizon > 0.0)) {
        return lambda0;
    }
    for (Index u = 0; u < net.m; ++u) {
        const auto& endo = excitation[static_cast<std::size_t>(u)];
        if (endo.empty()) {
            continue;
        }
        auto derivative = [&](double lam) {
            double d = -total_horizon;
            for (double e : endo) {
                d += 1.0 / (lam + e);
            }
            return d;
        };
        if (derivative(0.0) <= 0.0) {
            continue;  // boundary optimum at zero
        }
        double lo = 0.0;
        double hi = static_cast<double>(endo.size()) / total_horizon;
        for (int k = 0; k < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++k) {
            const double mid = 0.5 * (lo + hi);
            (derivative(mid) > 0.0 ? lo : hi) = mid;
        }
        lambda0[u] = 0.5 * (lo + hi);
    }
    return lambda0;
}

SelectOmegaResult select_omega(const EventLog& log, const std::vector<double>& grid, int folds,
                               const SupportPattern& support, const FitOptions& opts) {
    if (grid.empty()) {
        throw std::invalid_argument("omega grid must be nonempty");
    }
    SelectOmegaResult result;
    if (grid.size() == 1) {
        result.omega = grid.front();
        result.mean_heldout.assign(1, 0.0);
        return result;
    }
    if (folds < 2) {
        throw std::invalid_argument("cross validation needs at least 2 folds");
    }
    if (log.cascades.size() < static_cast<std::size_t>(folds)) {
        throw std::invalid_argument("need at least one cascade per fold");
    }
    result.mean_heldout.assign(grid.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        double sum = 0.0;
        int used = 0;
        for (int f = 0; f < folds; ++f) {
            EventLog train, test;
            for (std::size_t c = 0; c < log.cascades.size(); ++c) {
                (static_cast<int>(c % static_cast<std::size_t>(folds)) == f ? test : train)
                    .cascades.push_back(log.cascades[c]);
            }
            try {
                const FitResult fit = fit_mle(train, grid[gi], support, opts);
                // Held-out score uses the same intensity floor as fitting so
                // unexplained events stay finite.
                Workspace ws = build_workspace(test, grid[gi], support);
                VectorXd values(static_cast<Index>(fit.net.A.entries().size()));
                for (std::size_t i = 0; i < fit.net.A.entries().size(); ++i) {
                    values[static_cast<Index>(i)] = fit.net.A.entries()[i].value;
                }
                sum += eval_loglik(ws, fit.lambda0, values, opts.intensity_floor, nullptr, nullptr);
                ++used;
            } catch (const Error&) {
                ++result.skipped_folds;
            }
        }
        if (used > 0) {
            result.mean_heldout[gi] = sum / used;
        }
    }
    std::size_t best = 0;
    for (std::size_t gi = 1; gi < grid.size(); ++gi) {
        if (result.mean_heldout[gi] > result.mean_heldout[best]) {
            best = gi;  // strict: ties resolve to the first index
        }
    }
    result.omega = grid[best];
    return result;
}

} // namespace ash
