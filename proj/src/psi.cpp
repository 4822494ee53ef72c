#include "ash/psi.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace ash {

namespace {

constexpr int kMaxTaylorTerms = 128;

void check_action_inputs(double t, const VectorXd& v, double tol) {
    if (!(t >= 0.0) || !std::isfinite(t)) {
        throw std::invalid_argument("time must be nonnegative and finite");
    }
    if (!(tol > 0.0) || tol > 1e-2) {
        throw std::invalid_argument("tolerance must lie in (0, 1e-2]");
    }
    if (!v.allFinite()) {
        throw NonFiniteError("input vector contains non-finite entries");
    }
}

struct SubstepPlan {
    long steps;
    double h;
    double mu;      // diagonal shift, exp(mu*h) applied per substep
    double scale;   // exp(mu*h)
};

SubstepPlan plan_substeps(const LinearOperator& op, double t) {
    const double n = static_cast<double>(op.size());
    const double mu = n > 0 ? op.trace() / n : 0.0;
    const double norm = op.one_norm_shifted(mu);
    long steps = 1;
    if (norm * t > 1.0) {
        steps = static_cast<long>(std::ceil(norm * t));
    }
    const double h = t / static_cast<double>(steps);
    return SubstepPlan{steps, h, mu, std::exp(mu * h)};
}

/// One substep of exp((Op - mu I) h) u by truncated Taylor; the caller
/// rescales by exp(mu h). Stops on two consecutive small terms.
void taylor_substep(const LinearOperator& op, double h, double mu, double tol, VectorXd& u,
                    VectorXd& term, VectorXd& tmp) {
    term = u;
    bool prev_small = false;
    for (int k = 1; k <= kMaxTaylorTerms; ++k) {
        op.apply(term, tmp);
        tmp.noalias() -= mu * term;
        term = (h / static_cast<double>(k)) * tmp;
        u += term;
        if (!u.allFinite()) {
            throw NonFiniteError("exponential action overflowed");
        }
        const bool small = term.norm() <= tol * u.norm();
        if (small && prev_small) {
            return;
        }
        prev_small = small;
    }
    throw ToleranceNotReachedError("exponential-action Taylor series did not converge");
}

/// phi_1((Op) h) u = sum_k (Op h)^k u / (k+1)!, unshifted.
void phi1_substep(const LinearOperator& op, double h, double tol, const VectorXd& u,
                  VectorXd& out, VectorXd& term, VectorXd& tmp) {
    term = u;
    out = u;
    bool prev_small = false;
    for (int k = 1; k <= kMaxTaylorTerms; ++k) {
        op.apply(term, tmp);
        term = (h / static_cast<double>(k + 1)) * tmp;
        out += term;
        if (!out.allFinite()) {
            throw NonFiniteError("exponential integral overflowed");
        }
        const bool small = term.norm() <= tol * out.norm();
        if (small && prev_small) {
            return;
        }
        prev_small = small;
    }
    throw ToleranceNotReachedError("phi1 Taylor series did not converge");
}

} // namespace

VectorXd expm_action(const LinearOperator& op, double t, const VectorXd& v, double tol) {
    check_action_inputs(t, v, tol);
    if (v.size() != op.size()) {
        throw std::invalid_argument("vector length does not match operator size");
    }
    if (t == 0.0) {
        return v;
    }
    const SubstepPlan plan = plan_substeps(op, t);
    // Truncation errors compound across substeps.
    const double step_tol = std::max(tol / static_cast<double>(plan.steps), 1e-16);
    VectorXd u = v;
    VectorXd term(v.size()), tmp(v.size());
    for (long s = 0; s < plan.steps; ++s) {
        taylor_substep(op, plan.h, plan.mu, step_tol, u, term, tmp);
        u *= plan.scale;
    }
    return u;
}

ExpmWithIntegral expm_action_with_integral(const LinearOperator& op, double t, const VectorXd& v,
                                           double tol) {
    check_action_inputs(t, v, tol);
    if (v.size() != op.size()) {
        throw std::invalid_argument("vector length does not match operator size");
    }
    if (t == 0.0) {
        return {v, VectorXd::Zero(v.size())};
    }
    const SubstepPlan plan = plan_substeps(op, t);
    const double step_tol = std::max(tol / static_cast<double>(plan.steps), 1e-16);
    VectorXd u = v;
    VectorXd integral = VectorXd::Zero(v.size());
    VectorXd term(v.size()), tmp(v.size()), panel(v.size());
    for (long s = 0; s < plan.steps; ++s) {
        // int_{s h}^{(s+1) h} exp(Op sigma) v dsigma = h * phi1(Op h) u_s.
        phi1_substep(op, plan.h, step_tol, u, panel, term, tmp);
        integral.noalias() += plan.h * panel;
        taylor_substep(op, plan.h, plan.mu, step_tol, u, term, tmp);
        u *= plan.scale;
    }
    return {std::move(u), std::move(integral)};
}

VectorXd gmres_solve(const LinearOperator& op, const VectorXd& b, double tol, int restart,
                     long max_iter) {
    if (b.size() != op.size()) {
        throw std::invalid_argument("right-hand side length does not match operator size");
    }
    if (!b.allFinite()) {
        throw NonFiniteError("right-hand side contains non-finite entries");
    }
    if (!(tol > 0.0) || tol > 1e-2) {
        throw std::invalid_argument("tolerance must lie in (0, 1e-2]");
    }
    if (restart < 1) {
        throw std::invalid_argument("restart must be at least 1");
    }
    const Index n = b.size();
    if (max_iter < 0) {
        max_iter = 10 * static_cast<long>(n);
    }
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        return VectorXd::Zero(n);
    }
    const double target = tol * bnorm;
    const int m = std::min<Index>(restart, n);

    VectorXd x = VectorXd::Zero(n);
    MatrixXd basis(n, m + 1);
    MatrixXd hess = MatrixXd::Zero(m + 1, m);
    VectorXd g(m + 1), cs(m), sn(m), w(n), tmp(n);

    long iters = 0;
    double residual = bnorm;

    auto update_solution = [&](int k) {
        // Back-substitute the triangularized Hessenberg system.
        VectorXd y(k);
        for (int i = k - 1; i >= 0; --i) {
            double s = g[i];
            for (int j = i + 1; j < k; ++j) {
                s -= hess(i, j) * y[j];
            }
            y[i] = s / hess(i, i);
        }
        x.noalias() += basis.leftCols(k) * y;
    };

    while (iters < max_iter) {
        op.apply(x, tmp);
        VectorXd r = b - tmp;
        residual = r.norm();
        if (residual <= target) {
            return x;
        }
        basis.col(0) = r / residual;
        g.setZero();
        g[0] = residual;

        int k = 0;
        for (; k < m && iters < max_iter; ++k) {
            ++iters;
            op.apply(basis.col(k), w);
            const double wnorm_before = w.norm();
            for (int i = 0; i <= k; ++i) {
                hess(i, k) = basis.col(i).dot(w);
                w.noalias() -= hess(i, k) * basis.col(i);
            }
            // One re-orthogonalization pass when cancellation was heavy.
            if (w.norm() < 0.5 * wnorm_before) {
                for (int i = 0; i <= k; ++i) {
                    const double corr = basis.col(i).dot(w);
                    hess(i, k) += corr;
                    w.noalias() -= corr * basis.col(i);
                }
            }
            const double arnoldi_h = w.norm();
            hess(k + 1, k) = arnoldi_h;

            // Apply the accumulated Givens rotations to the new column.
            for (int i = 0; i < k; ++i) {
                const double h0 = cs[i] * hess(i, k) + sn[i] * hess(i + 1, k);
                const double h1 = -sn[i] * hess(i, k) + cs[i] * hess(i + 1, k);
                hess(i, k) = h0;
                hess(i + 1, k) = h1;
            }
            const double denom = std::hypot(hess(k, k), hess(k + 1, k));
            if (denom == 0.0) {
                // Column vanished: the operator annihilates this direction.
                if (std::abs(g[k]) <= target) {
                    update_solution(k);
                    return x;
                }
                throw BreakdownError("GMRES breakdown: operator singular on the Krylov subspace");
            }
            cs[k] = hess(k, k) / denom;
            sn[k] = hess(k + 1, k) / denom;
            hess(k, k) = denom;
            hess(k + 1, k) = 0.0;
            const double gk = g[k];
            g[k] = cs[k] * gk;
            g[k + 1] = -sn[k] * gk;
            residual = std::abs(g[k + 1]);

            if (residual <= target) {
                update_solution(k + 1);
                return x;
            }
            if (arnoldi_h == 0.0 || arnoldi_h <= 1e-14 * wnorm_before) {
                // Invariant Krylov subspace with residual still above target.
                throw BreakdownError(
                    "GMRES breakdown: Arnoldi produced a zero vector with nonzero residual");
            }
            basis.col(k + 1) = w / arnoldi_h;
        }
        update_solution(k);
    }
    op.apply(x, tmp);
    residual = (b - tmp).norm();
    if (residual <= target) {
        return x;
    }
    throw NoConvergenceError("GMRES did not reach the residual tolerance", iters,
                             residual / bnorm);
}

namespace {

VectorXd psi_apply_impl(const HawkesNetwork& net, bool transposed, double t, const VectorXd& v,
                        double tol) {
    check_action_inputs(t, v, tol);
    if (v.size() != net.m) {
        throw std::invalid_argument("vector length does not match user count");
    }
    if (t == 0.0) {
        return v;
    }
    ShiftedOperator op(net, transposed);
    VectorXd endpoint = expm_action(op, t, v, tol);
    VectorXd rhs = endpoint - v;
    if (rhs.norm() == 0.0) {
        // exp(Mt)v == v. For our spectra that means Mv == 0, where the
        // removable form gives int_0^t exp(Ms)v ds = t v exactly.
        VectorXd mv(net.m);
        op.apply(v, mv);
        if (mv.norm() == 0.0) {
            return endpoint + (net.omega * t) * v;
        }
        return endpoint;
    }
    try {
        VectorXd solved = gmres_solve(op, rhs, tol, kDefaultGmresRestart,
                                      10 * static_cast<long>(net.m));
        return endpoint + net.omega * solved;
    } catch (const NoConvergenceError&) {
    } catch (const BreakdownError&) {
    }
    // Near-singular shift (eigenvalue of A near omega): the inverse in the
    // closed form is removable, Psi(t)v = exp(Mt)v + omega int_0^t exp(Ms)v ds.
    ExpmWithIntegral result = expm_action_with_integral(op, t, v, tol);
    return result.endpoint + net.omega * result.integral;
}

} // namespace

VectorXd psi_apply(const HawkesNetwork& net, double t, const VectorXd& v, double tol) {
    return psi_apply_impl(net, false, t, v, tol);
}

VectorXd psi_transpose_apply(const HawkesNetwork& net, double t, const VectorXd& v, double tol) {
    return psi_apply_impl(net, true, t, v, tol);
}

MatrixXd psi_dense(const HawkesNetwork& net, double t) {
    if (net.m > kDenseOracleMaxUsers) {
        throw TooLargeError("dense Psi oracle supports at most " +
                            std::to_string(kDenseOracleMaxUsers) + " users");
    }
    if (!(t >= 0.0) || !std::isfinite(t)) {
        throw std::invalid_argument("time must be nonnegative and finite");
    }
    const Index n = net.m;
    if (t == 0.0) {
        return MatrixXd::Identity(n, n);
    }
    MatrixXd shifted = net.A.dense();
    shifted.diagonal().array() -= net.omega;
    const MatrixXd expm = (shifted * t).exp();
    MatrixXd rhs = expm - MatrixXd::Identity(n, n);
    const MatrixXd solved = Eigen::PartialPivLU<MatrixXd>(shifted).solve(rhs);
    return expm + net.omega * solved;
}

std::vector<VectorXd> psi_series_terms(const HawkesNetwork& net, double t, const VectorXd& v,
                                       int max_generation, double dt) {
    if (net.m > 200) {
        throw TooLargeError("series oracle supports at most 200 users");
    }
    if (v.size() != net.m) {
        throw std::invalid_argument("vector length does not match user count");
    }
    if (max_generation < 0) {
        throw std::invalid_argument("generation count must be nonnegative");
    }
    std::vector<VectorXd> terms;
    terms.reserve(static_cast<std::size_t>(max_generation) + 1);
    terms.push_back(v);
    if (t == 0.0 || max_generation == 0) {
        for (int k = 1; k <= max_generation; ++k) {
            terms.push_back(VectorXd::Zero(net.m));
        }
        return terms;
    }
    if (!(dt > 0.0) || dt > t / 100.0) {
        throw InvalidGridError("grid step must be positive and at most t/100");
    }
    const long n = std::lround(std::ceil(t / dt));
    if (n * net.m > 20'000'000) {
        throw InvalidGridError("grid too fine for the series oracle memory budget");
    }
    const double step = t / static_cast<double>(n);
    const double decay = std::exp(-net.omega * step);

    // prev(:, j) holds G^{(*k-1)}(j*step) v; the convolution with
    // A exp(-omega s) advances one generation per sweep.
    MatrixXd prev(net.m, n + 1);
    for (long j = 0; j <= n; ++j) {
        prev.col(j) = v;
    }
    MatrixXd cur(net.m, n + 1);
    VectorXd integral(net.m), applied(net.m);
    for (int k = 1; k <= max_generation; ++k) {
        integral.setZero();
        cur.col(0).setZero();
        for (long j = 1; j <= n; ++j) {
            // Exact decay of the running integral, trapezoid on the new panel.
            integral = decay * (integral + (step / 2.0) * prev.col(j - 1)) +
                       (step / 2.0) * prev.col(j);
            net.A.multiply(integral, applied);
            cur.col(j) = applied;
        }
        terms.push_back(cur.col(n));
        prev.swap(cur);
    }
    return terms;
}

VectorXd psi_series_oracle(const HawkesNetwork& net, double t, const VectorXd& v,
                           int max_generation, double dt) {
    const std::vector<VectorXd> terms = psi_series_terms(net, t, v, max_generation, dt);
    VectorXd sum = VectorXd::Zero(net.m);
    for (const VectorXd& term : terms) {
        sum += term;
    }
    return sum;
}

SpectralRadiusResult spectral_radius(const HawkesNetwork& net) {
    constexpr double kRelTol = 1e-8;
    constexpr long kMaxIter = 10'000;
    VectorXd x = VectorXd::Constant(net.m, 1.0 / std::sqrt(static_cast<double>(net.m)));
    VectorXd y(net.m);
    double estimate = 0.0;
    for (long k = 1; k <= kMaxIter; ++k) {
        net.A.multiply(x, y);
        y /= net.omega;
        const double norm = y.norm();
        if (norm == 0.0) {
            return {0.0, true, k};
        }
        const double next = norm;  // |x| == 1
        if (k > 1 && std::abs(next - estimate) <= kRelTol * std::max(next, 1e-300)) {
            return {next, true, k};
        }
        estimate = next;
        x = y / norm;
    }
    return {estimate, false, kMaxIter};
}

VectorXd stationary_intensity(const HawkesNetwork& net, const VectorXd& lambda0, double tol) {
    if (lambda0.size() != net.m) {
        throw std::invalid_argument("vector length does not match user count");
    }
    const SpectralRadiusResult rho = spectral_radius(net);
    if (rho.value >= 1.0) {
        throw NotStationaryError("branching matrix spectral radius " + std::to_string(rho.value) +
                                 " is not below 1");
    }
    const double gamma_norm = net.A.one_norm() / net.omega;
    FunctionOperator op(
        net.m,
        [&net](const VectorXd& x, VectorXd& y) {
            net.A.multiply(x, y);
            y = x - y / net.omega;
        },
        1.0 + gamma_norm, static_cast<double>(net.m) - net.A.trace() / net.omega);
    return gmres_solve(op, lambda0, tol, kDefaultGmresRestart, 20 * static_cast<long>(net.m));
}

} // namespace ash
