#pragma once

#include <vector>

#include "ash/linop.hpp"
#include "ash/types.hpp"

namespace ash {

/// Default tolerances keep linear-algebra error two orders below the
/// optimization tolerances used downstream.
constexpr double kDefaultExpmTol = 1e-10;
constexpr double kDefaultGmresTol = 1e-10;
constexpr int kDefaultGmresRestart = 30;

/// y ~= exp(Op * t) v by unit-1-norm substeps, each a truncated Taylor sum
/// around the trace-shifted operator.
VectorXd expm_action(const LinearOperator& op, double t, const VectorXd& v,
                     double tol = kDefaultExpmTol);

struct ExpmWithIntegral {
    VectorXd endpoint;  // exp(Op t) v
    VectorXd integral;  // int_0^t exp(Op s) v ds
};

/// Same substep sweep, additionally accumulating the time integral of the
/// action via the phi_1 series. Valid for singular Op.
ExpmWithIntegral expm_action_with_integral(const LinearOperator& op, double t, const VectorXd& v,
                                           double tol = kDefaultExpmTol);

/// Restarted GMRES; throws NoConvergenceError / BreakdownError.
VectorXd gmres_solve(const LinearOperator& op, const VectorXd& b,
                     double tol = kDefaultGmresTol, int restart = kDefaultGmresRestart,
                     long max_iter = -1 /* -1: 10 * size */);

/// Psi(t) v = exp(Mt) v + omega M^{-1} (exp(Mt) v - v) with M = A - omega I.
/// Falls back to the integral form omega * int_0^t exp(Ms) v ds when the
/// shifted system resists GMRES (the closed form's singularity at
/// rho(A/omega) = 1 is removable).
VectorXd psi_apply(const HawkesNetwork& net, double t, const VectorXd& v,
                   double tol = kDefaultExpmTol);

/// Psi(t)^T v; the closed form commutes, so this is psi_apply in M^T.
VectorXd psi_transpose_apply(const HawkesNetwork& net, double t, const VectorXd& v,
                             double tol = kDefaultExpmTol);

/// Hard cap on the dense oracle; beyond it the matrix-free path is the
/// only supported route.
constexpr Index kDenseOracleMaxUsers = 500;

/// Full Psi(t) by dense scaling-and-squaring exponential and dense solve.
MatrixXd psi_dense(const HawkesNetwork& net, double t);

/// Quadrature oracle: sums the generation kernels G^{(*k)}(t) v for
/// k = 0..max_generation on a uniform grid (trapezoid rule; error
/// O(rho(Gamma)^{K+1}) truncation + O(dt^2) quadrature).
VectorXd psi_series_oracle(const HawkesNetwork& net, double t, const VectorXd& v,
                           int max_generation, double dt);

/// Per-generation terms G^{(*k)}(t) v, k = 0..max_generation, same grid.
std::vector<VectorXd> psi_series_terms(const HawkesNetwork& net, double t, const VectorXd& v,
                                       int max_generation, double dt);

struct SpectralRadiusResult {
    double value = 0.0;
    bool converged = false;
    long iterations = 0;
};

/// rho(A/omega) by power iteration (relative tolerance 1e-8, cap 10000).
SpectralRadiusResult spectral_radius(const HawkesNetwork& net);

/// mu = (I - Gamma)^{-1} lambda0, the t -> infinity limit of Psi(t) lambda0.
/// Throws NotStationaryError when rho(Gamma) >= 1.
VectorXd stationary_intensity(const HawkesNetwork& net, const VectorXd& lambda0,
                              double tol = kDefaultGmresTol);

} // namespace ash
