#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "ash/psi.hpp"
#include "ash/rng.hpp"
#include "ash/types.hpp"

namespace ash::testing {

/// Random sparse network with roughly avg_degree entries per column,
/// rescaled so rho(A/omega) hits target_rho.
inline HawkesNetwork make_random_network(Rng& rng, Index m, double avg_degree, double omega,
                                         double target_rho) {
    const std::size_t want = static_cast<std::size_t>(
        std::max(1.0, avg_degree * static_cast<double>(m)));
    std::set<std::pair<Index, Index>> coords;
    while (coords.size() < want &&
           coords.size() < static_cast<std::size_t>(m) * static_cast<std::size_t>(m)) {
        coords.emplace(static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(m))),
                       static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(m))));
    }
    std::vector<Triplet> entries;
    entries.reserve(coords.size());
    for (const auto& [r, c] : coords) {
        entries.push_back({r, c, rng.uniform(0.1, 1.0)});
    }
    HawkesNetwork net = make_network(m, std::move(entries), omega);
    SpectralRadiusResult rho = spectral_radius(net);
    if (rho.value <= 0.0) {
        // Nilpotent draw: anchor the spectrum with one self-loop.
        std::vector<Triplet> patched(net.A.entries().begin(), net.A.entries().end());
        bool has_diag = false;
        for (const Triplet& e : patched) {
            if (e.row == 0 && e.col == 0) {
                has_diag = true;
            }
        }
        if (!has_diag) {
            patched.push_back({0, 0, 0.5});
        }
        net = make_network(m, std::move(patched), omega);
        rho = spectral_radius(net);
    }
    const double scale = target_rho / rho.value;
    std::vector<Triplet> scaled(net.A.entries().begin(), net.A.entries().end());
    for (Triplet& e : scaled) {
        e.value *= scale;
    }
    return make_network(m, std::move(scaled), omega);
}

inline VectorXd random_vector(Rng& rng, Index m, double lo, double hi) {
    VectorXd v(m);
    for (Index i = 0; i < m; ++i) {
        v[i] = rng.uniform(lo, hi);
    }
    return v;
}

/// Kolmogorov-Smirnov p-value of samples against a CDF.
template <typename Cdf>
double ks_test_pvalue(std::vector<double> samples, Cdf cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = 2.0 * std::exp(-2.0 * k * k * lambda * lambda);
        p += (k % 2 == 1 ? term : -term);
    }
    return std::clamp(p, 0.0, 1.0);
}

inline double relative_error(const VectorXd& got, const VectorXd& want) {
    const double denom = want.norm();
    return denom > 0 ? (got - want).norm() / denom : (got - want).norm();
}

} // namespace ash::testing
