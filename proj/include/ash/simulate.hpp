#pragma once

#include <cstdint>
#include <vector>

#include "ash/types.hpp"

namespace ash {

struct SimulateOptions {
    /// Explosion guard: abort once a cascade exceeds this many events.
    std::size_t max_events = 10'000'000;
};

/// Exact simulation by Ogata thinning with the piecewise upper bound taken
/// just after the last event (the exponential-kernel intensity only decays
/// between events). Each accepted event is attributed to a parent drawn
/// proportionally to the intensity contributions at acceptance time, giving
/// one sampled branching structure: generation 0 for exogenous events,
/// parent generation + 1 otherwise.
Cascade simulate_hawkes(const HawkesNetwork& net, const VectorXd& lambda0, double horizon,
                        std::uint64_t seed, const SimulateOptions& opts = {});

/// Independent cascades on streams derived from (seed, cascade index);
/// the result is identical for any thread count.
EventLog simulate_cascades(const HawkesNetwork& net, const VectorXd& lambda0, double horizon,
                           std::size_t count, std::uint64_t seed, int threads = 1,
                           const SimulateOptions& opts = {});

/// Running average over non-overlapping windows, averaged across cascades;
/// a trailing partial window is dropped. Requires horizon >= window and
/// every cascade to cover the averaged span.
IntensityCurve empirical_intensity(const EventLog& log, Index m, double window, double horizon);

/// Cumulative event counts per generation at time t, summed over cascades;
/// counts.sum() equals the number of events up to t.
std::vector<std::size_t> generation_counts(const EventLog& log, double time);

} // namespace ash
