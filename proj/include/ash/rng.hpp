#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace ash {

/// SplitMix64; expands seeds into generator state.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

/// xoshiro256++ seeded through SplitMix64. A fixed algorithm here (rather
/// than std:: distributions) keeps seeded runs bitwise reproducible across
/// platforms and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& s : state_) {
            s = sm.next();
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in (0, 1]; safe under log.
    double next_unit_closed() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Uniform in [0, 1).
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    double exponential(double rate) { return -std::log(next_unit_closed()) / rate; }

    /// Unbiased integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = n == 0 ? 0 : ~std::uint64_t{0} - ~std::uint64_t{0} % n;
        std::uint64_t x = next_u64();
        while (x >= limit) {
            x = next_u64();
        }
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::swap(values[i - 1], values[static_cast<std::size_t>(next_below(i))]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
};

/// Per-cascade stream key from (seed, cascade index); cascades drawn from
/// derived streams are independent of scheduling order.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 sm(seed ^ (0x9E3779B97F4A7C15ULL * (index + 1)));
    return sm.next();
}

} // namespace ash
