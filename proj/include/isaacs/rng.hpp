#pragma once

#include <cmath>
#include <cstdint>

namespace isaacs {

// ============================================================================
// Deterministic random number generation.
//
// Two flavors:
//   - SmallRng: a sequential splitmix64 stream for sampling tasks where a
//     single consumer draws in a fixed order.
//   - CounterRng: a stateless counter-based generator keyed on
//     (seed, stream, counter). Draws are independent of evaluation order,
//     which makes parallel path simulation reproducible regardless of
//     scheduling.
// Both avoid std::*_distribution, whose output is implementation-defined.
// ============================================================================

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix3(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t s = a;
    s ^= 0x9e3779b97f4a7c15ULL + b + (s << 6) + (s >> 2);
    std::uint64_t z = splitmix64(s);
    s = z ^ (0xc2b2ae3d27d4eb4fULL + c + (z << 6) + (z >> 2));
    return splitmix64(s);
}

// Uniform in (0, 1]; never 0, so it is safe under log().
inline double to_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1p-53;
}

} // namespace detail

class SmallRng {
public:
    explicit SmallRng(std::uint64_t seed) : state_(seed ^ 0x853c49e6748fea9bULL) {
        // Warm up so nearby seeds decorrelate.
        detail::splitmix64(state_);
        detail::splitmix64(state_);
    }

    std::uint64_t next_u64() { return detail::splitmix64(state_); }

    double u01() { return detail::to_unit(next_u64()); }

    /// Uniform on [lo, hi].
    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    double normal() {
        double u1 = u01();
        double u2 = u01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

private:
    std::uint64_t state_;
};

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    double u01(std::uint64_t stream, std::uint64_t counter) const {
        return detail::to_unit(detail::mix3(seed_, stream, counter));
    }

    /// Standard normal keyed by (stream, counter); distinct counters give
    /// independent draws.
    double normal(std::uint64_t stream, std::uint64_t counter) const {
        double u1 = u01(stream, 2 * counter);
        double u2 = u01(stream, 2 * counter + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
};

} // namespace isaacs
