#pragma once

#include <cmath>
#include <cstdint>

namespace sparsedrop {

// Counter-based randomness: every draw is a pure function of (seed, counters),
// so results never depend on evaluation order or thread count. The mixer is
// the splitmix64 finalizer (Steele/Lea/Flood construction).
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z += UINT64_C(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(mix64(seed) ^ a) ^ b);
}

inline constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                            std::uint64_t c) {
    return mix64(counter_hash(seed, a, b) ^ c);
}

// Top 53 bits mapped to [0, 1).
inline constexpr double unit_interval(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Uniform in [lo, hi).
inline constexpr double uniform(std::uint64_t bits, double lo, double hi) {
    return lo + (hi - lo) * unit_interval(bits);
}

// Standard normal via Box-Muller from two counter draws. The log argument is
// offset away from zero so the result is always finite.
inline double gaussian(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    const double u1 =
        (static_cast<double>(counter_hash(seed, a, b, 0x67) >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = unit_interval(counter_hash(seed, a, b, 0xb5));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

}  // namespace sparsedrop
