#pragma once

#include <cmath>
#include <cstdint>

namespace homolab {

// Stateless counter-based randomness: every draw is a pure function of
// (seed, counters), so field evaluation and path simulation are independent
// of call order and thread count. The mixer is the splitmix64 finalizer.

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t a,
                                  std::uint64_t b, std::uint64_t c) {
    std::uint64_t h = mix64(seed ^ 0x243f6a8885a308d3ULL);
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    return h;
}

// 53-bit uniform in [0, 1)
inline double u01(std::uint64_t h) { return (h >> 11) * 0x1.0p-53; }

// order-preserving map Z -> N so negative cell indices key cleanly
inline std::uint64_t zigzag(std::int64_t v) {
    return (static_cast<std::uint64_t>(v) << 1) ^
           static_cast<std::uint64_t>(v >> 63);
}

struct NormalPair {
    double n0, n1;
};

// Box-Muller from two counter draws; u is nudged off 0 to keep log finite.
inline NormalPair normal_pair(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b) {
    double u = u01(counter_hash(seed, a, b, 0));
    double v = u01(counter_hash(seed, a, b, 1));
    if (u <= 0.0) u = 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u));
    double phi = 2.0 * M_PI * v;
    return {r * std::cos(phi), r * std::sin(phi)};
}

}  // namespace homolab
