#include "rtcimpair/rng.hpp"

#include <cmath>
#include <numbers>

namespace rtcimpair {

double SplitMix64::next_gaussian() {
    // Box-Muller; u1 nudged away from 0 so log stays finite.
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t mix_u64(std::uint64_t seed, std::uint64_t n) {
    SplitMix64 g(seed ^ (n * 0xff51afd7ed558ccdULL + 0x2d358dccaa6c78a5ULL));
    return g.next_u64();
}

double mix_double(std::uint64_t seed, std::uint64_t n) {
    return static_cast<double>(mix_u64(seed, n) >> 11) * 0x1.0p-53;
}

}  // namespace rtcimpair
