#pragma once

#include <cstdint>

namespace rtcimpair {

// splitmix64: 8 bytes of state, identical sequences on every platform. The
// per-flow state bound rules out the big standard engines.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return next_double() < p;
    }

    // standard normal via Box-Muller; one draw consumes two uniforms so the
    // stream stays reproducible without cached state
    double next_gaussian();

    std::uint64_t state() const { return state_; }

  private:
    std::uint64_t state_;
};

// Stateless mix of a seed and a counter; one uniform draw per (seed, n) pair.
// Used where decisions must not depend on processing order.
std::uint64_t mix_u64(std::uint64_t seed, std::uint64_t n);
double mix_double(std::uint64_t seed, std::uint64_t n);

}  // namespace rtcimpair
