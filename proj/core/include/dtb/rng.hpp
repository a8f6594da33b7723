#pragma once

#include <array>
#include <cstdint>

namespace dtb {

/// xoshiro256** seeded through splitmix64.
///
/// Every derived draw below is defined in terms of next_u64() with fixed
/// arithmetic so that a seed produces the same stream on any platform
/// (std::*_distribution is implementation-defined and is not used).
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // (next_u64() >> 11) * 2^-53, in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] by rejection (no modulo bias).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    // Standard normal via Box-Muller on two uniforms (the second value is discarded).
    double normal();

    static std::uint64_t splitmix64(std::uint64_t& state);

private:
    std::array<std::uint64_t, 4> s_{};
};

}  // namespace dtb
