#pragma once

#include <array>
#include <cstdint>

namespace lowrank {

/// One splitmix64 step; advances `state` and returns the mixed output.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// xoshiro256** seeded from splitmix64.
///
/// The stream is fully determined by the algorithm, so any implementation
/// of the same steps reproduces it bit for bit:
///   - state words are four consecutive splitmix64 outputs of the seed
///   - uniform() = (next() >> 11) * 2^-53
///   - normal() is one Box-Muller draw: sqrt(-2 ln(1 - u1)) * cos(2 pi u2)
///   - index(n) rejects draws below 2^64 mod n, then reduces modulo n
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept;

    /// Independent generator for item `stream` of a seeded batch.
    static Rng for_stream(std::uint64_t seed, std::uint64_t stream) noexcept;

    std::uint64_t next() noexcept;
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept;
    double normal() noexcept;
    std::uint64_t index(std::uint64_t n) noexcept;

private:
    std::array<std::uint64_t, 4> s_{};
};

}  // namespace lowrank
