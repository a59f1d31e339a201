#pragma once

#include <cstdint>
#include <random>

namespace formcount {

/// All library randomness is drawn from this engine.
using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed value of substream `stream` under master `seed`.
///
/// Work is split into fixed-size blocks indexed independently of the worker
/// count, and every block draws from its own substream. Results therefore depend
/// only on (seed, block layout), never on scheduling.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) noexcept
{
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    std::uint64_t t = a ^ (stream * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL);
    return splitmix64(t);
}

inline Engine substream(std::uint64_t seed, std::uint64_t stream)
{
    const std::uint64_t s = substream_seed(seed, stream);
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Engine(seq);
}

} // namespace formcount
