#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace snclt {

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of an independent sub-stream identified by `keys` under `master`.
/// A pure function of its arguments, so replication r always sees the same stream
/// no matter which worker runs it.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = splitmix64(master);
    for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
    return h;
}

// Stream tags so pilot, reference and replication streams never collide.
namespace stream {
inline constexpr std::uint64_t replication = 1;
inline constexpr std::uint64_t pilot = 2;
inline constexpr std::uint64_t reference = 3;
inline constexpr std::uint64_t moment_pilot = 4;
}  // namespace stream

}  // namespace snclt
