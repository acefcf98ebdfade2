#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cbvar {

/// Engine used for every stochastic routine. Streams are derived from a
/// master seed plus integer tags so results never depend on scheduling.
using Rng = std::mt19937_64;

namespace rng {

/// splitmix64 finalizer.
constexpr std::uint64_t mix(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic sub-seed for (master, tag0, tag1, ...).
inline std::uint64_t derive(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = mix(master);
    for (auto t : tags) s = mix(s ^ mix(t + 0x632be59bd9b4e019ULL));
    return s;
}

inline Rng stream(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
    return Rng(derive(master, tags));
}

}  // namespace rng
}  // namespace cbvar
