#pragma once

#include <cstdint>
#include <random>

namespace casebias {

/// SplitMix64 finalizer. Used to derive statistically independent child seeds
/// from a master seed and a stream index.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
    return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

using Engine = std::mt19937_64;

/// Uniform double in [0,1) from the top 53 bits; identical across standard
/// library implementations, unlike std::uniform_real_distribution.
inline double uniform01(Engine& eng) noexcept {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound) by rejection (no modulo bias).
inline std::uint64_t uniform_below(Engine& eng, std::uint64_t bound) noexcept {
    const std::uint64_t limit = bound == 0 ? 0 : (~std::uint64_t{0} - bound + 1) % bound;
    for (;;) {
        const std::uint64_t r = eng();
        if (r >= limit) return r % bound;
    }
}

}  // namespace casebias
