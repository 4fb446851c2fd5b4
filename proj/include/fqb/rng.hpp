#pragma once

// Pinned random stream used for every seeded computation in the toolkit.
//
// The generator is SplitMix64 (Steele, Lea, Flood 2014): a 64-bit counter
// advanced by the golden-ratio increment 0x9E3779B97F4A7C15 and passed through
// the finalizer
//     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//     z =  z ^ (z >> 31)
// Uniform doubles take the top 53 bits. Normals use the Box-Muller cosine
// branch, consuming two uniforms per draw. std:: distributions are avoided
// because their output is implementation-defined.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace fqb {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// FNV-1a over the bytes of `text`.
constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Seed of an independent sub-stream identified by `key` under `seed`.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t key) noexcept {
    return mix64(seed ^ mix64(key + 0x9E3779B97F4A7C15ULL));
}

class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

    /// Uniform in [0, 1).
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Standard normal.
    double gaussian() noexcept {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer in [0, bound), rejection-sampled to avoid modulo bias.
    std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t limit = -bound % bound;  // 2^64 mod bound
        for (;;) {
            const std::uint64_t r = next();
            if (r >= limit) return r % bound;
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace fqb
