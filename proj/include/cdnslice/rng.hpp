#pragma once

// Portable random helpers. The standard distributions are implementation
// defined, so draws are built directly on the mt19937_64 output stream to keep
// runs byte-identical across toolchains.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace cdnslice {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent child seed for stream `index` of `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x51ED270B27A3C5E1ULL));
}

/// Uniform double in [0,1).
inline double uniform01(Rng& rng) noexcept {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [lo, hi].
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) noexcept {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return lo + static_cast<std::int64_t>(rng());
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return lo + static_cast<std::int64_t>(r % span);
}

inline double exponential(Rng& rng, double mean) noexcept {
    return -mean * std::log1p(-uniform01(rng));
}

/// Index drawn proportionally to `weights`.
inline std::size_t weighted_index(Rng& rng, std::span<const double> weights) noexcept {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform01(rng) * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    return weights.size() - 1;
}

} // namespace cdnslice
