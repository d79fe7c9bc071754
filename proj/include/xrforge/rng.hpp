// rng.hpp - counter-based deterministic random streams.
//
// Every random draw in the pipeline comes from a SplitMix64-style stream
// addressed by a 64-bit key. Draw i is a pure function of (key, i), so
// results never depend on thread scheduling, and voxel-indexed consumers
// (noise injection) can sample out of order.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace xrforge {

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;
inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

constexpr std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = kFnvOffset) {
    for (char c : bytes) {
        h ^= static_cast<std::uint8_t>(c);
        h *= kFnvPrime;
    }
    return h;
}

constexpr std::uint64_t fnv1a_u64(std::uint64_t v, std::uint64_t h = kFnvOffset) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= kFnvPrime;
    }
    return h;
}

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Derive a stream key from a global seed, an entity id, and a purpose tag.
inline std::uint64_t stream_key(std::uint64_t seed, std::string_view id, std::string_view tag) {
    std::uint64_t h = fnv1a_u64(seed);
    h = fnv1a(id, h);
    h = fnv1a("\x1f", h); // separator so ("ab","c") != ("a","bc")
    h = fnv1a(tag, h);
    return h;
}

/// Counter-based uniform stream: draw i = mix64(key + (i+1)*golden).
class RandomStream {
public:
    explicit RandomStream(std::uint64_t key) : key_(key) {}

    std::uint64_t bits_at(std::uint64_t i) const {
        return mix64(key_ + (i + 1) * kGolden);
    }

    /// Uniform double in [0, 1), 53 mantissa bits.
    double uniform_at(std::uint64_t i) const {
        return static_cast<double>(bits_at(i) >> 11) * 0x1.0p-53;
    }

    std::uint64_t next_bits() { return bits_at(counter_++); }
    double next_uniform() { return uniform_at(counter_++); }

    double next_uniform(double lo, double hi) {
        return lo + next_uniform() * (hi - lo);
    }

    /// Uniform integer in [lo, hi] inclusive.
    int next_int(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_bits() % span);
    }

    /// Standard normal for logical index i; consumes no stream state.
    /// Box-Muller on draws (2i, 2i+1) of this stream's counter space.
    double gaussian_at(std::uint64_t i) const {
        const double u1 = uniform_at(2 * i);
        const double u2 = uniform_at(2 * i + 1);
        // 1-u1 keeps the log argument in (0,1].
        return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(6.283185307179586477 * u2);
    }

    std::uint64_t counter() const { return counter_; }
    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace xrforge
