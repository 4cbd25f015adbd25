#pragma once

#include <algorithm>
#include <cstdint>
#include <iterator>

namespace coupler {

// Counter-based randomness: every draw is a pure function of (key, counter),
// so replications can be sharded across threads and replayed bit-exactly.
using rng_key = std::uint64_t;

namespace rng_detail {

inline constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ull;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
}

inline constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
    return mix64(h + golden + mix64(v + golden));
}

} // namespace rng_detail

inline constexpr rng_key derive_key(rng_key parent, std::uint64_t tag) {
    return rng_detail::combine(parent, tag);
}

inline constexpr rng_key derive_key(rng_key parent, std::uint64_t a, std::uint64_t b) {
    return rng_detail::combine(rng_detail::combine(parent, a), b);
}

// Stream tags; distinct tags give independent streams under one key.
namespace stream_tag {
inline constexpr std::uint64_t stub = 1;    // first picks of stub pairing events
inline constexpr std::uint64_t pair = 2;    // per-pair edge uniforms
inline constexpr std::uint64_t aux = 3;     // rejections, phantom draws, shuffles
inline constexpr std::uint64_t attrs = 4;   // attribute sequence generation
inline constexpr std::uint64_t roots = 5;   // root vertex picks
inline constexpr std::uint64_t limit = 6;   // limit-tree attachment
inline constexpr std::uint64_t splice = 7;  // independent-copies splicing
inline constexpr std::uint64_t repair = 8;  // degree balance repair
} // namespace stream_tag

inline constexpr double u01_from_bits(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Uniform in [0,1) at a fixed (key, index); index spaces with different keys
/// never interact.
inline double indexed_uniform(rng_key key, std::uint64_t index) {
    return u01_from_bits(rng_detail::combine(key, index));
}

/// Per-pair uniform shared by the graph and tree constructions. Unordered
/// pairs are canonicalized to (min, max); ordered pairs keep direction.
inline double pair_uniform(rng_key key, std::uint32_t i, std::uint32_t j, bool ordered) {
    if (!ordered && i > j) std::swap(i, j);
    const std::uint64_t packed = (static_cast<std::uint64_t>(i) << 32) | j;
    return u01_from_bits(rng_detail::combine(key, packed));
}

/// Stateful counter over a fixed key; cheap to copy, never shared across
/// threads.
struct rng_stream {
    rng_key key = 0;
    std::uint64_t counter = 0;

    explicit rng_stream(rng_key k = 0) : key(k) {}

    std::uint64_t next_bits() { return rng_detail::combine(key, counter++); }

    double next_u01() { return u01_from_bits(next_bits()); }

    /// Uniform in [0, bound) via 128-bit multiply; bias is O(bound / 2^64).
    std::uint64_t next_below(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_bits()) * bound) >> 64);
    }

    template <class RandomIt>
    void shuffle(RandomIt first, RandomIt last) {
        const auto n = static_cast<std::uint64_t>(std::distance(first, last));
        for (std::uint64_t i = n; i > 1; --i) {
            const std::uint64_t j = next_below(i);
            std::swap(first[i - 1], first[j]);
        }
    }
};

} // namespace coupler
