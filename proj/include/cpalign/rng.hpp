#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cpalign {

/// splitmix64 step; used to spread raw seeds before feeding the engine.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// FNV-1a over bytes. Used instead of std::hash so that stream derivation
/// is identical on every platform and standard library.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seeded random stream with explicitly implemented draws.
///
/// std::mt19937_64 output is fully specified by the standard; the
/// distributions are not, so bounded/real draws are implemented here to keep
/// results reproducible across compilers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        engine_.seed(splitmix64(s));
    }

    /// Independent stream for (global seed, named entity), e.g. one per image.
    /// Streams are order-independent: deriving them does not consume draws
    /// from any other stream.
    static Rng for_stream(std::uint64_t global_seed, std::string_view stream_id) {
        std::uint64_t s = global_seed ^ (fnv1a64(stream_id) + 0x9e3779b97f4a7c15ULL);
        return Rng(splitmix64(s));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Unbiased integer in [0, n). n must be > 0.
    std::uint64_t uniform_below(std::uint64_t n) {
        const std::uint64_t threshold = (~n + 1) % n;  // (2^64 - n) % n
        for (;;) {
            const std::uint64_t x = next_u64();
            if (x >= threshold) return x % n;
        }
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform_below(n)); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

    /// Fisher-Yates shuffle, driven by this stream.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace cpalign
