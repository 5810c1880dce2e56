#pragma once

#include <cstdint>
#include <string_view>

namespace kaczmarz {

/// 64-bit finalizer used by SplitMix64 (Steele, Lea & Flood / Stafford mix13).
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

/// SplitMix64: the project-wide pseudo-random generator. Fixed here so that
/// "seed 42" denotes the same matrix and the same row choices on every
/// platform; nothing in the library draws randomness from anywhere else.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    /// Uniform on [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Unbiased integer in [0, n); rejection sampling, n >= 1.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = n * (0xffffffffffffffffULL / n);
        std::uint64_t x = next();
        while (x >= limit) x = next();
        return x % n;
    }

  private:
    std::uint64_t state_;
};

namespace detail {
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}
}  // namespace detail

/// Deterministic sub-stream seed: hash of (base, tag, index). Used to hand
/// every benchmark trial and probe its own independent stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index) {
    std::uint64_t h = mix64(base ^ 0x6a09e667f3bcc909ULL);
    h = mix64(h ^ detail::fnv1a(tag));
    h = mix64(h ^ index);
    return h;
}

}  // namespace kaczmarz
