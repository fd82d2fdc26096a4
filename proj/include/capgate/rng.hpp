#pragma once
// Deterministic, path-derived random streams.
//
// Every stochastic computation in capgate draws from a generator that is a
// pure function of a SeedPath: a 64-bit base seed plus an ordered list of
// context labels (experiment id, grid row, grid column, replicate index...).
// Streams are derived by hashing, so any work unit can construct its own
// generator without touching shared state, and results do not depend on how
// work is scheduled across threads.
//
// Generator: xoshiro256** (Blackman & Vigna), seeded through SplitMix64.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string>
#include <vector>

namespace capgate {

// SplitMix64 output function; a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Non-commutative combination of a stream key with one more label.
constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t label) noexcept {
    const std::uint64_t tagged = splitmix64_mix(label + 0x9E3779B97F4A7C15ULL);
    return splitmix64_mix(splitmix64_mix(key ^ 0xD1B54A32D192ED03ULL) ^ tagged);
}

class Rng {
public:
    using result_type = std::uint64_t;

    // Seeds the four state words from successive SplitMix64 outputs of `key`.
    explicit Rng(std::uint64_t key) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return next(); }

    result_type next() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on the open interval (0, 1), 53-bit resolution; never returns 0 or 1.
    double uniform_open() noexcept {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Unbiased integer in [0, bound) (Lemire's multiply-and-reject). bound > 0.
    std::uint64_t below(std::uint64_t bound) noexcept;

    bool operator==(const Rng&) const = default;

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> s_{};
};

struct SeedPath {
    std::uint64_t base = 0;
    std::vector<std::uint64_t> path;

    SeedPath() = default;
    explicit SeedPath(std::uint64_t base_seed) : base(base_seed) {}
    SeedPath(std::uint64_t base_seed, std::initializer_list<std::uint64_t> labels)
        : base(base_seed), path(labels) {}

    [[nodiscard]] SeedPath child(std::uint64_t label) const;

    // Stream key for this path. Equal paths give equal keys.
    [[nodiscard]] std::uint64_t key() const noexcept;

    [[nodiscard]] Rng generator() const noexcept { return Rng(key()); }

    // "base/l0/l1/..." for manifests and diagnostics.
    [[nodiscard]] std::string to_string() const;

    bool operator==(const SeedPath&) const = default;
};

}  // namespace capgate
