#include "capgate/rng.hpp"

namespace capgate {

__extension__ using u128 = unsigned __int128;

Rng::Rng(std::uint64_t key) noexcept {
    std::uint64_t x = key;
    for (auto& word : s_) {
        x += 0x9E3779B97F4A7C15ULL;
        word = splitmix64_mix(x);
    }
    // xoshiro forbids the all-zero state; SplitMix64 cannot produce four zeros
    // in a row, but keep the guarantee explicit.
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

std::uint64_t Rng::below(std::uint64_t bound) noexcept {
    u128 m = static_cast<u128>(next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            m = static_cast<u128>(next()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

SeedPath SeedPath::child(std::uint64_t label) const {
    SeedPath out = *this;
    out.path.push_back(label);
    return out;
}

std::uint64_t SeedPath::key() const noexcept {
    std::uint64_t k = splitmix64_mix(base);
    for (std::uint64_t label : path) k = derive_key(k, label);
    return k;
}

std::string SeedPath::to_string() const {
    std::string out = std::to_string(base);
    for (std::uint64_t label : path) {
        out += '/';
        out += std::to_string(label);
    }
    return out;
}

}  // namespace capgate
