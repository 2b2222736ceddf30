// Deterministic random number generation for trial simulation.
//
// A small, self-contained xoshiro256++ engine is used instead of <random>
// engines/distributions so that simulated trial paths are bit-identical
// across compilers and standard libraries. Replicate streams are derived
// from a master seed with a splitmix64-based counter scheme, so any single
// replicate can be reproduced in isolation.
#pragma once

#include <cstdint>
#include <cstddef>

namespace bop2 {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += kGolden);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Collapse (master_seed, stream_index) into one well-mixed 64-bit seed.
inline constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t stream_index) {
    std::uint64_t s = master_seed ^ (kGolden * (stream_index + 1));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : state_) w = splitmix64(sm);
    }

    Rng(std::uint64_t master_seed, std::uint64_t stream_index)
        : Rng(derive_seed(master_seed, stream_index)) {}

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_double() < p; }

    /// Unbiased integer in [0, bound) via rejection on the top bits.
    std::uint32_t next_below(std::uint32_t bound) {
        if (bound <= 1) return 0;
        const std::uint64_t threshold = (~std::uint64_t{0} - bound + 1) % bound;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return static_cast<std::uint32_t>(r % bound);
        }
    }

    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint32_t>(last - first);
        for (std::uint32_t i = n; i > 1; --i) {
            const std::uint32_t j = next_below(i);
            auto tmp = first[i - 1];
            first[i - 1] = first[j];
            first[j] = tmp;
        }
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4]{};
};

}  // namespace bop2
