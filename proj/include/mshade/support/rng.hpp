#pragma once

#include <cstdint>

namespace mshade {

// splitmix64: the committed PRNG for every seeded choice in the toolkit.
// State advances by the golden-gamma increment; the output is the mixed state.
// See docs/determinism.md for the exact contract.
inline uint64_t splitmix64_next(uint64_t &state) {
    state += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Keyed derivation of one 64-bit word from (seed, a, b).
// derive64(seed, a, b): state := seed; next; state ^= a; next; state ^= b; return next.
inline uint64_t derive64(uint64_t seed, uint64_t a, uint64_t b) {
    uint64_t s = seed;
    splitmix64_next(s);
    s ^= a;
    splitmix64_next(s);
    s ^= b;
    return splitmix64_next(s);
}

// Maps a 64-bit word to f32 in [0, 1): top 24 bits over 2^24.
inline float unit_f32(uint64_t x) {
    return static_cast<float>(x >> 40) * (1.0f / 16777216.0f);
}

// Maps a 64-bit word to f32 in [0, 1] (closed): top 24 bits over 2^24 - 1.
inline float closed_unit_f32(uint64_t x) {
    return static_cast<float>(x >> 40) * (1.0f / 16777215.0f);
}

// Sequential generator wrapping splitmix64 with unbiased bounded draws.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next() { return splitmix64_next(state_); }

    // Uniform draw in [0, n) via rejection sampling; n > 0.
    uint64_t below(uint64_t n) {
        uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next();
            if (r >= threshold)
                return r % n;
        }
    }

    bool chance_in(uint64_t num, uint64_t den) { return below(den) < num; }

    float unit() { return unit_f32(next()); }

private:
    uint64_t state_;
};

} // namespace mshade
