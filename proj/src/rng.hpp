#pragma once

#include <cstdint>

namespace slimdet {

// Splitmix64 generator. Every seeded path in the toolkit (augmentations,
// synthetic data, weight init, shuffling) goes through this so identical
// seeds reproduce bit-for-bit across platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    float uniform(float lo, float hi) {
        return lo + static_cast<float>(uniform()) * (hi - lo);
    }

    // Uniform integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // Approximate standard normal (sum of uniforms keeps it portable and cheap).
    float normal() {
        float s = 0.0f;
        for (int i = 0; i < 12; ++i) s += static_cast<float>(uniform());
        return s - 6.0f;
    }

    // Derive an independent stream, e.g. per-sample from a global seed.
    Rng fork(uint64_t salt) {
        Rng r(state_ ^ (0x632be59bd9b4e019ull * (salt + 1)));
        r.next_u64();
        return r;
    }

private:
    uint64_t state_;
};

}  // namespace slimdet
