#pragma once

#include <cstdint>
#include <vector>

// Deterministic random streams. The standard library engines are portable but
// its distributions are not, so every draw used by the simulator goes through
// the hand-rolled helpers below: identical seeds give identical sequences on
// any platform.

namespace fedmr {

inline uint64_t splitmix64_next(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stable seed derivation: one base seed fans out into independent streams
/// keyed by (stream, index). Used everywhere a sub-seed is needed so that
/// replays can reconstruct any stream from the run seed alone.
inline uint64_t derive_seed(uint64_t base, uint64_t stream, uint64_t index = 0) {
    uint64_t s = base;
    splitmix64_next(s);
    s ^= 0x632be59bd9b4e019ULL * (stream + 1);
    splitmix64_next(s);
    s ^= 0x9e3779b97f4a7c15ULL * (index + 1);
    return splitmix64_next(s);
}

/// xoshiro256++ with splitmix64 seeding.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        for (auto& word : state_) word = splitmix64_next(seed);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1]; safe as a log() argument.
    double uniform_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Unbiased integer in [0, n); rejection sampling, n >= 1.
    uint64_t uniform_index(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    /// Inclusive integer range.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(uniform_index(static_cast<uint64_t>(hi - lo) + 1));
    }

    /// Standard normal via Box-Muller (cosine branch only, no cached state).
    double normal();

    /// Gamma(alpha, 1) via Marsaglia-Tsang, alpha > 0.
    double gamma(double alpha);

    /// Symmetric Dirichlet(alpha * 1_n) proportion vector.
    std::vector<double> dirichlet(double alpha, int n);

    /// In-place Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (size_t i = values.size(); i > 1; --i) {
            const size_t j = uniform_index(i);
            std::swap(values[i - 1], values[j]);
        }
    }

    /// Uniform permutation of [0..n).
    std::vector<int> permutation(int n);

    /// k distinct values from [0..n), uniform without replacement.
    std::vector<int> sample_without_replacement(int n, int k);

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4];
};

}  // namespace fedmr
