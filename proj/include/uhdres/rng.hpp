#pragma once

#include <cmath>
#include <cstdint>

namespace uhdres {

// Counter-based deterministic generator (SplitMix64). The entire state is
// (seed, counter), so a stream can be checkpointed and resumed exactly.
// uniform() fills the 53-bit mantissa; normal() is Box-Muller without
// caching, consuming two draws per sample.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : seed_(seed), counter_(0) {}
    SeededRng(uint64_t seed, uint64_t counter) : seed_(seed), counter_(counter) {}

    uint64_t next_u64() {
        uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n)
    uint64_t below(uint64_t n) { return static_cast<uint64_t>(uniform01() * static_cast<double>(n)); }

    double normal(double mu = 0.0, double sigma = 1.0) {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mu + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
    }

    uint64_t seed() const { return seed_; }
    uint64_t counter() const { return counter_; }

    // Derive an independent stream for a sub-task without disturbing this one.
    SeededRng fork(uint64_t tag) const {
        SeededRng mix(seed_ ^ (0x6A09E667F3BCC909ULL + tag));
        return SeededRng(mix.next_u64());
    }

private:
    uint64_t seed_;
    uint64_t counter_;
};

}  // namespace uhdres
