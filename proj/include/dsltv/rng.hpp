// Deterministic random streams.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. All value mappings (uniform doubles, Bernoulli, Box-Muller
// normals, bounded integers) are written out here instead of using
// std::*_distribution, whose outputs are implementation-defined; this is what
// makes "same config + same seed -> byte-identical output" hold across
// standard libraries.
//
// Sub-stream derivation: trial k of a run with master seed S uses the engine
// seed derive(S, tag, k), where `tag` identifies the consumer (one tag per
// independent stream family) and the mixing function is two rounds of the
// splitmix64 finalizer. Any trial is therefore reproducible in isolation.
#pragma once

#include <cstdint>
#include <random>

#include "dsltv/common.hpp"

namespace dsltv {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /** splitmix64 finalizer: the 64-bit avalanche used for seed derivation. */
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    /** Documented counter-based sub-stream seed: mix(mix(master ^ tag) ^ index). */
    static std::uint64_t derive(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
        return mix(mix(master ^ tag) ^ index);
    }

    /** Uniform on [0, 1) with 53-bit resolution. */
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /** Uniform on [a, b). */
    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    /** Unbiased integer in [0, bound) by rejection. bound must be >= 1. */
    std::uint64_t integer(std::uint64_t bound) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % bound;
    }

    /** Standard normal via Box-Muller; pairs are cached. */
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01();  // (0, 1]: keeps log() finite
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = kTwoPi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /** Circularly symmetric complex normal with E|z|^2 = variance. */
    Complex cnormal(double variance) {
        const double s = std::sqrt(variance * 0.5);
        const double re = normal();
        const double im = normal();
        return {s * re, s * im};
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace dsltv
