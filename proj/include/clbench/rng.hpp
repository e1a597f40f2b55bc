#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace clbench {

// All randomness in the library flows through this wrapper. The raw engine is
// std::mt19937_64 but the value transforms (uniform doubles, normals, bounded
// ints, shuffles) are implemented here so that a given seed produces the same
// stream on every platform, independent of the standard library's
// distribution internals.
struct rng64 {
    std::mt19937_64 gen;

    explicit rng64(std::uint64_t seed) : gen(seed) {}

    std::uint64_t next_u64() { return gen(); }

    // uniform in [0, 1) with 53 random bits
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // standard normal via Box-Muller (single value per call, partner discarded,
    // which keeps the stream position a simple function of the call count)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // integer in [0, n), multiply-shift reduction (bias < 2^-64, no rejection loop)
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Fisher-Yates
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }
};

// splitmix64 finalizer, used to derive independent sub-stream seeds from a
// run seed plus a fixed tag. Never feed two different purposes the same tag.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace clbench
