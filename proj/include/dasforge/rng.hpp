#ifndef DASFORGE_RNG_HPP
#define DASFORGE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "dasforge/common.hpp"

namespace dasforge {

// splitmix64 finalizer; used to derive independent per-stage seeds from one
// master seed so every stochastic stage of the pipeline is reproducible.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Seed for a named sub-stream, e.g. derive_seed(master, "noise", trace_index).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
    return mix64(mix64(master ^ hash_tag(tag)) ^ index);
}

// Deterministic RNG wrapper. Distribution code is written out explicitly so
// results do not depend on the standard library's unspecified algorithms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one value per call, the pair partner is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = kTwoPi * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Rayleigh with scale sigma: sqrt(-2 sigma^2 ln U).
    double rayleigh(double sigma) {
        double u = uniform();
        while (u <= 0.0) u = uniform();
        return sigma * std::sqrt(-2.0 * std::log(u));
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire-style rejection-free enough for our purposes: use 64-bit
        // multiply-shift; bias is negligible for the small n used here but we
        // reject to keep streams exactly uniform.
        std::uint64_t threshold = (~n + 1) % n;  // (2^64 - n) mod n
        for (;;) {
            std::uint64_t r = engine_();
            if (r >= threshold) return r % n;
        }
    }

    // Fisher-Yates shuffle of an index vector.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace dasforge

#endif
