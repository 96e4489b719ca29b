#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace pdestride::rng {

// Version tag for the seed-derivation scheme. Bump on any change to the
// mixing below; recorded in run manifests.
inline constexpr std::uint64_t kSchemeVersion = 1;

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Derives an independent stream seed from (master seed, operation tag,
// index). All randomness in the toolkit flows through this, so parallel
// schedules cannot change which stream a task sees.
inline std::uint64_t derive(std::uint64_t master, std::string_view tag,
                            std::uint64_t index = 0) {
    std::uint64_t s = master;
    std::uint64_t a = splitmix64(s);
    s ^= fnv1a(tag);
    std::uint64_t b = splitmix64(s);
    s ^= index * 0xd6e8feb86659fd93ULL;
    std::uint64_t c = splitmix64(s);
    return a ^ (b + 0x9e3779b97f4a7c15ULL) ^ c;
}

// Deterministic random stream. mt19937_64 output is fully specified by the
// standard and the transformations below avoid std::*_distribution, whose
// results vary between library implementations.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : engine_(seed) {}

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller; the paired value is cached.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(t);
        have_cached_ = true;
        return r * std::cos(t);
    }

    // Uniform integer in [0, n), unbiased via rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

private:
    std::mt19937_64 engine_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace pdestride::rng
