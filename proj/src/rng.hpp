#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace ixrisk {

// splitmix64 mixer; used for seed derivation and as a counter-based engine
// so that logical entities (intersection, instant, lane, ...) own their
// draws independent of iteration order and thread count.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + b + (a << 6) + (a >> 2)));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                              std::uint64_t d) {
    return mix_seed(mix_seed(a, b, c), d);
}

inline std::uint64_t hash_name(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a 64
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline double u01_from_bits(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53; // [0, 1)
}

// Uniform in [0,1) for one logical coordinate; pure function of (seed, key).
inline double counter_u01(std::uint64_t seed, std::uint64_t key) {
    return u01_from_bits(splitmix64(seed ^ splitmix64(key)));
}

// splitmix64 as a stream: cheap to construct per logical key.
struct SplitMixEngine {
    using result_type = std::uint64_t;
    std::uint64_t state = 0;

    explicit SplitMixEngine(std::uint64_t seed = 0) : state(seed) {}
    std::uint64_t operator()() { return splitmix64(state++); }
    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return UINT64_MAX; }
};

// Fixed-algorithm samplers. std::*_distribution is implementation-defined,
// which would tie output bytes to the standard library version; these pin
// the algorithm instead.
template <typename Engine>
class BasicRng {
public:
    explicit BasicRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t bits() { return engine_(); }

    double uniform() { return u01_from_bits(engine_()); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    double normal(double mean = 0.0, double sd = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + sd * spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return mean + sd * r * std::cos(theta);
    }

    double exponential(double mean) {
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return -mean * std::log(u);
    }

    // Knuth multiplication for small lambda, normal approximation above.
    std::int64_t poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        if (lambda < 30.0) {
            const double limit = std::exp(-lambda);
            double prod = uniform();
            std::int64_t k = 0;
            while (prod > limit) {
                prod *= uniform();
                ++k;
            }
            return k;
        }
        const double v = normal(lambda, std::sqrt(lambda));
        return v <= 0.0 ? 0 : static_cast<std::int64_t>(std::llround(v));
    }

private:
    Engine engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

using Rng = BasicRng<std::mt19937_64>;
using FastRng = BasicRng<SplitMixEngine>;

} // namespace ixrisk
