#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace binattn {

// All randomness in the library flows through a seeded mt19937_64.
// Sub-streams are derived with splitmix64 so that (seed, stream_id) pairs
// give statistically independent, reproducible sequences. Uniform and
// Gaussian draws are generated from raw 64-bit words directly instead of
// std::*_distribution, whose output is not pinned by the standard; this
// keeps results bit-identical across standard libraries.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Independent stream: mixes (seed, stream_id) into a full mt19937_64 seed.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream_id = 0) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    std::uint64_t mix = a ^ (stream_id * 0xda942042e4dd58b5ULL + 0x2545f4914f6cdd1dULL);
    return std::mt19937_64(splitmix64(mix));
}

// Uniform double in (0, 1]: 53 mantissa bits, never exactly zero (safe for log).
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

// Standard normal via Box-Muller. Deterministic given the rng word stream.
class GaussianSource {
public:
    explicit GaussianSource(std::mt19937_64& rng) : rng_(rng) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01(rng_);
        const double u2 = uniform01(rng_);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64& rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace binattn
