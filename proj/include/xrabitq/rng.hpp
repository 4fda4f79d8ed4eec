#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace xrabitq {

// All randomized components draw from std::mt19937_64, whose output sequence
// is fixed by the C++ standard, so indexes built from the same seed are
// reproducible across machines. Distinct subsystems (rotator sampling,
// k-means seeding, synthetic data, ...) derive their own engine seeds from a
// single master seed through SplitMix64 so that streams never overlap.

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Seed for the `stream`-th independent RNG stream of a master seed.
inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t state = seed ^ (0xA0761D6478BD642Full * (stream + 1));
    std::uint64_t s = splitmix64_next(state);
    return splitmix64_next(state) ^ s;
}

/// Deterministic random source. Gaussians use the Marsaglia polar method on
/// top of mt19937_64 instead of std::normal_distribution, whose algorithm is
/// implementation-defined.
class RandomSource {
   public:
    explicit RandomSource(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). Requires n >= 1.
    std::uint64_t bounded(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(engine_()) * n) >> 64);
    }

    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

   private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace xrabitq
