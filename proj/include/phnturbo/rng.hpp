#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace phnturbo {

/// splitmix64 step: advances the state and returns the next 64-bit word.
/// This is the one mixing function used everywhere seeds are derived, so
/// substreams are reproducible from the seed arithmetic alone.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Substream seed for worker/frame `index` under `master`.
/// split(master, i) = splitmix64 applied to master + (i+1)*golden.
inline uint64_t split_seed(uint64_t master, uint64_t index) {
    uint64_t s = master + (index + 1) * 0x9E3779B97F4A7C15ull;
    return splitmix64(s);
}

/// Small self-contained PRNG (splitmix64 stream + Box-Muller normals).
/// std::normal_distribution is avoided on purpose: its output is
/// implementation defined, and the harness promises identical draws for
/// identical seeds within a build (and in practice across platforms).
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound). bound must be >= 1.
    uint64_t uniform_int(uint64_t bound) {
        // Lemire's multiply-shift; bias is negligible for the bounds used
        // here (permutation sizes < 2^32) and the mapping is deterministic.
        __uint128_t m = static_cast<__uint128_t>(next_u64()) * bound;
        return static_cast<uint64_t>(m >> 64);
    }

    /// Standard normal draw.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0,1] so the log is finite.
        double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = uniform();
        double rad = std::sqrt(-2.0 * std::log(u1));
        double ang = 2.0 * 3.14159265358979323846 * u2;
        spare_ = rad * std::sin(ang);
        have_spare_ = true;
        return rad * std::cos(ang);
    }

    /// Circularly symmetric complex normal with variance `var_per_dim`
    /// in each of the real and imaginary parts.
    std::complex<double> cnormal(double var_per_dim) {
        double s = std::sqrt(var_per_dim);
        double re = normal();
        double im = normal();
        return {s * re, s * im};
    }

  private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace phnturbo
