#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <string_view>

namespace jdbpr {

// Deterministic, library-independent random numbers. Distributions are
// implemented locally (Box-Muller) because std::normal_distribution output is
// implementation-defined and channel draws must be bit-identical across
// toolchains for regression purposes.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Substream seed derivation: hash the root seed together with a short tag and
// up to three indices. Distinct (tag, indices) tuples give independent streams;
// the mapping is stable, so the same draw is reproducible in isolation.
inline std::uint64_t substream_seed(std::uint64_t root, std::string_view tag,
                                    std::uint64_t a = 0, std::uint64_t b = 0,
                                    std::uint64_t c = 0) {
    std::uint64_t h = root ^ 0x6a09e667f3bcc909ULL;
    for (char ch : tag) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(ch));
        splitmix64(h);
    }
    h ^= a + 0x9e3779b97f4a7c15ULL;
    splitmix64(h);
    h ^= b + 0xc2b2ae3d27d4eb4fULL;
    splitmix64(h);
    h ^= c + 0x165667b19e3779f9ULL;
    return splitmix64(h);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // Warm up so nearby seeds decorrelate.
        splitmix64(state_);
        splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller, one value per call (pair cached).
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0)
            u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Circularly-symmetric complex Gaussian CN(0, var): real and imaginary
    // parts are independent N(0, var/2).
    std::complex<double> cgaussian(double var = 1.0) {
        const double s = std::sqrt(var / 2.0);
        const double re = s * gaussian();
        const double im = s * gaussian();
        return {re, im};
    }

  private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace jdbpr
