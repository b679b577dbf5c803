#ifndef WEAKSEG_RNG_HPP
#define WEAKSEG_RNG_HPP

#include <cstdint>

namespace weakseg {

// Deterministic 64-bit generator used everywhere randomness is needed.
// The core is SplitMix64 (Steele, Lea & Flood, "Fast splittable pseudorandom
// number generators", OOPSLA 2014): a counter stepped by the golden-ratio
// increment and finalized with two xor-shift multiplies. Being pure integer
// arithmetic it produces identical streams on every platform, and streams can
// be split by key without coordination.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1) with 53 random mantissa bits.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n), n >= 1. Modulo bias is irrelevant at the
    // scales used here (n is a handful of organs or slices).
    std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

    double uniform_range(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Approximate standard normal via the Irwin-Hall sum of 12 uniforms
    // minus 6. Chosen over Box-Muller so the result never touches libm
    // transcendentals and stays bit-identical across platforms. Tails are
    // truncated at +/-6 sigma, which is immaterial for phantom noise.
    double gaussian() {
        double s = 0.0;
        for (int i = 0; i < 12; ++i) s += uniform();
        return s - 6.0;
    }

private:
    std::uint64_t state_;
};

// Key mixing for per-stream seeds: feed each key through one SplitMix64 step.
inline std::uint64_t mix_seed(std::uint64_t a) {
    return Rng(a).next_u64();
}
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return Rng(mix_seed(a) ^ b).next_u64();
}
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return Rng(mix_seed(a, b) ^ c).next_u64();
}
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                              std::uint64_t d) {
    return Rng(mix_seed(a, b, c) ^ d).next_u64();
}

} // namespace weakseg

#endif
