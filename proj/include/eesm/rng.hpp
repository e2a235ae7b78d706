#pragma once

// Reproducible random streams.
//
// Every consumer derives its own 64-bit seed from (master seed, index, tag)
// through the SplitMix64 finaliser, then drives a std::mt19937_64. Uniforms
// and Gaussians are produced here rather than through <random> distributions,
// whose algorithms are implementation-defined, so streams are bit-identical
// across standard libraries and independent of worker scheduling.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

namespace eesm {

enum class StreamTag : std::uint64_t {
    channel = 0x43484e4cULL,       // tap draws of a packet's channel
    estimation = 0x45535449ULL,    // channel-estimation error
    symbols = 0x53594d42ULL,       // toy PHY payload and receiver noise
    sampling = 0x53414d50ULL,      // distribution sampling
    oracle = 0x4f52434cULL,        // Monte Carlo oracles
};

/// SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// seed = mix(mix(mix(master) ^ index) ^ tag)
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, StreamTag tag) noexcept {
    return mix64(mix64(mix64(master) ^ index) ^ static_cast<std::uint64_t>(tag));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    Rng(std::uint64_t master, std::uint64_t index, StreamTag tag) : engine_(derive_seed(master, index, tag)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n; }

    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Zero-mean circularly-symmetric complex Gaussian with E|z|^2 = variance.
    std::complex<double> zmcscg(double variance) {
        const double r = std::sqrt(-variance * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        return {r * std::cos(theta), r * std::sin(theta)};
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace eesm
