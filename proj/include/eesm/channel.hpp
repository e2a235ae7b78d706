#pragma once

// Per-packet frequency-selective MIMO channels, SVD precoders and the
// additive channel-estimation-error model.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "eesm/errors.hpp"
#include "eesm/linalg.hpp"
#include "eesm/rng.hpp"

namespace eesm::channel {

using linalg::CMatrix;
using linalg::cplx;

/// Antenna/stream geometry plus the tapped-delay-line profile.
struct ChannelConfig {
    std::size_t n_t = 2;
    std::size_t n_r = 2;
    std::size_t n_s = 2;
    std::size_t n_sc = 242;
    std::size_t n_taps = 4;
    double decay = 1.0;  // tap power ~ exp(-decay * tap)
    std::uint64_t seed = 1;

    void validate() const {
        if (n_t < 1 || n_r < 1) throw ConfigError("antenna counts must be >= 1");
        if (n_s < 1 || n_s > std::min(n_t, n_r)) throw ConfigError("n_s must satisfy 1 <= n_s <= min(n_t, n_r)");
        if (n_sc < 1) throw ConfigError("n_sc must be >= 1");
        if (n_taps < 1) throw ConfigError("n_taps must be >= 1");
        if (!(decay >= 0.0) || !std::isfinite(decay)) throw ConfigError("decay must be finite and >= 0");
    }
};

/// One packet's true channel and precoder on every subcarrier.
struct ChannelRealization {
    std::vector<CMatrix> H;  // n_sc entries, each n_r x n_t
    std::vector<CMatrix> F;  // n_sc entries, each n_t x n_s
    std::size_t packet = 0;
    std::uint64_t seed = 0;
};

struct ErrorModel {
    double sigma_e2 = 0.0;  // per-entry variance of the estimation error
};

struct ErrorInjection {
    CMatrix H_hat;
    CMatrix delta_H;
};

/// Normalised exponential power-delay profile (sums to one).
inline std::vector<double> tap_powers(std::size_t n_taps, double decay) {
    std::vector<double> p(n_taps);
    double total = 0.0;
    for (std::size_t l = 0; l < n_taps; ++l) {
        p[l] = std::exp(-decay * static_cast<double>(l));
        total += p[l];
    }
    for (auto& v : p) v /= total;
    return p;
}

/// Right singular vectors of the `n_s` strongest modes of `H`, as columns.
inline CMatrix svd_precoder(const CMatrix& H, std::size_t n_s) {
    if (n_s < 1 || n_s > std::min(H.rows(), H.cols())) {
        throw DimensionError("svd_precoder: n_s must be in [1, min(rows, cols)]");
    }
    if (linalg::max_abs(H) == 0.0) throw ConfigError("svd_precoder: degenerate (all-zero) channel");
    return linalg::svd(H).V.left_cols(n_s);
}

/// H_i = sum_l G_l exp(-2 pi j l i / n_sc), G_l i.i.d. ZMCSCG with power p_l.
/// Pure in (cfg, packet_index).
inline ChannelRealization generate_channel(const ChannelConfig& cfg, std::size_t packet_index) {
    cfg.validate();
    const std::uint64_t seed = derive_seed(cfg.seed, packet_index, StreamTag::channel);
    Rng rng(seed);

    const auto powers = tap_powers(cfg.n_taps, cfg.decay);
    std::vector<CMatrix> taps;
    taps.reserve(cfg.n_taps);
    for (std::size_t l = 0; l < cfg.n_taps; ++l) {
        CMatrix g(cfg.n_r, cfg.n_t);
        for (auto& v : g.data()) v = rng.zmcscg(powers[l]);
        taps.push_back(std::move(g));
    }

    ChannelRealization out;
    out.packet = packet_index;
    out.seed = seed;
    out.H.reserve(cfg.n_sc);
    out.F.reserve(cfg.n_sc);
    for (std::size_t i = 0; i < cfg.n_sc; ++i) {
        CMatrix h(cfg.n_r, cfg.n_t);
        for (std::size_t l = 0; l < cfg.n_taps; ++l) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(l * i % cfg.n_sc) /
                               static_cast<double>(cfg.n_sc);
            h += taps[l] * std::polar(1.0, ang);
        }
        out.F.push_back(svd_precoder(h, cfg.n_s));
        out.H.push_back(std::move(h));
    }
    return out;
}

/// H_hat = H + dH with dH entries i.i.d. ZMCSCG of variance sigma_e2.
inline ErrorInjection inject_error(const CMatrix& H, const ErrorModel& em, Rng& rng) {
    if (!(em.sigma_e2 >= 0.0)) throw ConfigError("sigma_e2 must be >= 0");
    CMatrix delta(H.rows(), H.cols());
    if (em.sigma_e2 > 0.0) {
        for (auto& v : delta.data()) v = rng.zmcscg(em.sigma_e2);
    }
    return {H + delta, std::move(delta)};
}

/// Estimation-error variance rule 1 / (n_t * SNR).
inline double default_sigma_e2(std::size_t n_t, double snr_linear) {
    if (n_t < 1) throw ConfigError("n_t must be >= 1");
    if (!(snr_linear > 0.0)) throw ConfigError("snr must be > 0");
    return 1.0 / (static_cast<double>(n_t) * snr_linear);
}

}  // namespace eesm::channel
