#pragma once

// Uncoded Gray-mapped square-QAM packet simulator. A packet is in error iff
// any hard-decided symbol differs from the transmitted one.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "eesm/errors.hpp"
#include "eesm/l2s.hpp"
#include "eesm/linalg.hpp"
#include "eesm/rng.hpp"

namespace eesm::phy {

using linalg::CMatrix;
using linalg::cplx;

/// Square M-QAM with unit average energy; each axis is a Gray-coded PAM.
class QamConstellation {
public:
    explicit QamConstellation(int order) : order_(order) {
        if (order != 4 && order != 16 && order != 64) throw ConfigError("modulation_order must be 4, 16 or 64");
        levels_ = static_cast<int>(std::lround(std::sqrt(static_cast<double>(order))));
        scale_ = 1.0 / std::sqrt(2.0 * (order - 1) / 3.0);
    }

    int order() const noexcept { return order_; }
    int levels() const noexcept { return levels_; }

    /// Amplitude of PAM position k (0 .. levels-1) before normalisation.
    double amplitude(int k) const { return scale_ * (2.0 * k - (levels_ - 1)); }

    /// Bits (Gray) per axis -> PAM position.
    static int gray_decode(int g) {
        int b = g;
        for (int s = g >> 1; s != 0; s >>= 1) b ^= s;
        return b;
    }
    static int gray_encode(int b) { return b ^ (b >> 1); }

    cplx modulate(int bits_i, int bits_q) const {
        return {amplitude(gray_decode(bits_i)), amplitude(gray_decode(bits_q))};
    }

    /// Nearest-point decision on one axis, returned as Gray bits.
    int slice(double v) const {
        const double pos = (v / scale_ + (levels_ - 1)) / 2.0;
        const int k = std::clamp(static_cast<int>(std::lround(pos)), 0, levels_ - 1);
        return gray_encode(k);
    }

private:
    int order_;
    int levels_;
    double scale_;
};

struct ToyPhyConfig {
    int modulation_order = 64;
    std::size_t symbols_per_packet = 4;  // OFDM symbols, i.e. QAM symbols per stream per subcarrier
    double p_t = 1.0;
    double sigma2 = 0.1;
};

/// Everything the receiver has on one subcarrier.
struct SubcarrierLink {
    const CMatrix* H = nullptr;      // true channel
    const CMatrix* F = nullptr;      // precoder
    const CMatrix* W_hat = nullptr;  // detector built from the estimate
    const CMatrix* H_hat = nullptr;  // channel estimate
};

/// Transmits random QAM through the true channel with ZMCSCG noise, detects
/// with W_hat, scales each stream by the receiver's own gain estimate
/// (W_hat H_hat F)_jj and hard-demaps. Returns true on any symbol error.
inline bool simulate_packet_error(std::span<const SubcarrierLink> links, const ToyPhyConfig& cfg, Rng& rng) {
    const QamConstellation qam(cfg.modulation_order);
    const int levels = qam.levels();
    const double amp = std::sqrt(cfg.p_t);
    for (const auto& link : links) {
        const CMatrix A = *link.H * *link.F;
        const CMatrix G_hat = *link.W_hat * (*link.H_hat * *link.F);
        const CMatrix& W = *link.W_hat;
        const std::size_t n_r = A.rows();
        const std::size_t n_s = A.cols();
        if (W.rows() != n_s || W.cols() != n_r) throw DimensionError("simulate_packet_error: detector shape");

        std::vector<int> bits_i(n_s), bits_q(n_s);
        std::vector<cplx> s(n_s), y(n_r);
        for (std::size_t t = 0; t < cfg.symbols_per_packet; ++t) {
            for (std::size_t j = 0; j < n_s; ++j) {
                bits_i[j] = static_cast<int>(rng.below(static_cast<std::uint64_t>(levels)));
                bits_q[j] = static_cast<int>(rng.below(static_cast<std::uint64_t>(levels)));
                s[j] = qam.modulate(bits_i[j], bits_q[j]);
            }
            for (std::size_t r = 0; r < n_r; ++r) {
                cplx acc = rng.zmcscg(cfg.sigma2);
                for (std::size_t j = 0; j < n_s; ++j) acc += amp * A(r, j) * s[j];
                y[r] = acc;
            }
            for (std::size_t j = 0; j < n_s; ++j) {
                cplx est = 0.0;
                for (std::size_t r = 0; r < n_r; ++r) est += W(j, r) * y[r];
                est /= amp * G_hat(j, j);
                if (qam.slice(est.real()) != bits_i[j] || qam.slice(est.imag()) != bits_q[j]) return true;
            }
        }
    }
    return false;
}

/// Symbol error rate of square M-QAM on AWGN at linear SNR (Es/N0).
inline double qam_ser(int order, double snr_linear) {
    const double m = std::sqrt(static_cast<double>(order));
    const double q = 0.5 * std::erfc(std::sqrt(3.0 * snr_linear / (order - 1)) / std::numbers::sqrt2);
    const double p = 2.0 * (1.0 - 1.0 / m) * q;
    return 1.0 - (1.0 - p) * (1.0 - p);
}

/// AWGN-SISO PER of an uncoded packet of `n_symbols` QAM symbols, tabulated
/// over [lo_db, hi_db]: PER = 1 - (1 - SER)^n.
inline l2s::AwgnPerReference toy_awgn_reference(int order, std::size_t n_symbols, double lo_db = -10.0,
                                               double hi_db = 60.0, double step_db = 0.25) {
    if (n_symbols < 1) throw ConfigError("toy_awgn_reference: n_symbols must be >= 1");
    std::vector<double> snr, per;
    if (!(step_db > 0.0) || !(hi_db > lo_db)) throw ConfigError("toy_awgn_reference: bad SNR grid");
    const auto points = static_cast<std::size_t>(std::floor((hi_db - lo_db) / step_db + 1e-9)) + 1;
    for (std::size_t k = 0; k < points; ++k) {
        const double db = lo_db + step_db * static_cast<double>(k);
        const double ser = qam_ser(order, l2s::from_db(db));
        double p = -std::expm1(static_cast<double>(n_symbols) * std::log1p(-ser));
        if (!per.empty()) p = std::min(p, per.back());
        snr.push_back(db);
        per.push_back(std::clamp(p, 0.0, 1.0));
    }
    return l2s::AwgnPerReference::tabulated(std::move(snr), std::move(per));
}

}  // namespace eesm::phy
