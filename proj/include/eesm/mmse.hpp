#pragma once

// MMSE detection, post-processing SINR, and the first-order perturbation
// model of the detector under additive channel-estimation error.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "eesm/errors.hpp"
#include "eesm/linalg.hpp"

namespace eesm::rx {

using linalg::CMatrix;
using linalg::conj_transpose;
using linalg::cplx;
using linalg::trace;

/// SNR is signal power per transmit antenna over noise power; P_t is fixed at one.
struct LinkOperatingPoint {
    double snr_linear = 1.0;
    double p_t = 1.0;

    static LinkOperatingPoint from_db(double snr_db) { return {std::pow(10.0, snr_db / 10.0), 1.0}; }

    double sigma2() const { return p_t / snr_linear; }

    void validate() const {
        if (!(snr_linear > 0.0) || !std::isfinite(snr_linear)) throw ConfigError("snr must be positive and finite");
        if (!(p_t > 0.0)) throw ConfigError("p_t must be positive");
    }
};

enum class AnalyticalMode {
    paper_literal,  // |M_jj|^2 / (sum_{l!=j} |M_jl|^2 + N_jj), M = W A A* W* + E
    consistent,     // E[S_j] / (E[I_j] + E[N_j]) from per-column expectations
};

struct AnalyticalOptions {
    AnalyticalMode mode = AnalyticalMode::paper_literal;
    /// Drop the SNR^-1 W W* term that the E closed form shares with N.
    bool drop_duplicate_noise_term_in_E = false;
};

/// Grid of linear post-processing SINRs, subcarriers x streams.
class PostSinrMatrix {
public:
    PostSinrMatrix() = default;
    PostSinrMatrix(std::size_t n_sc, std::size_t n_s) : n_sc_(n_sc), n_s_(n_s), values_(n_sc * n_s, 0.0) {}
    PostSinrMatrix(std::size_t n_sc, std::size_t n_s, std::vector<double> values)
        : n_sc_(n_sc), n_s_(n_s), values_(std::move(values)) {
        if (values_.size() != n_sc * n_s) throw DimensionError("PostSinrMatrix: value count != n_sc * n_s");
    }

    std::size_t n_sc() const noexcept { return n_sc_; }
    std::size_t n_s() const noexcept { return n_s_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return values_[i * n_s_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * n_s_ + j]; }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    void set_row(std::size_t i, std::span<const double> row) {
        if (row.size() != n_s_) throw DimensionError("PostSinrMatrix::set_row: wrong stream count");
        std::copy(row.begin(), row.end(), values_.begin() + static_cast<std::ptrdiff_t>(i * n_s_));
    }

    /// Throws unless non-empty with every entry positive and finite.
    void validate() const {
        if (values_.empty()) throw DimensionError("PostSinrMatrix is empty");
        for (double v : values_) {
            if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("post-processing SINR must be positive and finite");
        }
    }

    friend bool operator==(const PostSinrMatrix&, const PostSinrMatrix&) = default;

private:
    std::size_t n_sc_ = 0;
    std::size_t n_s_ = 0;
    std::vector<double> values_;
};

/// Closed-form second-order statistics of the imperfect-CSI detector on one subcarrier.
struct PerturbationTerms {
    CMatrix K;  // [F*H*HF + I/SNR]^-1
    CMatrix W;  // perfect-CSI MMSE detector
    CMatrix E;  // E[dW (HF)(HF)* dW*] (+ SNR^-1 W W* unless dropped)
    CMatrix N;  // expected post-detection noise covariance
};

struct FirstOrderDetector {
    CMatrix W_hat;
    CMatrix delta_W;
};

namespace detail {

inline CMatrix regularised_gram_inverse(const CMatrix& hf, const LinkOperatingPoint& op) {
    op.validate();
    if (linalg::max_abs(hf) == 0.0) throw SingularMatrixError("effective channel HF is all zero");
    CMatrix gram = conj_transpose(hf) * hf;
    const double reg = 1.0 / op.snr_linear;
    for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) += reg;
    return linalg::inverse(gram);
}

inline void require_orthonormal(const CMatrix& F) {
    const CMatrix g = conj_transpose(F) * F;
    const double dev = linalg::frobenius_norm(g - CMatrix::identity(g.rows()));
    if (dev > 1e-8) throw ConfigError("precoder columns are not orthonormal (F*F != I)");
}

inline double real_trace(const CMatrix& a) { return trace(a).real(); }

}  // namespace detail

/// K = [(HF)*(HF) + I/SNR]^-1, so that W = K (HF)*.
inline CMatrix k_matrix(const CMatrix& H, const CMatrix& F, const LinkOperatingPoint& op) {
    return detail::regularised_gram_inverse(H * F, op);
}

/// W = [(HF)*(HF) + I/SNR]^-1 (HF)*, an n_s x n_r matrix.
inline CMatrix mmse_detector(const CMatrix& H, const CMatrix& F, const LinkOperatingPoint& op) {
    const CMatrix hf = H * F;
    return detail::regularised_gram_inverse(hf, op) * conj_transpose(hf);
}

/// Post-processing SINR per stream for an arbitrary detector W, evaluated
/// against the true H and F:
///   S_j = P_t |w_j H f_j|^2,  I_j = P_t sum_{l != j} |w_j H f_l|^2,  N_j = sigma^2 ||w_j||^2
inline std::vector<double> post_sinr(const CMatrix& W, const CMatrix& H, const CMatrix& F,
                                     const LinkOperatingPoint& op) {
    op.validate();
    const CMatrix g = W * (H * F);
    if (!g.square()) throw DimensionError("post_sinr: W H F must be n_s x n_s");
    const std::size_t n_s = g.rows();
    std::vector<double> out(n_s);
    for (std::size_t j = 0; j < n_s; ++j) {
        double row_norm = 0.0;
        for (std::size_t r = 0; r < W.cols(); ++r) row_norm += std::norm(W(j, r));
        if (row_norm == 0.0) throw Error("post_sinr: zero detector row, SINR undefined");
        const double s = op.p_t * std::norm(g(j, j));
        double interference = 0.0;
        for (std::size_t l = 0; l < n_s; ++l) {
            if (l != j) interference += std::norm(g(j, l));
        }
        out[j] = s / (op.p_t * interference + op.sigma2() * row_norm);
    }
    return out;
}

/// dW ~= -K (F*H* dH F + F* dH* H F) K F*H* + K F* dH*, W_hat = W + dW.
inline FirstOrderDetector perturbed_detector_first_order(const CMatrix& H, const CMatrix& F, const CMatrix& delta_H,
                                                         const LinkOperatingPoint& op) {
    const CMatrix hf = H * F;
    const CMatrix hf_h = conj_transpose(hf);
    const CMatrix K = detail::regularised_gram_inverse(hf, op);
    const CMatrix W = K * hf_h;
    const CMatrix dhf = delta_H * F;
    const CMatrix dhf_h = conj_transpose(dhf);
    CMatrix dW = K * dhf_h - K * (hf_h * dhf + dhf_h * hf) * W;
    CMatrix W_hat = W + dW;
    return {std::move(W_hat), std::move(dW)};
}

/// Closed forms for E and N, written term by term with A = HF:
///
///   E = se2 tr(K A*A A*A K*) K A*A K*  + se2 tr(A K A*A A*A K* A*) K K*
///     - se2 tr(A K A*A A*) K K*        - se2 tr(A A*A K* A*) K K*
///     + se2 tr(A A*) K K*              + SNR^-1 W W*
///
///   N = SNR^-1 [ W W* + se2 tr(K A*A K*) K A*A K* + se2 tr(A K A*A K* A*) K K*
///              - se2 tr(A K A*) K K* - se2 tr(A K* A*) K K* + se2 n_r K K* ]
///
/// Both assume F*F = I, checked here.
inline PerturbationTerms analytical_terms(const CMatrix& H, const CMatrix& F, const LinkOperatingPoint& op,
                                          double sigma_e2, const AnalyticalOptions& opts = {}) {
    if (!(sigma_e2 >= 0.0)) throw ConfigError("sigma_e2 must be >= 0");
    detail::require_orthonormal(F);
    using detail::real_trace;

    const CMatrix A = H * F;
    const CMatrix Ah = conj_transpose(A);
    const CMatrix K = detail::regularised_gram_inverse(A, op);
    const CMatrix Kh = conj_transpose(K);
    const CMatrix W = K * Ah;
    const CMatrix Wh = conj_transpose(W);
    const CMatrix WWh = W * Wh;
    const CMatrix KKh = K * Kh;
    const CMatrix AhA = Ah * A;
    const CMatrix AAh = A * Ah;
    const CMatrix K_AhA_Kh = K * AhA * Kh;
    const CMatrix AK = A * K;
    const CMatrix AKh = A * Kh;
    const double inv_snr = 1.0 / op.snr_linear;
    const double n_r = static_cast<double>(H.rows());

    CMatrix E = sigma_e2 * real_trace(K * AhA * AhA * Kh) * K_AhA_Kh;
    E += sigma_e2 * real_trace(AK * AhA * AhA * Kh * Ah) * KKh;
    E -= sigma_e2 * trace(AK * AhA * Ah) * KKh;
    E -= sigma_e2 * trace(AAh * AKh * Ah) * KKh;
    E += sigma_e2 * real_trace(AAh) * KKh;
    if (!opts.drop_duplicate_noise_term_in_E) E += inv_snr * WWh;

    CMatrix N = WWh;
    N += sigma_e2 * real_trace(K_AhA_Kh) * K_AhA_Kh;
    N += sigma_e2 * real_trace(AK * AhA * Kh * Ah) * KKh;
    N -= sigma_e2 * trace(AK * Ah) * KKh;
    N -= sigma_e2 * trace(AKh * Ah) * KKh;
    N += sigma_e2 * n_r * KKh;
    N *= inv_snr;

    return {K, W, std::move(E), std::move(N)};
}

/// Analytical SINR under both modes; `selected` follows `opts.mode`.
struct AnalyticalSinr {
    std::vector<double> paper_literal;
    std::vector<double> consistent;
    std::vector<double> selected;
};

inline AnalyticalSinr analytical_post_sinr_all(const CMatrix& H, const CMatrix& F, const LinkOperatingPoint& op,
                                               double sigma_e2, const AnalyticalOptions& opts = {}) {
    const PerturbationTerms t = analytical_terms(H, F, op, sigma_e2, opts);
    const CMatrix A = H * F;
    const CMatrix G = t.W * A;
    const CMatrix M = G * conj_transpose(G) + t.E;
    const CMatrix KKh = t.K * conj_transpose(t.K);
    const CMatrix WWh = t.W * conj_transpose(t.W);
    const CMatrix I = CMatrix::identity(H.rows());
    const CMatrix resid = I - A * t.W;  // I - A W
    const std::size_t n_s = G.rows();

    // Per-column expected detector-error power: E|(dW A)_{j,l}|^2
    //   = se2 (||W a_l||^2 [W W*]_jj + ||(I - A W) a_l||^2 [K K*]_jj)
    std::vector<double> w_col(n_s), m_col(n_s);
    for (std::size_t l = 0; l < n_s; ++l) {
        const CMatrix a_l = A.col(l);
        w_col[l] = std::pow(linalg::frobenius_norm(t.W * a_l), 2);
        m_col[l] = std::pow(linalg::frobenius_norm(resid * a_l), 2);
    }

    AnalyticalSinr out{std::vector<double>(n_s), std::vector<double>(n_s), {}};
    for (std::size_t j = 0; j < n_s; ++j) {
        double lit_interf = 0.0;
        for (std::size_t l = 0; l < n_s; ++l) {
            if (l != j) lit_interf += std::norm(M(j, l));
        }
        out.paper_literal[j] = std::norm(M(j, j)) / (lit_interf + t.N(j, j).real());

        const double wjj = WWh(j, j).real();
        const double kjj = KKh(j, j).real();
        double signal = 0.0;
        double interf = 0.0;
        for (std::size_t l = 0; l < n_s; ++l) {
            const double power = std::norm(G(j, l)) + sigma_e2 * (w_col[l] * wjj + m_col[l] * kjj);
            (l == j ? signal : interf) += op.p_t * power;
        }
        out.consistent[j] = signal / (interf + t.N(j, j).real());
    }
    out.selected = opts.mode == AnalyticalMode::consistent ? out.consistent : out.paper_literal;
    return out;
}

inline std::vector<double> analytical_post_sinr(const CMatrix& H, const CMatrix& F, const LinkOperatingPoint& op,
                                                double sigma_e2, const AnalyticalOptions& opts = {}) {
    return analytical_post_sinr_all(H, F, op, sigma_e2, opts).selected;
}

}  // namespace eesm::rx
