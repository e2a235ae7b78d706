#pragma once

// Skew-generalised-normal law of X = ln(Gamma_eff):
//
//   f(x) = (2 / sigma) psi(z) Psi( lambda1 z / sqrt(1 + lambda2 z^2) ),  z = (x - mu) / sigma
//
// with psi / Psi the standard normal pdf / cdf. Density, CDF by quadrature,
// rejection sampling, Kolmogorov-Smirnov distances and maximum-likelihood fitting.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "eesm/errors.hpp"
#include "eesm/optimize.hpp"
#include "eesm/rng.hpp"

namespace eesm::sgn {

struct LogSgnParams {
    double mu = 0.0;
    double sigma = 1.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;

    void validate() const {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("SGN sigma must be positive");
        if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) throw ConfigError("SGN lambda2 must be >= 0");
        if (!std::isfinite(mu) || !std::isfinite(lambda1)) throw ConfigError("SGN mu and lambda1 must be finite");
    }
};

struct FitReport {
    LogSgnParams params;
    double log_likelihood = 0.0;
    double ks_distance = 0.0;
    std::size_t n_samples = 0;
    bool converged = false;
    int iterations = 0;
};

inline double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// ln Psi(x), accurate far into the lower tail.
inline double log_std_normal_cdf(double x) {
    if (x > -30.0) return std::log(std_normal_cdf(x));
    const double inv2 = 1.0 / (x * x);
    return -0.5 * x * x - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) +
           std::log1p(-inv2 + 3.0 * inv2 * inv2 - 15.0 * inv2 * inv2 * inv2);
}

namespace detail {
inline double skew_argument(double z, const LogSgnParams& p) {
    return p.lambda1 * z / std::sqrt(1.0 + p.lambda2 * z * z);
}
}  // namespace detail

inline double sgn_pdf(double x, const LogSgnParams& p) {
    const double z = (x - p.mu) / p.sigma;
    return 2.0 / p.sigma * std_normal_pdf(z) * std_normal_cdf(detail::skew_argument(z, p));
}

inline double sgn_log_pdf(double x, const LogSgnParams& p) {
    const double z = (x - p.mu) / p.sigma;
    return std::numbers::ln2 - std::log(p.sigma) - 0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi) +
           log_std_normal_cdf(detail::skew_argument(z, p));
}

inline double log_likelihood(std::span<const double> xs, const LogSgnParams& p) {
    double ll = 0.0;
    for (double x : xs) ll += sgn_log_pdf(x, p);
    return ll;
}

/// Adaptive Simpson quadrature.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol, int max_depth = 48) {
    struct Rec {
        static double run(F& f, double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
            const double m = 0.5 * (a + b);
            const double lm = 0.5 * (a + m);
            const double rm = 0.5 * (m + b);
            const double flm = f(lm);
            const double frm = f(rm);
            const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            const double delta = left + right - whole;
            if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
            return run(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
                   run(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
        }
    };
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return Rec::run(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// SGN CDF tabulated on a 2048-point grid over mu +- 12 sigma by adaptive
/// Simpson (total absolute tolerance 1e-9) and read back with cubic Hermite
/// interpolation using the density as the derivative.
class SgnCdf {
public:
    static constexpr std::size_t kGridPoints = 2048;
    static constexpr double kHalfWidth = 12.0;

    explicit SgnCdf(const LogSgnParams& p) : params_(p) {
        p.validate();
        lo_ = p.mu - kHalfWidth * p.sigma;
        step_ = 2.0 * kHalfWidth * p.sigma / static_cast<double>(kGridPoints - 1);
        cdf_.resize(kGridPoints);
        pdf_.resize(kGridPoints);
        auto f = [&](double x) { return sgn_pdf(x, p); };
        const double seg_tol = 1e-9 / static_cast<double>(kGridPoints);
        double acc = 0.0;
        for (std::size_t k = 0; k < kGridPoints; ++k) {
            const double x = node(k);
            if (k > 0) acc += adaptive_simpson(f, node(k - 1), x, seg_tol);
            cdf_[k] = acc;
            pdf_[k] = f(x);
        }
    }

    double operator()(double x) const {
        if (x <= lo_) return 0.0;
        const double pos = (x - lo_) / step_;
        if (pos >= static_cast<double>(kGridPoints - 1)) return std::min(1.0, cdf_.back());
        const auto k = static_cast<std::size_t>(pos);
        const double t = pos - static_cast<double>(k);
        const double t2 = t * t;
        const double t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1;
        const double h10 = t3 - 2 * t2 + t;
        const double h01 = -2 * t3 + 3 * t2;
        const double h11 = t3 - t2;
        const double v = h00 * cdf_[k] + h10 * step_ * pdf_[k] + h01 * cdf_[k + 1] + h11 * step_ * pdf_[k + 1];
        return std::clamp(v, 0.0, 1.0);
    }

    const LogSgnParams& params() const noexcept { return params_; }

private:
    double node(std::size_t k) const { return lo_ + step_ * static_cast<double>(k); }

    LogSgnParams params_;
    double lo_ = 0.0;
    double step_ = 1.0;
    std::vector<double> cdf_;
    std::vector<double> pdf_;
};

/// Rejection sampler with envelope M * N(mu, (2 sigma)^2), M = 4. Since
/// Psi <= 1, f(x) / g(x) <= 4 exp(-3 z^2 / 8) <= 4 for every parameter set;
/// the bound is re-checked on a dense +-10 sigma grid at construction.
class SgnSampler {
public:
    static constexpr double kEnvelopeScale = 2.0;
    static constexpr double kEnvelopeFactor = 4.0;

    explicit SgnSampler(const LogSgnParams& p) : params_(p) {
        p.validate();
        for (int k = -4000; k <= 4000; ++k) {
            const double x = p.mu + p.sigma * 10.0 * k / 4000.0;
            if (sgn_pdf(x, p) > kEnvelopeFactor * envelope(x) * (1.0 + 1e-12)) {
                throw ConfigError("SGN sampler: envelope does not dominate the density");
            }
        }
    }

    double operator()(Rng& rng) const {
        for (;;) {
            const double x = params_.mu + kEnvelopeScale * params_.sigma * rng.normal();
            const double u = rng.uniform();
            if (u * kEnvelopeFactor * envelope(x) <= sgn_pdf(x, params_)) return x;
        }
    }

private:
    double envelope(double x) const {
        const double s = kEnvelopeScale * params_.sigma;
        return std_normal_pdf((x - params_.mu) / s) / s;
    }

    LogSgnParams params_;
};

inline std::vector<double> sample_sgn(const LogSgnParams& p, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("sample_sgn: n must be >= 1");
    const SgnSampler sampler(p);
    Rng rng(seed, 0, StreamTag::sampling);
    std::vector<double> out(n);
    for (auto& x : out) x = sampler(rng);
    return out;
}

/// One-sample KS statistic sup |F_n - F| against a CDF callable.
template <class Cdf>
    requires std::invocable<const Cdf&, double>
double ks_distance(std::span<const double> samples, const Cdf& cdf) {
    if (samples.size() < 2) throw ConfigError("ks_distance: need at least 2 samples");
    std::vector<double> xs(samples.begin(), samples.end());
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return std::clamp(d, 0.0, 1.0);
}

/// Two-sample KS statistic sup |F_a - F_b| by a sorted merge (ties handled jointly).
inline double ks_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw ConfigError("ks_distance: need at least 2 samples per set");
    std::vector<double> xa(a.begin(), a.end()), xb(b.begin(), b.end());
    std::sort(xa.begin(), xa.end());
    std::sort(xb.begin(), xb.end());
    const double na = static_cast<double>(xa.size());
    const double nb = static_cast<double>(xb.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < xa.size() && j < xb.size()) {
        const double v = std::min(xa[i], xb[j]);
        while (i < xa.size() && xa[i] == v) ++i;
        while (j < xb.size() && xb[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

struct FitOptions {
    int max_iterations = 2000;
    std::size_t min_samples = 100;
};

/// Maximum-likelihood SGN fit of ln(samples). Nelder-Mead over
/// (mu, ln sigma, lambda1, ln lambda2) from three moment-based starts
/// (lambda1 = 0, s, 3s with s the sign of the sample skewness, lambda2 = 0.1),
/// keeping the best likelihood, then one restart from the winner.
inline FitReport fit_logsgn(std::span<const double> effective_sinrs, const FitOptions& opts = {}) {
    if (effective_sinrs.size() < opts.min_samples) {
        throw ConfigError("fit_logsgn: need >= " + std::to_string(opts.min_samples) + " samples");
    }
    std::vector<double> xs;
    xs.reserve(effective_sinrs.size());
    for (double v : effective_sinrs) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("fit_logsgn: samples must be positive and finite");
        xs.push_back(std::log(v));
    }
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double m2 = 0.0, m3 = 0.0;
    for (double x : xs) {
        const double d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    const double sd = std::max(std::sqrt(m2), 1e-8 * std::max(1.0, std::abs(mean)));
    const double skew_sign = m3 < 0.0 ? -1.0 : 1.0;

    using Point = std::array<double, 4>;
    constexpr double kLogBound = 60.0;
    auto to_params = [](const Point& v) { return LogSgnParams{v[0], std::exp(v[1]), v[2], std::exp(v[3])}; };
    auto neg_ll = [&](const Point& v) {
        if (std::abs(v[1]) > kLogBound || std::abs(v[3]) > kLogBound) return std::numeric_limits<double>::infinity();
        return -log_likelihood(xs, to_params(v));
    };

    const Point step{0.5 * sd, 0.5, 1.0, 1.0};
    opt::SimplexOptions sopts;
    sopts.max_iterations = opts.max_iterations;

    opt::SimplexResult<4> best;
    best.fx = std::numeric_limits<double>::infinity();
    int iterations = 0;
    for (double l1 : {0.0, skew_sign, 3.0 * skew_sign}) {
        const Point x0{mean, std::log(sd), l1, std::log(0.1)};
        auto r = opt::nelder_mead(neg_ll, x0, step, sopts);
        iterations += r.iterations;
        if (r.fx < best.fx) best = r;
    }
    auto restart = opt::nelder_mead(neg_ll, best.x, step, sopts);
    iterations += restart.iterations;
    if (restart.fx <= best.fx) best = restart;

    FitReport report;
    report.params = to_params(best.x);
    report.log_likelihood = -best.fx;
    report.n_samples = xs.size();
    report.converged = restart.converged;
    report.iterations = iterations;
    report.ks_distance = ks_distance(xs, SgnCdf(report.params));
    return report;
}

}  // namespace eesm::sgn
