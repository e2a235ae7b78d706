#pragma once

// Link-to-system mapping: EESM compression of a post-processing SINR grid,
// the AWGN-SISO reference PER curve, and calibration of the EESM beta.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <istream>
#include <limits>
#include <map>
#include <ranges>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "eesm/errors.hpp"
#include "eesm/mmse.hpp"
#include "eesm/optimize.hpp"

namespace eesm::l2s {

using rx::PostSinrMatrix;

inline double to_db(double linear) { return 10.0 * std::log10(linear); }
inline double from_db(double db) { return std::pow(10.0, db / 10.0); }

/// Gamma_eff = -beta ln( mean_ij exp(-Gamma_ij / beta) ), evaluated with the
/// minimum entry factored out so large Gamma/beta cannot underflow.
inline double eesm_effective_sinr(std::span<const double> gamma, double beta) {
    if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
    if (gamma.empty()) throw DimensionError("eesm_effective_sinr: empty SINR grid");
    const double m = *std::min_element(gamma.begin(), gamma.end());
    double acc = 0.0;
    for (double g : gamma) acc += std::exp(-(g - m) / beta);
    return m - beta * std::log(acc / static_cast<double>(gamma.size()));
}

inline double eesm_effective_sinr(const PostSinrMatrix& gamma, double beta) {
    return eesm_effective_sinr(gamma.values(), beta);
}

enum class Mapping { eesm, identity, rbir };

inline Mapping mapping_from_string(const std::string& id) {
    if (id == "eesm") return Mapping::eesm;
    if (id == "identity") return Mapping::identity;
    if (id == "rbir") return Mapping::rbir;
    throw ConfigError("unknown L2S mapping '" + id + "'");
}

/// alpha * Phi^-1( mean Phi(Gamma_ij / beta) ).
inline double generic_effective_sinr(const PostSinrMatrix& gamma, Mapping phi, double alpha, double beta) {
    if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("alpha and beta must be > 0");
    switch (phi) {
        case Mapping::eesm:
            // Phi(x) = exp(-x): alpha * (-ln mean exp(-Gamma/beta)) = (alpha / beta) * EESM(beta)
            return (alpha / beta) * eesm_effective_sinr(gamma, beta);
        case Mapping::identity: {
            double acc = 0.0;
            for (double g : gamma.values()) acc += g / beta;
            return alpha * acc / static_cast<double>(gamma.size());
        }
        case Mapping::rbir:
            throw ConfigError("RBIR mapping is reserved but not implemented");
    }
    throw ConfigError("unknown L2S mapping");
}

/// PER of the AWGN-SISO reference link as a function of SNR in dB. Either
/// parametric (0.5 erfc((snr - mid) / slope)) or tabulated with monotone
/// interpolation in logit-PER space, clamped to the table's SNR range.
class AwgnPerReference {
public:
    static AwgnPerReference parametric(double mid_db, double slope_db) {
        if (!(slope_db > 0.0)) throw ConfigError("AWGN reference slope must be > 0");
        AwgnPerReference r;
        r.parametric_ = true;
        r.mid_db_ = mid_db;
        r.slope_db_ = slope_db;
        return r;
    }

    static AwgnPerReference tabulated(std::vector<double> snr_db, std::vector<double> per) {
        if (snr_db.empty()) throw ConfigError("AWGN reference table is empty");
        if (snr_db.size() != per.size()) throw ConfigError("AWGN reference: column length mismatch");
        for (std::size_t k = 0; k < snr_db.size(); ++k) {
            if (!(per[k] >= 0.0 && per[k] <= 1.0)) throw ConfigError("AWGN reference: PER outside [0, 1]");
            if (k > 0 && !(snr_db[k] > snr_db[k - 1])) throw ConfigError("AWGN reference: SNR must strictly increase");
            if (k > 0 && per[k] > per[k - 1]) throw ConfigError("AWGN reference: PER must be non-increasing");
        }
        AwgnPerReference r;
        r.snr_db_ = std::move(snr_db);
        r.per_ = std::move(per);
        r.logit_.reserve(r.per_.size());
        for (double p : r.per_) r.logit_.push_back(logit(p));
        return r;
    }

    bool is_parametric() const noexcept { return parametric_; }
    double mid_db() const noexcept { return mid_db_; }
    double slope_db() const noexcept { return slope_db_; }
    const std::vector<double>& table_snr_db() const noexcept { return snr_db_; }
    const std::vector<double>& table_per() const noexcept { return per_; }

    double per(double snr_db) const {
        if (parametric_) return 0.5 * std::erfc((snr_db - mid_db_) / slope_db_);
        if (snr_db <= snr_db_.front()) return per_.front();
        if (snr_db >= snr_db_.back()) return per_.back();
        const auto hi = static_cast<std::size_t>(std::upper_bound(snr_db_.begin(), snr_db_.end(), snr_db) - snr_db_.begin());
        const std::size_t lo = hi - 1;
        const double t = (snr_db - snr_db_[lo]) / (snr_db_[hi] - snr_db_[lo]);
        const double z = logit_[lo] + t * (logit_[hi] - logit_[lo]);
        return 1.0 / (1.0 + std::exp(-z));
    }

private:
    static double logit(double p) {
        constexpr double eps = 1e-12;
        p = std::clamp(p, eps, 1.0 - eps);
        return std::log(p / (1.0 - p));
    }

    bool parametric_ = false;
    double mid_db_ = 0.0;
    double slope_db_ = 1.0;
    std::vector<double> snr_db_;
    std::vector<double> per_;
    std::vector<double> logit_;
};

inline double awgn_per(const AwgnPerReference& ref, double snr_db) { return ref.per(snr_db); }

/// Parses the `snr_db,per` CSV form (header required, rows ascending in SNR).
inline AwgnPerReference read_awgn_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    std::vector<double> snr, per;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (!header) {
            if (line != "snr_db,per") throw ParseError(line_no, "expected header 'snr_db,per'");
            header = true;
            continue;
        }
        std::istringstream row(line);
        double s = 0.0, p = 0.0;
        char comma = 0;
        if (!(row >> s >> comma >> p) || comma != ',') throw ParseError(line_no, "expected '<snr_db>,<per>'");
        snr.push_back(s);
        per.push_back(p);
    }
    if (!header) throw ParseError(line_no, "missing header");
    return AwgnPerReference::tabulated(std::move(snr), std::move(per));
}

enum class CalibrationObjective {
    per_packet,  // residual against each packet's binary error state
    binned,      // residual of empirical PER per effective-SINR bin
};

struct CalibrationOptions {
    double beta_lo = 0.1;
    double beta_hi = 1000.0;
    int grid_points = 32;
    double relative_width = 1e-4;
    CalibrationObjective objective = CalibrationObjective::per_packet;
    double bin_width_db = 1.0;
    std::size_t min_records = 100;
};

struct EesmCalibration {
    double beta = 1.0;
    double alpha = 1.0;  // EESM ties alpha to beta
    double objective_value = 0.0;
    double beta_lo = 0.0;
    double beta_hi = 0.0;
    bool degenerate = false;  // objective flat over the search range
};

/// Anything exposing `.gamma` (PostSinrMatrix) and `.error` (0/1).
template <class R>
concept CalibrationRecord = requires(const R& r) {
    { r.gamma } -> std::convertible_to<const PostSinrMatrix&>;
    { static_cast<bool>(r.error) };
};

/// Mean squared residual between AWGN-predicted PER at each packet's
/// effective SINR and the observed error states.
template <std::ranges::forward_range Records>
    requires CalibrationRecord<std::ranges::range_value_t<Records>>
double calibration_objective(const Records& records, const AwgnPerReference& ref, double beta,
                             const CalibrationOptions& opts = {}) {
    if (opts.objective == CalibrationObjective::per_packet) {
        double acc = 0.0;
        std::size_t n = 0;
        for (const auto& r : records) {
            const double pred = ref.per(to_db(eesm_effective_sinr(r.gamma, beta)));
            const double e = static_cast<bool>(r.error) ? 1.0 : 0.0;
            acc += (pred - e) * (pred - e);
            ++n;
        }
        return acc / static_cast<double>(n);
    }
    struct Bin {
        double errors = 0.0;
        double predicted = 0.0;
        double count = 0.0;
    };
    std::map<long long, Bin> bins;
    std::size_t n = 0;
    for (const auto& r : records) {
        const double db = to_db(eesm_effective_sinr(r.gamma, beta));
        auto& b = bins[static_cast<long long>(std::floor(db / opts.bin_width_db))];
        b.errors += static_cast<bool>(r.error) ? 1.0 : 0.0;
        b.predicted += ref.per(db);
        b.count += 1.0;
        ++n;
    }
    double acc = 0.0;
    for (const auto& [key, b] : bins) {
        const double diff = b.errors / b.count - b.predicted / b.count;
        acc += b.count * diff * diff;
    }
    return acc / static_cast<double>(n);
}

/// argmin over beta of the calibration objective: a coarse log-spaced grid
/// picks the basin, then golden-section search on ln(beta) narrows it to
/// `relative_width`.
template <std::ranges::forward_range Records>
    requires CalibrationRecord<std::ranges::range_value_t<Records>>
EesmCalibration calibrate_beta(const Records& records, const AwgnPerReference& ref, const CalibrationOptions& opts = {}) {
    if (!(opts.beta_lo > 0.0) || !(opts.beta_hi > opts.beta_lo)) throw ConfigError("beta search range must satisfy 0 < lo < hi");
    if (opts.grid_points < 3) throw ConfigError("calibration grid needs >= 3 points");

    std::size_t n = 0, errors = 0;
    for (const auto& r : records) {
        ++n;
        errors += static_cast<bool>(r.error) ? 1 : 0;
    }
    if (n < opts.min_records) {
        throw ConfigError("calibration needs >= " + std::to_string(opts.min_records) + " records, got " + std::to_string(n));
    }
    if (errors == 0 || errors == n) throw UninformativeDatasetError();

    auto objective = [&](double log_beta) { return calibration_objective(records, ref, std::exp(log_beta), opts); };

    const double lo = std::log(opts.beta_lo);
    const double hi = std::log(opts.beta_hi);
    const int m = opts.grid_points;
    std::vector<double> grid(static_cast<std::size_t>(m)), values(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        grid[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / (m - 1);
        values[static_cast<std::size_t>(k)] = objective(grid[static_cast<std::size_t>(k)]);
    }
    const auto [vmin, vmax] = std::minmax_element(values.begin(), values.end());

    EesmCalibration out;
    out.beta_lo = opts.beta_lo;
    out.beta_hi = opts.beta_hi;
    if (*vmax - *vmin < 1e-12) {
        out.beta = out.alpha = opts.beta_lo;
        out.objective_value = values.front();
        out.degenerate = true;
        return out;
    }

    const auto k = static_cast<std::size_t>(vmin - values.begin());
    const double a = grid[k == 0 ? 0 : k - 1];
    const double b = grid[std::min(k + 1, grid.size() - 1)];
    const auto refined = opt::golden_section_minimize(objective, a, b, opts.relative_width);

    const bool use_refined = refined.fx <= *vmin;
    const double log_beta = use_refined ? refined.x : grid[k];
    out.beta = out.alpha = std::exp(log_beta);
    out.objective_value = use_refined ? refined.fx : *vmin;
    return out;
}

}  // namespace eesm::l2s
