#pragma once

// Validation suites: Monte Carlo checks of the closed forms, first-order
// accuracy of the detector expansion, PER ordering, flow equivalence and
// the effective-SINR distribution comparisons. Each returns a plain report
// that also serialises to JSON.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "eesm/channel.hpp"
#include "eesm/errors.hpp"
#include "eesm/linalg.hpp"
#include "eesm/mmse.hpp"
#include "eesm/pipelines.hpp"
#include "eesm/rng.hpp"
#include "eesm/sgn.hpp"

namespace eesm::validate {

using linalg::CMatrix;
using nlohmann::json;
using pipeline::BetaPolicy;
using pipeline::RunConfig;
using pipeline::SigmaEPolicy;
using rx::LinkOperatingPoint;

/// Unit-variance i.i.d. ZMCSCG matrix.
inline CMatrix random_channel(std::size_t rows, std::size_t cols, Rng& rng) {
    CMatrix h(rows, cols);
    for (auto& v : h.data()) v = rng.zmcscg(1.0);
    return h;
}

// ---------------------------------------------------------------- oracles

struct OracleOptions {
    std::size_t instances = 10;
    std::vector<double> sigma_e{0.02, 0.05};
    std::size_t draws = 100000;
    double snr_db = 17.0;
    double trace_sigma_e2 = 0.04;
    double max_score = 5.0;
    std::uint64_t seed = 7;
};

struct OracleEntry {
    std::string target;
    std::size_t instance = 0;
    double sigma_e = 0.0;
    double score = 0.0;  // max |MC - closed form| / SE
};

struct OracleReport {
    std::vector<OracleEntry> trace_entries;
    std::vector<OracleEntry> term_entries;
    bool trace_pass = false;
    bool term_pass = false;
    double max_trace_score = 0.0;
    double max_term_score = 0.0;
};

/// E[dH A dH*] = se2 tr(A) I and E[dH A dH] = 0 for A = I and a random A;
/// E (minus its SNR^-1 W W* term) and N against Monte Carlo on random 2x2
/// instances.
inline OracleReport oracle_suite(const OracleOptions& opts = {}) {
    OracleReport rep;
    Rng inst(opts.seed, 0, StreamTag::oracle);
    const auto op = LinkOperatingPoint::from_db(opts.snr_db);
    const double se = std::sqrt(opts.trace_sigma_e2);

    const CMatrix H0 = random_channel(2, 2, inst);
    const CMatrix F0 = channel::svd_precoder(H0, 2);
    const CMatrix random_A = random_channel(2, 2, inst);
    std::uint64_t stream = 1;
    for (const auto& [name, A] : {std::pair{std::string("identity"), CMatrix::identity(2)}, std::pair{std::string("random"), random_A}}) {
        const auto est = pipeline::mc_expectation_oracle(H0, F0, op, se, opts.draws, pipeline::OracleTarget::trace_identity,
                                                         derive_seed(opts.seed, stream++, StreamTag::oracle), A);
        const CMatrix expected = CMatrix::identity(2) * (opts.trace_sigma_e2 * linalg::trace(A));
        rep.trace_entries.push_back({"trace_identity/" + name, 0, se, pipeline::max_standard_score(est, expected)});

        const auto zero = pipeline::mc_expectation_oracle(H0, F0, op, se, opts.draws, pipeline::OracleTarget::trace_zero,
                                                          derive_seed(opts.seed, stream++, StreamTag::oracle), A);
        rep.trace_entries.push_back({"trace_zero/" + name, 0, se, pipeline::max_standard_score(zero, CMatrix(2, 2))});
    }

    for (std::size_t k = 0; k < opts.instances; ++k) {
        const CMatrix H = random_channel(2, 2, inst);
        const CMatrix F = channel::svd_precoder(H, 2);
        for (double s : opts.sigma_e) {
            const auto terms = rx::analytical_terms(H, F, op, s * s, {rx::AnalyticalMode::paper_literal, true});
            const auto e = pipeline::mc_expectation_oracle(H, F, op, s, opts.draws, pipeline::OracleTarget::e_term,
                                                           derive_seed(opts.seed, stream++, StreamTag::oracle));
            rep.term_entries.push_back({"E", k, s, pipeline::max_standard_score(e, terms.E)});
            const auto n = pipeline::mc_expectation_oracle(H, F, op, s, opts.draws, pipeline::OracleTarget::n_term,
                                                           derive_seed(opts.seed, stream++, StreamTag::oracle));
            rep.term_entries.push_back({"N", k, s, pipeline::max_standard_score(n, terms.N)});
        }
    }
    for (const auto& e : rep.trace_entries) rep.max_trace_score = std::max(rep.max_trace_score, e.score);
    for (const auto& e : rep.term_entries) rep.max_term_score = std::max(rep.max_term_score, e.score);
    rep.trace_pass = rep.max_trace_score <= opts.max_score;
    rep.term_pass = rep.max_term_score <= opts.max_score;
    return rep;
}

// ------------------------------------------------------------ first order

struct FirstOrderOptions {
    std::size_t instances = 20;
    std::vector<double> sigma_e{0.1, 0.05, 0.025};
    double snr_db = 17.0;
    double tolerance = 0.2;  // relative to exact halving
    std::uint64_t seed = 11;
};

struct FirstOrderReport {
    /// median_ratios[s]: median over instances of rel(sigma_e[s + 1]) / rel(sigma_e[s]),
    /// rel = ||W_exact - W - dW||_F / ||dW||_F
    std::vector<double> median_ratios;
    std::vector<double> worst_ratios;  // farthest from the expected ratio
    std::size_t instances_within_tolerance = 0;
    std::size_t instances = 0;
    bool pass = false;
};

/// The remainder of the detector expansion, measured along a fixed random
/// direction per instance scaled by sigma_e, must shrink in proportion to
/// sigma_e. Judged on the median instance; the worst one is reported.
inline FirstOrderReport first_order_suite(const FirstOrderOptions& opts = {}) {
    const auto op = LinkOperatingPoint::from_db(opts.snr_db);
    const std::size_t m = opts.sigma_e.size();
    if (m < 2) throw ConfigError("first_order_suite needs at least two sigma_e values");
    std::vector<std::vector<double>> ratios(m - 1);
    FirstOrderReport rep;
    rep.instances = opts.instances;
    Rng rng(opts.seed, 0, StreamTag::oracle);
    for (std::size_t k = 0; k < opts.instances; ++k) {
        const CMatrix H = random_channel(2, 2, rng);
        const CMatrix F = channel::svd_precoder(H, 2);
        const CMatrix D = random_channel(2, 2, rng);
        std::vector<double> rel(m);
        for (std::size_t s = 0; s < m; ++s) {
            const CMatrix dH = D * opts.sigma_e[s];
            const auto approx = rx::perturbed_detector_first_order(H, F, dH, op);
            const CMatrix exact = rx::mmse_detector(H + dH, F, op);
            rel[s] = linalg::frobenius_norm(exact - approx.W_hat) / linalg::frobenius_norm(approx.delta_W);
        }
        bool within = true;
        for (std::size_t s = 0; s + 1 < m; ++s) {
            const double r = rel[s + 1] / rel[s];
            ratios[s].push_back(r);
            within = within && std::abs(r / (opts.sigma_e[s + 1] / opts.sigma_e[s]) - 1.0) <= opts.tolerance;
        }
        rep.instances_within_tolerance += within ? 1 : 0;
    }
    rep.pass = true;
    for (std::size_t s = 0; s + 1 < m; ++s) {
        const double expected = opts.sigma_e[s + 1] / opts.sigma_e[s];
        auto& r = ratios[s];
        std::sort(r.begin(), r.end());
        const std::size_t n = r.size();
        const double median = n % 2 == 1 ? r[n / 2] : 0.5 * (r[n / 2 - 1] + r[n / 2]);
        const double worst = std::abs(r.front() - expected) > std::abs(r.back() - expected) ? r.front() : r.back();
        rep.median_ratios.push_back(median);
        rep.worst_ratios.push_back(worst);
        rep.pass = rep.pass && std::abs(median / expected - 1.0) <= opts.tolerance;
    }
    return rep;
}

// -------------------------------------------------------------- PER curve

struct PerCurveOptions {
    std::vector<double> snr_db{25, 30, 35, 40, 45, 50, 55};
    std::vector<double> sigma_e{0.0, 0.1};
    std::size_t n_packets = 2000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

struct PerCurve {
    double sigma_e = 0.0;
    std::vector<double> per;
    std::vector<double> standard_error;
};

struct PerCurveReport {
    std::vector<double> snr_db;
    std::vector<PerCurve> curves;
    bool monotone = false;
    bool ordered = false;  // PER grows with sigma_e at every SNR
    bool pass = false;
};

inline PerCurveReport per_curve_suite(const PerCurveOptions& opts = {}) {
    PerCurveReport rep;
    rep.snr_db = opts.snr_db;
    for (double se : opts.sigma_e) {
        RunConfig cfg;
        cfg.channel.seed = opts.seed;
        cfg.snr_db = opts.snr_db;
        cfg.n_packets = opts.n_packets;
        cfg.sigma_e = SigmaEPolicy::fixed(se);
        cfg.beta = BetaPolicy::fixed(1.0);
        cfg.fit = false;
        cfg.threads = opts.threads;
        const auto out = pipeline::run_simulation_flow(cfg);
        PerCurve c{se, {}, {}};
        for (const auto& pt : out.points) {
            const double p = pt.per();
            c.per.push_back(p);
            c.standard_error.push_back(std::sqrt(p * (1.0 - p) / static_cast<double>(pt.records.size())));
        }
        rep.curves.push_back(std::move(c));
    }
    rep.monotone = true;
    for (const auto& c : rep.curves) {
        for (std::size_t k = 0; k + 1 < c.per.size(); ++k) {
            const double se = std::hypot(c.standard_error[k], c.standard_error[k + 1]);
            if (c.per[k + 1] > c.per[k] + 2.0 * se) rep.monotone = false;
        }
    }
    rep.ordered = true;
    for (std::size_t c = 0; c + 1 < rep.curves.size(); ++c) {
        for (std::size_t k = 0; k < rep.snr_db.size(); ++k) {
            if (rep.curves[c + 1].per[k] < rep.curves[c].per[k]) rep.ordered = false;
        }
    }
    rep.pass = rep.monotone && rep.ordered;
    return rep;
}

// ------------------------------------------------------- flow equivalence

struct FlowEquivalenceReport {
    double max_relative_deviation = 0.0;
    bool same_channels = false;
    bool pass = false;
};

/// sigma_e = 0 and the consistent mode: both flows give the same Gamma_eff.
inline FlowEquivalenceReport flow_equivalence_check(std::size_t n_packets = 1000, double snr_db = 17.0,
                                                    double beta = 5.0, std::uint64_t seed = 1, unsigned threads = 1) {
    RunConfig cfg;
    cfg.channel.seed = seed;
    cfg.snr_db = {snr_db};
    cfg.n_packets = n_packets;
    cfg.sigma_e = SigmaEPolicy::fixed(0.0);
    cfg.beta = BetaPolicy::fixed(beta);
    cfg.analytical.mode = rx::AnalyticalMode::consistent;
    cfg.simulate_errors = false;
    cfg.fit = false;
    cfg.threads = threads;
    const auto sim = pipeline::run_simulation_flow(cfg);
    const auto ana = pipeline::run_analysis_flow(cfg, beta);
    FlowEquivalenceReport rep;
    const auto& a = ana.points[0].gamma_eff;
    const auto& s = sim.points[0].gamma_eff;
    for (std::size_t k = 0; k < s.size(); ++k) {
        rep.max_relative_deviation = std::max(rep.max_relative_deviation, std::abs(a[k] - s[k]) / s[k]);
    }
    rep.same_channels = sim.channel_digest == ana.channel_digest;
    rep.pass = rep.same_channels && rep.max_relative_deviation < 1e-10;
    return rep;
}

// ---------------------------------------------------- distribution match

struct DistributionMatchOptions {
    std::size_t n_packets = 20000;
    std::size_t calibration_packets = 2000;
    std::vector<double> calibration_snr_db{25, 30, 35, 40, 45, 50, 55};
    double miso_snr_db = 9.0;
    double mimo_snr_db = 17.0;
    double sigma_e = 0.1;
    double miso_ks_max = 0.01;
    double mimo_ks_max = 0.05;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

struct DistributionMatchReport {
    double beta_miso = 0.0;
    double beta_mimo = 0.0;
    double miso_ks = 0.0;
    double miso_max_relative_deviation = 0.0;
    double mimo_ks_paper_literal = 0.0;
    double mimo_ks_consistent = 0.0;
    double mimo_log_stddev_perfect = 0.0;
    double mimo_log_stddev_imperfect = 0.0;
    /// KS between sigma_e = 0 and sigma_e > 0 simulation samples, SIMO vs MIMO.
    double simo_shift_ks = 0.0;
    double mimo_shift_ks = 0.0;
    bool miso_pass = false;
    bool mimo_ks_pass = false;
    bool spread_pass = false;
    bool pass = false;
};

inline double log_stddev(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += std::log(x);
    mean /= static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (std::log(x) - mean) * (std::log(x) - mean);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

/// beta is calibrated per geometry from a perfect-CSI simulation sweep and
/// then shared by every flow and sigma_e of that geometry.
inline DistributionMatchReport distribution_match_suite(const DistributionMatchOptions& opts = {}) {
    auto geometry = [&](std::size_t n_t, std::size_t n_r) {
        RunConfig cfg;
        cfg.channel.n_t = n_t;
        cfg.channel.n_r = n_r;
        cfg.channel.n_s = std::min(n_t, n_r);
        cfg.channel.seed = opts.seed;
        cfg.threads = opts.threads;
        cfg.fit = false;
        return cfg;
    };
    auto calibrated_beta = [&](RunConfig cfg) {
        cfg.snr_db = opts.calibration_snr_db;
        cfg.n_packets = opts.calibration_packets;
        cfg.sigma_e = SigmaEPolicy::fixed(0.0);
        cfg.beta = BetaPolicy::calibrated();
        const auto out = pipeline::run_simulation_flow(cfg);
        if (!out.ok()) throw Error("distribution-match: beta calibration failed: " + out.failure);
        return out.beta;
    };
    auto samples = [&](RunConfig cfg, double snr_db, double se, double beta) {
        cfg.snr_db = {snr_db};
        cfg.n_packets = opts.n_packets;
        cfg.sigma_e = SigmaEPolicy::fixed(se);
        cfg.beta = BetaPolicy::fixed(beta);
        cfg.simulate_errors = false;
        return pipeline::run_simulation_flow(cfg).points[0].gamma_eff;
    };

    DistributionMatchReport rep;
    const RunConfig miso = geometry(2, 1);
    rep.beta_miso = calibrated_beta(miso);
    const auto miso0 = samples(miso, opts.miso_snr_db, 0.0, rep.beta_miso);
    const auto miso1 = samples(miso, opts.miso_snr_db, opts.sigma_e, rep.beta_miso);
    rep.miso_ks = sgn::ks_distance(miso0, miso1);
    for (std::size_t k = 0; k < miso0.size(); ++k) {
        rep.miso_max_relative_deviation = std::max(rep.miso_max_relative_deviation, std::abs(miso1[k] - miso0[k]) / miso0[k]);
    }
    rep.miso_pass = rep.miso_ks < opts.miso_ks_max;

    const RunConfig mimo = geometry(2, 2);
    rep.beta_mimo = calibrated_beta(mimo);
    const auto mimo0 = samples(mimo, opts.mimo_snr_db, 0.0, rep.beta_mimo);
    const auto mimo1 = samples(mimo, opts.mimo_snr_db, opts.sigma_e, rep.beta_mimo);
    RunConfig ana_cfg = mimo;
    ana_cfg.snr_db = {opts.mimo_snr_db};
    ana_cfg.n_packets = opts.n_packets;
    ana_cfg.sigma_e = SigmaEPolicy::fixed(opts.sigma_e);
    const auto ana = pipeline::run_analysis_flow(ana_cfg, rep.beta_mimo);
    rep.mimo_ks_paper_literal = sgn::ks_distance(ana.points[0].gamma_eff_paper_literal, mimo1);
    rep.mimo_ks_consistent = sgn::ks_distance(ana.points[0].gamma_eff_consistent, mimo1);
    rep.mimo_ks_pass = std::min(rep.mimo_ks_paper_literal, rep.mimo_ks_consistent) < opts.mimo_ks_max;
    rep.mimo_log_stddev_perfect = log_stddev(mimo0);
    rep.mimo_log_stddev_imperfect = log_stddev(mimo1);
    rep.spread_pass = rep.mimo_log_stddev_imperfect > rep.mimo_log_stddev_perfect;
    rep.mimo_shift_ks = sgn::ks_distance(mimo0, mimo1);

    const RunConfig simo = geometry(1, 2);
    rep.simo_shift_ks = sgn::ks_distance(samples(simo, opts.mimo_snr_db, 0.0, rep.beta_mimo),
                                         samples(simo, opts.mimo_snr_db, opts.sigma_e, rep.beta_mimo));

    rep.pass = rep.miso_pass && rep.mimo_ks_pass && rep.spread_pass;
    return rep;
}

// ------------------------------------------------------------------ JSON

inline json to_json(const pipeline::Lemma1Report& r) {
    json cases = json::array();
    for (const auto& c : r.cases) {
        cases.push_back({{"variant", c.variant},
                         {"n_t", c.n_t},
                         {"n_r", c.n_r},
                         {"sigma_e", c.sigma_e},
                         {"deviation_simulation", c.deviation_simulation},
                         {"deviation_analysis", c.deviation_analysis},
                         {"deviation_analysis_paper_literal", c.deviation_analysis_paper_literal},
                         {"expect_invariant", c.expect_invariant},
                         {"pass", c.pass}});
    }
    return {{"suite", "lemma1"}, {"pass", r.pass}, {"cases", cases}};
}

inline json to_json(const OracleReport& r) {
    auto entries = [](const std::vector<OracleEntry>& es) {
        json out = json::array();
        for (const auto& e : es) {
            out.push_back({{"target", e.target}, {"instance", e.instance}, {"sigma_e", e.sigma_e}, {"max_se_score", e.score}});
        }
        return out;
    };
    return {{"suite", "oracles"},
            {"pass", r.trace_pass && r.term_pass},
            {"trace_pass", r.trace_pass},
            {"term_pass", r.term_pass},
            {"max_trace_score", r.max_trace_score},
            {"max_term_score", r.max_term_score},
            {"trace", entries(r.trace_entries)},
            {"terms", entries(r.term_entries)}};
}

inline json to_json(const DistributionMatchReport& r) {
    return {{"suite", "distribution-match"},
            {"pass", r.pass},
            {"beta_miso", r.beta_miso},
            {"beta_mimo", r.beta_mimo},
            {"miso_ks", r.miso_ks},
            {"miso_max_relative_deviation", r.miso_max_relative_deviation},
            {"mimo_ks_paper_literal", r.mimo_ks_paper_literal},
            {"mimo_ks_consistent", r.mimo_ks_consistent},
            {"mimo_log_stddev_perfect", r.mimo_log_stddev_perfect},
            {"mimo_log_stddev_imperfect", r.mimo_log_stddev_imperfect},
            {"simo_shift_ks", r.simo_shift_ks},
            {"mimo_shift_ks", r.mimo_shift_ks},
            {"miso_pass", r.miso_pass},
            {"mimo_ks_pass", r.mimo_ks_pass},
            {"spread_pass", r.spread_pass}};
}

}  // namespace eesm::validate
