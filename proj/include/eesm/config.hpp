#pragma once

// JSON run configuration for the command-line tool. Unknown keys are
// rejected; missing keys keep the RunConfig defaults.

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "eesm/errors.hpp"
#include "eesm/pipelines.hpp"

namespace eesm::config {

using nlohmann::json;

struct CliConfig {
    pipeline::RunConfig run;
    std::string output_dir = "out";
    int verbosity = 1;
    std::optional<std::string> channels_path;   // channel-import JSONL
    std::optional<std::string> awgn_csv_path;   // tabulated AWGN reference
};

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "n_t", "n_r", "n_s", "n_sc", "n_taps", "tap_decay", "seed", "snr_db", "sigma_e", "n_packets",
        "modulation_order", "symbols_per_packet", "analytical_mode", "drop_duplicate_noise_term_in_E", "beta",
        "beta_search", "calibration_objective", "calibration_bin_width_db", "awgn_reference",
        "error_correlated_across_subcarriers", "estimated_channel_sinr", "channels", "threads", "output_dir",
        "verbosity"};
    return keys;
}

namespace detail {

template <class T>
T get(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

inline std::size_t count(const json& j, const char* key) {
    const json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError(std::string("config key '") + key + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

}  // namespace detail

inline rx::AnalyticalMode analytical_mode_from_string(const std::string& s) {
    if (s == "paper_literal") return rx::AnalyticalMode::paper_literal;
    if (s == "consistent") return rx::AnalyticalMode::consistent;
    throw ConfigError("analytical_mode must be \"paper_literal\" or \"consistent\"");
}

inline pipeline::SigmaEPolicy sigma_e_from_json(const json& v) {
    if (v.is_string()) {
        if (v.get<std::string>() == "rule") return pipeline::SigmaEPolicy::rule();
        throw ConfigError("sigma_e must be a number or \"rule\"");
    }
    if (!v.is_number()) throw ConfigError("sigma_e must be a number or \"rule\"");
    return pipeline::SigmaEPolicy::fixed(v.get<double>());
}

inline pipeline::SigmaEPolicy sigma_e_from_string(const std::string& s) {
    if (s == "rule") return pipeline::SigmaEPolicy::rule();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw ConfigError("--sigma-e must be a number or \"rule\"");
    return pipeline::SigmaEPolicy::fixed(v);
}

/// Applies `j` on top of `cfg`.
inline void apply(CliConfig& cfg, const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!known_keys().contains(key)) throw ConfigError("unknown config key '" + key + "'");
    }
    auto& run = cfg.run;
    auto& ch = run.channel;
    if (j.contains("n_t")) ch.n_t = detail::count(j, "n_t");
    if (j.contains("n_r")) ch.n_r = detail::count(j, "n_r");
    if (j.contains("n_s")) ch.n_s = detail::count(j, "n_s");
    if (j.contains("n_sc")) ch.n_sc = detail::count(j, "n_sc");
    if (j.contains("n_taps")) ch.n_taps = detail::count(j, "n_taps");
    if (j.contains("tap_decay")) ch.decay = detail::get<double>(j, "tap_decay");
    if (j.contains("seed")) ch.seed = detail::get<std::uint64_t>(j, "seed");
    if (j.contains("snr_db")) {
        const json& v = j["snr_db"];
        run.snr_db = v.is_array() ? detail::get<std::vector<double>>(j, "snr_db") : std::vector<double>{detail::get<double>(j, "snr_db")};
    }
    if (j.contains("sigma_e")) run.sigma_e = sigma_e_from_json(j["sigma_e"]);
    if (j.contains("n_packets")) run.n_packets = detail::count(j, "n_packets");
    if (j.contains("modulation_order")) run.modulation_order = detail::get<int>(j, "modulation_order");
    if (j.contains("symbols_per_packet")) run.symbols_per_packet = detail::count(j, "symbols_per_packet");
    if (j.contains("analytical_mode")) run.analytical.mode = analytical_mode_from_string(detail::get<std::string>(j, "analytical_mode"));
    if (j.contains("drop_duplicate_noise_term_in_E")) {
        run.analytical.drop_duplicate_noise_term_in_E = detail::get<bool>(j, "drop_duplicate_noise_term_in_E");
    }
    if (j.contains("beta")) {
        const json& v = j["beta"];
        if (v.is_string() && v.get<std::string>() == "calibrate") {
            run.beta = pipeline::BetaPolicy::calibrated();
        } else if (v.is_number()) {
            run.beta = pipeline::BetaPolicy::fixed(v.get<double>());
        } else {
            throw ConfigError("beta must be a positive number or \"calibrate\"");
        }
    }
    if (j.contains("beta_search")) {
        const auto range = detail::get<std::vector<double>>(j, "beta_search");
        if (range.size() != 2) throw ConfigError("beta_search must be [lo, hi]");
        run.calibration.beta_lo = range[0];
        run.calibration.beta_hi = range[1];
    }
    if (j.contains("calibration_objective")) {
        const auto s = detail::get<std::string>(j, "calibration_objective");
        if (s == "per_packet") {
            run.calibration.objective = l2s::CalibrationObjective::per_packet;
        } else if (s == "binned") {
            run.calibration.objective = l2s::CalibrationObjective::binned;
        } else {
            throw ConfigError("calibration_objective must be \"per_packet\" or \"binned\"");
        }
    }
    if (j.contains("calibration_bin_width_db")) run.calibration.bin_width_db = detail::get<double>(j, "calibration_bin_width_db");
    if (j.contains("awgn_reference")) {
        const json& v = j["awgn_reference"];
        if (v.is_string()) {
            cfg.awgn_csv_path = v.get<std::string>();
        } else if (v.is_object()) {
            for (const auto& [key, _] : v.items()) {
                if (key != "mid_db" && key != "slope_db") throw ConfigError("unknown awgn_reference key '" + key + "'");
            }
            run.awgn_reference = l2s::AwgnPerReference::parametric(detail::get<double>(v, "mid_db"), detail::get<double>(v, "slope_db"));
        } else {
            throw ConfigError("awgn_reference must be a CSV path or {\"mid_db\", \"slope_db\"}");
        }
    }
    if (j.contains("error_correlated_across_subcarriers")) {
        run.error_correlated_across_subcarriers = detail::get<bool>(j, "error_correlated_across_subcarriers");
    }
    if (j.contains("estimated_channel_sinr")) run.estimated_channel_sinr = detail::get<bool>(j, "estimated_channel_sinr");
    if (j.contains("channels")) cfg.channels_path = detail::get<std::string>(j, "channels");
    if (j.contains("threads")) run.threads = detail::get<unsigned>(j, "threads");
    if (j.contains("output_dir")) cfg.output_dir = detail::get<std::string>(j, "output_dir");
    if (j.contains("verbosity")) cfg.verbosity = detail::get<int>(j, "verbosity");
}

inline CliConfig parse(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    CliConfig cfg;
    config::apply(cfg, j);
    return cfg;
}

}  // namespace eesm::config
