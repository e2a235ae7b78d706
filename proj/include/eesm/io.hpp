#pragma once

// Persistence: PacketRecord JSON Lines, channel import, fit/calibration JSON,
// histogram and PER CSVs, and plain sample files.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eesm/channel.hpp"
#include "eesm/errors.hpp"
#include "eesm/l2s.hpp"
#include "eesm/pipelines.hpp"
#include "eesm/sgn.hpp"

namespace eesm::io {

using linalg::CMatrix;
using linalg::cplx;
using nlohmann::json;
using pipeline::Flow;
using pipeline::PacketRecord;
using rx::PostSinrMatrix;

/// Expected Gamma shape when reading records; unchecked when absent.
struct RecordDims {
    std::size_t n_sc = 0;
    std::size_t n_s = 0;
};

inline json to_json(const PacketRecord& r) {
    json gamma = json::array();
    for (std::size_t i = 0; i < r.gamma.n_sc(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < r.gamma.n_s(); ++j) row.push_back(r.gamma(i, j));
        gamma.push_back(std::move(row));
    }
    json out;
    out["packet"] = r.packet;
    out["snr_db"] = r.snr_db;
    out["sigma_e2"] = r.sigma_e2;
    out["gamma"] = std::move(gamma);
    out["error"] = r.error ? 1 : 0;
    out["gamma_eff"] = r.gamma_eff ? json(*r.gamma_eff) : json(nullptr);
    out["flow"] = pipeline::to_string(r.flow);
    return out;
}

namespace detail {

inline const json& field(const json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(line, std::string("missing field '") + key + "'");
    return *it;
}

inline double number(const json& j, const char* what, std::size_t line) {
    if (!j.is_number()) throw ParseError(line, std::string(what) + " must be a number");
    return j.get<double>();
}

inline cplx complex_pair(const json& j, std::size_t line) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw ParseError(line, "complex entries must be [re, im] pairs");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

inline json parse_line(const std::string& text, std::size_t line) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(line, std::string("malformed JSON: ") + e.what());
    }
}

inline bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace detail

inline PacketRecord record_from_json(const json& j, std::size_t line, const std::optional<RecordDims>& dims = {}) {
    static const char* const known[] = {"packet", "snr_db", "sigma_e2", "gamma", "error", "gamma_eff", "flow"};
    if (!j.is_object()) throw ParseError(line, "record must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known)) {
            throw ParseError(line, "unknown field '" + key + "'");
        }
    }
    PacketRecord r;
    const json& packet = detail::field(j, "packet", line);
    if (!packet.is_number_integer() || packet.get<long long>() < 0) throw ParseError(line, "packet must be a non-negative integer");
    r.packet = packet.get<std::size_t>();
    r.snr_db = detail::number(detail::field(j, "snr_db", line), "snr_db", line);
    r.sigma_e2 = detail::number(detail::field(j, "sigma_e2", line), "sigma_e2", line);
    if (!(r.sigma_e2 >= 0.0)) throw ParseError(line, "sigma_e2 must be >= 0");

    const json& err = detail::field(j, "error", line);
    if (!err.is_number_integer() || (err.get<long long>() != 0 && err.get<long long>() != 1)) {
        throw ParseError(line, "error must be 0 or 1");
    }
    r.error = err.get<long long>() == 1;

    const json& ge = detail::field(j, "gamma_eff", line);
    if (!ge.is_null()) {
        const double v = detail::number(ge, "gamma_eff", line);
        if (!(v > 0.0)) throw ParseError(line, "gamma_eff must be positive or null");
        r.gamma_eff = v;
    }

    const json& flow = detail::field(j, "flow", line);
    if (flow == "simulation") {
        r.flow = Flow::simulation;
    } else if (flow == "analysis") {
        r.flow = Flow::analysis;
    } else {
        throw ParseError(line, "flow must be \"simulation\" or \"analysis\"");
    }

    const json& gamma = detail::field(j, "gamma", line);
    if (!gamma.is_array() || gamma.empty() || !gamma[0].is_array() || gamma[0].empty()) {
        throw ParseError(line, "gamma must be a non-empty array of rows");
    }
    const std::size_t n_sc = gamma.size();
    const std::size_t n_s = gamma[0].size();
    if (dims && (dims->n_sc != n_sc || dims->n_s != n_s)) {
        throw ParseError(line, "gamma is " + std::to_string(n_sc) + "x" + std::to_string(n_s) + ", expected " +
                                   std::to_string(dims->n_sc) + "x" + std::to_string(dims->n_s));
    }
    std::vector<double> values;
    values.reserve(n_sc * n_s);
    for (const auto& row : gamma) {
        if (!row.is_array() || row.size() != n_s) throw ParseError(line, "gamma rows must all have the same length");
        for (const auto& v : row) {
            const double x = detail::number(v, "gamma entry", line);
            if (!(x > 0.0) || !std::isfinite(x)) throw ParseError(line, "gamma entries must be positive and finite");
            values.push_back(x);
        }
    }
    r.gamma = PostSinrMatrix(n_sc, n_s, std::move(values));
    return r;
}

inline void write_records_jsonl(std::ostream& out, std::span<const PacketRecord> records) {
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline std::vector<PacketRecord> read_records_jsonl(std::istream& in, const std::optional<RecordDims>& dims = {}) {
    std::vector<PacketRecord> out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (detail::blank(text)) continue;
        out.push_back(record_from_json(detail::parse_line(text, line), line, dims));
    }
    return out;
}

/// Reads `{"packet", "H": [sc][row][col] = [re, im], "F"?: ...}` lines. H
/// must be n_r x n_t on every subcarrier; F defaults to the SVD precoder.
inline std::vector<channel::ChannelRealization> read_channels_jsonl(std::istream& in, const channel::ChannelConfig& cfg) {
    auto read_matrices = [](const json& arr, std::size_t rows, std::size_t cols, const char* name, std::size_t line) {
        if (!arr.is_array()) throw ParseError(line, std::string(name) + " must be an array of matrices");
        std::vector<CMatrix> out;
        out.reserve(arr.size());
        for (const auto& m : arr) {
            if (!m.is_array() || m.size() != rows) {
                throw ParseError(line, std::string(name) + " matrices must have " + std::to_string(rows) + " rows");
            }
            CMatrix x(rows, cols);
            for (std::size_t r = 0; r < rows; ++r) {
                if (!m[r].is_array() || m[r].size() != cols) {
                    throw ParseError(line, std::string(name) + " matrices must have " + std::to_string(cols) + " columns");
                }
                for (std::size_t c = 0; c < cols; ++c) x(r, c) = detail::complex_pair(m[r][c], line);
            }
            out.push_back(std::move(x));
        }
        return out;
    };

    cfg.validate();
    std::vector<channel::ChannelRealization> out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (detail::blank(text)) continue;
        const json j = detail::parse_line(text, line);
        if (!j.is_object()) throw ParseError(line, "channel line must be a JSON object");
        for (const auto& [key, _] : j.items()) {
            if (key != "packet" && key != "H" && key != "F") throw ParseError(line, "unknown field '" + key + "'");
        }
        const json& packet = detail::field(j, "packet", line);
        if (!packet.is_number_integer() || packet.get<long long>() < 0) throw ParseError(line, "packet must be a non-negative integer");

        channel::ChannelRealization c;
        c.packet = packet.get<std::size_t>();
        c.H = read_matrices(detail::field(j, "H", line), cfg.n_r, cfg.n_t, "H", line);
        if (c.H.size() != cfg.n_sc) {
            throw ParseError(line, "H has " + std::to_string(c.H.size()) + " subcarriers, expected " + std::to_string(cfg.n_sc));
        }
        if (j.contains("F")) {
            c.F = read_matrices(j["F"], cfg.n_t, cfg.n_s, "F", line);
            if (c.F.size() != cfg.n_sc) throw ParseError(line, "F subcarrier count differs from H");
        } else {
            c.F.reserve(cfg.n_sc);
            for (const auto& h : c.H) {
                try {
                    c.F.push_back(channel::svd_precoder(h, cfg.n_s));
                } catch (const Error& e) {
                    throw ParseError(line, e.what());
                }
            }
        }
        out.push_back(std::move(c));
    }
    return out;
}

inline void write_channels_jsonl(std::ostream& out, std::span<const channel::ChannelRealization> channels,
                                 bool include_precoder = true) {
    auto matrices = [](const std::vector<CMatrix>& ms) {
        json arr = json::array();
        for (const auto& m : ms) {
            json rows = json::array();
            for (std::size_t r = 0; r < m.rows(); ++r) {
                json row = json::array();
                for (std::size_t c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
                rows.push_back(std::move(row));
            }
            arr.push_back(std::move(rows));
        }
        return arr;
    };
    for (const auto& c : channels) {
        json j;
        j["packet"] = c.packet;
        j["H"] = matrices(c.H);
        if (include_precoder) j["F"] = matrices(c.F);
        out << j.dump() << '\n';
    }
}

inline json to_json(const sgn::FitReport& f) {
    return {{"mu", f.params.mu},     {"sigma", f.params.sigma},       {"lambda1", f.params.lambda1},
            {"lambda2", f.params.lambda2}, {"loglik", f.log_likelihood}, {"ks", f.ks_distance},
            {"n", f.n_samples},      {"converged", f.converged}};
}

inline sgn::FitReport fit_report_from_json(const json& j) {
    sgn::FitReport f;
    try {
        f.params = {j.at("mu").get<double>(), j.at("sigma").get<double>(), j.at("lambda1").get<double>(),
                    j.at("lambda2").get<double>()};
        f.log_likelihood = j.at("loglik").get<double>();
        f.ks_distance = j.at("ks").get<double>();
        f.n_samples = j.at("n").get<std::size_t>();
        f.converged = j.at("converged").get<bool>();
    } catch (const json::exception& e) {
        throw ParseError(1, std::string("fit report: ") + e.what());
    }
    return f;
}

inline json to_json(const l2s::EesmCalibration& c) {
    return {{"beta", c.beta},
            {"alpha", c.alpha},
            {"objective_value", c.objective_value},
            {"search_range", {c.beta_lo, c.beta_hi}},
            {"degenerate", c.degenerate}};
}

/// Density histogram of `samples` over equal-width bins spanning their range.
inline void write_histogram_csv(std::ostream& out, std::span<const double> samples, std::size_t bins = 50) {
    out << "bin_left,bin_right,density\n";
    if (samples.empty() || bins == 0) return;
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<std::size_t> counts(bins, 0);
    for (double x : samples) {
        auto b = static_cast<std::size_t>((x - lo) / width);
        counts[std::min(b, bins - 1)]++;
    }
    const double n = static_cast<double>(samples.size());
    out.precision(17);
    for (std::size_t b = 0; b < bins; ++b) {
        const double left = lo + width * static_cast<double>(b);
        const double right = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
        out << left << ',' << right << ',' << static_cast<double>(counts[b]) / (n * width) << '\n';
    }
}

/// Reads a JSON array of numbers or whitespace/comma separated numbers.
inline std::vector<double> read_samples(std::istream& in) {
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && (text[first] == '[' || text[first] == '{')) {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError(1, std::string("malformed JSON: ") + e.what());
        }
        if (j.is_object() && j.contains("samples")) j = j["samples"];
        if (!j.is_array()) throw ParseError(1, "expected an array of samples");
        std::vector<double> out;
        for (const auto& v : j) out.push_back(detail::number(v, "sample", 1));
        return out;
    }
    std::vector<double> out;
    std::istringstream lines(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        std::string tok;
        while (row >> tok) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size()) throw ParseError(line_no, "not a number: '" + tok + "'");
            out.push_back(v);
        }
    }
    return out;
}

}  // namespace eesm::io
