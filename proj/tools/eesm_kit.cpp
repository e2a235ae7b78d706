// eesm-kit: command-line front end for the EESM / log-SGN abstraction toolkit.
//
// Exit codes: 0 success, 1 configuration or input error, 2 runtime error,
// 3 uninformative calibration dataset, 4 validation suite failed.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eesm/eesm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace eesm;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitUninformative = 3;
constexpr int kExitValidation = 4;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    return in;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

void write_json(const fs::path& path, const json& j) { open_output(path) << j.dump(2) << '\n'; }

/// Options shared by simulate and analyze.
struct RunFlags {
    std::string config_path;
    std::vector<double> snr_db;
    std::string sigma_e;
    std::optional<std::size_t> packets;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string out_dir;
    std::string mode;
    std::string channels;
    std::string awgn_csv;
    int verbosity = -1;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--snr-db", f.snr_db, "SNR point(s) in dB")->delimiter(',');
    cmd->add_option("--sigma-e", f.sigma_e, "estimation-error std deviation, or 'rule' for 1/(n_t SNR)");
    cmd->add_option("--packets", f.packets, "packets per SNR point");
    cmd->add_option("--seed", f.seed, "master seed (overrides EESM_KIT_SEED and the config)");
    cmd->add_option("--threads", f.threads, "worker threads (0 = all cores); results do not depend on it");
    cmd->add_option("--out", f.out_dir, "output directory");
    cmd->add_option("--mode", f.mode, "analytical mode")->check(CLI::IsMember({"paper_literal", "consistent"}));
    cmd->add_option("--channels", f.channels, "channel-import JSONL used instead of the generator")->check(CLI::ExistingFile);
    cmd->add_option("--awgn-csv", f.awgn_csv, "tabulated AWGN reference (snr_db,per)")->check(CLI::ExistingFile);
    cmd->add_option("--verbosity", f.verbosity, "0 quiet, 1 summary, 2 detail");
}

config::CliConfig resolve(const RunFlags& f) {
    config::CliConfig cfg;
    if (!f.config_path.empty()) cfg = config::parse(read_file(f.config_path));
    if (const char* env = std::getenv("EESM_KIT_SEED")) {
        try {
            cfg.run.channel.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("EESM_KIT_SEED must be an unsigned integer");
        }
    }
    if (f.seed) cfg.run.channel.seed = *f.seed;
    if (!f.snr_db.empty()) cfg.run.snr_db = f.snr_db;
    if (!f.sigma_e.empty()) cfg.run.sigma_e = config::sigma_e_from_string(f.sigma_e);
    if (f.packets) cfg.run.n_packets = *f.packets;
    if (f.threads) cfg.run.threads = *f.threads;
    if (!f.out_dir.empty()) cfg.output_dir = f.out_dir;
    if (!f.mode.empty()) cfg.run.analytical.mode = config::analytical_mode_from_string(f.mode);
    if (!f.channels.empty()) cfg.channels_path = f.channels;
    if (!f.awgn_csv.empty()) cfg.awgn_csv_path = f.awgn_csv;
    if (f.verbosity >= 0) cfg.verbosity = f.verbosity;
    if (cfg.awgn_csv_path) {
        auto in = open_input(*cfg.awgn_csv_path);
        cfg.run.awgn_reference = l2s::read_awgn_csv(in);
    }
    cfg.run.validate();
    return cfg;
}

pipeline::ChannelSource channel_source(const config::CliConfig& cfg) {
    if (!cfg.channels_path) return {};
    auto in = open_input(*cfg.channels_path);
    auto table = std::make_shared<const std::vector<channel::ChannelRealization>>(io::read_channels_jsonl(in, cfg.run.channel));
    if (table->empty()) throw ConfigError("channel file has no packets");
    return pipeline::table_source(table);
}

json fit_json(const std::optional<sgn::FitReport>& fit) { return fit ? io::to_json(*fit) : json(nullptr); }

int cmd_simulate(const RunFlags& flags, std::optional<double> beta) {
    auto cfg = resolve(flags);
    if (beta) cfg.run.beta = pipeline::BetaPolicy::fixed(*beta);
    cfg.run.validate();
    const auto out = pipeline::run_simulation_flow(cfg.run, channel_source(cfg));

    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    {
        auto f = open_output(dir / "records.jsonl");
        for (const auto& pt : out.points) io::write_records_jsonl(f, pt.records);
    }
    json points = json::array();
    auto per = open_output(dir / "per_vs_snr.csv");
    per << "snr_db,sigma_e2,per,errors,packets\n";
    per.precision(17);
    for (const auto& pt : out.points) {
        points.push_back({{"snr_db", pt.snr_db}, {"sigma_e2", pt.sigma_e2}, {"samples", pt.gamma_eff}, {"fit", fit_json(pt.fit)}});
        per << pt.snr_db << ',' << pt.sigma_e2 << ',' << pt.per() << ',' << pt.errors << ',' << pt.records.size() << '\n';
    }
    json summary{{"beta", out.ok() ? json(out.beta) : json(nullptr)},
                 {"flow", "simulation"},
                 {"seed", cfg.run.channel.seed},
                 {"points", points}};
    if (!out.ok()) summary["failure"] = out.failure;
    write_json(dir / "gamma_eff.json", summary);
    if (out.calibration) write_json(dir / "calibration.json", io::to_json(*out.calibration));

    if (!out.ok()) {
        std::cerr << "eesm-kit: simulation flow failed: " << out.failure << '\n';
        return kExitRuntime;
    }
    const auto& first = out.points.front();
    write_json(dir / "fit.json", fit_json(first.fit));
    {
        std::vector<double> db;
        db.reserve(first.gamma_eff.size());
        for (double g : first.gamma_eff) db.push_back(l2s::to_db(g));
        auto h = open_output(dir / "hist.csv");
        io::write_histogram_csv(h, db);
    }
    if (cfg.verbosity > 0) {
        std::cout << "beta " << out.beta << '\n';
        for (const auto& pt : out.points) std::cout << "snr_db " << pt.snr_db << "  PER " << pt.per() << '\n';
        std::cout << "wrote " << dir.string() << '\n';
    }
    return 0;
}

std::vector<double> simulation_samples(const json& summary, double snr_db) {
    for (const auto& pt : summary.at("points")) {
        if (pt.at("snr_db").get<double>() == snr_db) return pt.at("samples").get<std::vector<double>>();
    }
    return {};
}

int cmd_analyze(const RunFlags& flags, std::optional<double> beta, const std::string& simulation_dir) {
    auto cfg = resolve(flags);
    std::optional<json> sim;
    if (!simulation_dir.empty()) {
        try {
            sim = json::parse(read_file((fs::path(simulation_dir) / "gamma_eff.json").string()));
        } catch (const json::exception& e) {
            throw ConfigError(std::string("simulation run: ") + e.what());
        }
        if (!beta && sim->contains("beta") && (*sim)["beta"].is_number()) beta = (*sim)["beta"].get<double>();
    }
    if (!beta) throw ConfigError("beta required (obtain from simulation steps)");
    if (!(*beta > 0.0)) throw ConfigError("beta must be > 0");

    const auto out = pipeline::run_analysis_flow(cfg.run, *beta, channel_source(cfg));
    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);

    json points = json::array();
    json fits = json::array();
    json ks = json::array();
    for (const auto& pt : out.points) {
        points.push_back({{"snr_db", pt.snr_db},
                          {"sigma_e2", pt.sigma_e2},
                          {"samples", pt.gamma_eff},
                          {"samples_paper_literal", pt.gamma_eff_paper_literal},
                          {"samples_consistent", pt.gamma_eff_consistent}});
        fits.push_back({{"snr_db", pt.snr_db}, {"fit", fit_json(pt.fit)}});
        if (sim) {
            const auto s = simulation_samples(*sim, pt.snr_db);
            if (s.size() >= 2) {
                ks.push_back({{"snr_db", pt.snr_db},
                              {"ks", sgn::ks_distance(pt.gamma_eff, s)},
                              {"ks_paper_literal", sgn::ks_distance(pt.gamma_eff_paper_literal, s)},
                              {"ks_consistent", sgn::ks_distance(pt.gamma_eff_consistent, s)}});
            }
        }
    }
    const char* mode = cfg.run.analytical.mode == rx::AnalyticalMode::consistent ? "consistent" : "paper_literal";
    write_json(dir / "analysis_gamma_eff.json", {{"beta", *beta}, {"flow", "analysis"}, {"mode", mode}, {"points", points}});
    write_json(dir / "analysis_fit.json", out.points.size() == 1 ? fit_json(out.points.front().fit) : fits);
    if (sim) write_json(dir / "ks_vs_simulation.json", {{"mode", mode}, {"points", ks}});
    if (cfg.verbosity > 0) {
        for (const auto& k : ks) std::cout << "snr_db " << k["snr_db"] << "  KS " << k["ks"] << '\n';
        std::cout << "wrote " << dir.string() << '\n';
    }
    return 0;
}

struct CalibrateFlags {
    std::string trace;
    std::string awgn_csv;
    std::string out;
    double beta_lo = 0.1;
    double beta_hi = 1000.0;
    std::string objective = "per_packet";
};

int cmd_calibrate(const CalibrateFlags& f) {
    auto ref_in = open_input(f.awgn_csv);
    const auto ref = l2s::read_awgn_csv(ref_in);
    auto trace_in = open_input(f.trace);
    const auto records = io::read_records_jsonl(trace_in);
    l2s::CalibrationOptions opts;
    opts.beta_lo = f.beta_lo;
    opts.beta_hi = f.beta_hi;
    opts.objective = f.objective == "binned" ? l2s::CalibrationObjective::binned : l2s::CalibrationObjective::per_packet;
    const auto cal = l2s::calibrate_beta(records, ref, opts);
    const json j = io::to_json(cal);
    std::cout << j.dump(2) << '\n';
    if (!f.out.empty()) write_json(f.out, j);
    return 0;
}

int cmd_validate(const std::string& suite, const std::string& out_dir, unsigned threads) {
    json report;
    if (suite == "lemma1") {
        pipeline::Lemma1Options opts;
        opts.threads = threads;
        report = validate::to_json(pipeline::lemma1_suite(opts));
    } else if (suite == "oracles") {
        report = validate::to_json(validate::oracle_suite());
    } else if (suite == "distribution-match") {
        validate::DistributionMatchOptions opts;
        opts.threads = threads;
        report = validate::to_json(validate::distribution_match_suite(opts));
    } else {
        throw ConfigError("unknown suite '" + suite + "' (lemma1, oracles, distribution-match)");
    }
    const fs::path dir = out_dir.empty() ? fs::path("out") : fs::path(out_dir);
    fs::create_directories(dir);
    write_json(dir / "report.json", report);
    const bool pass = report["pass"].get<bool>();
    std::cout << suite << ": " << (pass ? "pass" : "FAIL") << '\n';
    return pass ? 0 : kExitValidation;
}

int cmd_fit(const std::string& samples_path, const std::string& out) {
    auto in = open_input(samples_path);
    const auto samples = io::read_samples(in);
    const auto fit = sgn::fit_logsgn(samples);
    const json j = io::to_json(fit);
    std::cout << j.dump(2) << '\n';
    if (!out.empty()) write_json(out, j);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EESM effective-SINR abstraction under imperfect channel estimation", "eesm-kit"};
    app.require_subcommand(1);

    RunFlags sim_flags;
    std::optional<double> sim_beta;
    auto* simulate = app.add_subcommand("simulate", "simulation flow: records, Gamma_eff samples, fit, PER curve");
    add_run_flags(simulate, sim_flags);
    simulate->add_option("--beta", sim_beta, "fixed EESM beta (calibrated when omitted)");

    RunFlags ana_flags;
    std::optional<double> ana_beta;
    std::string simulation_dir;
    auto* analyze = app.add_subcommand("analyze", "analysis flow from the closed-form SINR expectations");
    add_run_flags(analyze, ana_flags);
    analyze->add_option("--beta", ana_beta, "EESM beta from the simulation steps");
    analyze->add_option("--simulation", simulation_dir, "simulation output directory (beta and KS reference)")
        ->check(CLI::ExistingDirectory);

    CalibrateFlags cal;
    auto* calibrate = app.add_subcommand("calibrate", "fit beta to a {Gamma, error} trace");
    calibrate->add_option("--trace", cal.trace, "PacketRecord JSONL")->required()->check(CLI::ExistingFile);
    calibrate->add_option("--awgn-csv", cal.awgn_csv, "AWGN reference CSV (snr_db,per)")->required()->check(CLI::ExistingFile);
    calibrate->add_option("--out", cal.out, "write the calibration JSON here");
    calibrate->add_option("--beta-lo", cal.beta_lo, "lower end of the beta search");
    calibrate->add_option("--beta-hi", cal.beta_hi, "upper end of the beta search");
    calibrate->add_option("--objective", cal.objective, "calibration objective")
        ->check(CLI::IsMember({"per_packet", "binned"}));

    std::string suite;
    std::string validate_out;
    unsigned validate_threads = 1;
    auto* validate_cmd = app.add_subcommand("validate", "run a validation suite and write report.json");
    validate_cmd->add_option("suite", suite, "lemma1 | oracles | distribution-match")->required();
    validate_cmd->add_option("--out", validate_out, "output directory");
    validate_cmd->add_option("--threads", validate_threads, "worker threads");

    std::string samples_path;
    std::string fit_out;
    auto* fit = app.add_subcommand("fit", "fit a log-SGN law to effective-SINR samples");
    fit->add_option("--samples", samples_path, "JSON array or whitespace-separated linear SINRs")
        ->required()
        ->check(CLI::ExistingFile);
    fit->add_option("--out", fit_out, "write the fit report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*simulate) return cmd_simulate(sim_flags, sim_beta);
        if (*analyze) return cmd_analyze(ana_flags, ana_beta, simulation_dir);
        if (*calibrate) return cmd_calibrate(cal);
        if (*validate_cmd) return cmd_validate(suite, validate_out, validate_threads);
        if (*fit) return cmd_fit(samples_path, fit_out);
    } catch (const UninformativeDatasetError& e) {
        std::cerr << "eesm-kit: " << e.what() << '\n';
        return kExitUninformative;
    } catch (const ConfigError& e) {
        std::cerr << "eesm-kit: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParseError& e) {
        std::cerr << "eesm-kit: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "eesm-kit: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitRuntime;
}
