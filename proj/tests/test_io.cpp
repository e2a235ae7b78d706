#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "eesm/config.hpp"
#include "eesm/io.hpp"
#include "test_util.hpp"

using namespace eesm;
using pipeline::Flow;
using pipeline::PacketRecord;
using rx::PostSinrMatrix;

namespace {

std::vector<PacketRecord> some_records(std::size_t n, std::size_t n_sc = 3, std::size_t n_s = 2) {
    std::mt19937_64 gen(n);
    std::lognormal_distribution<double> d(2.0, 1.0);
    std::vector<PacketRecord> out;
    for (std::size_t k = 0; k < n; ++k) {
        PacketRecord r;
        r.packet = k;
        r.snr_db = 10.0 + 0.1 * static_cast<double>(k);
        r.sigma_e2 = 0.01;
        std::vector<double> v(n_sc * n_s);
        for (auto& x : v) x = d(gen);
        r.gamma = PostSinrMatrix(n_sc, n_s, std::move(v));
        r.error = k % 3 == 0;
        if (k % 2 == 0) r.gamma_eff = d(gen);
        r.flow = k % 4 == 0 ? Flow::analysis : Flow::simulation;
        out.push_back(std::move(r));
    }
    return out;
}

std::string good_line() {
    return R"({"packet":0,"snr_db":10,"sigma_e2":0.01,"gamma":[[1.5,2.0]],"error":0,"gamma_eff":null,"flow":"simulation"})";
}

std::size_t parse_error_line(const std::string& text, const std::optional<io::RecordDims>& dims = {}) {
    std::istringstream in(text);
    try {
        io::read_records_jsonl(in, dims);
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

}  // namespace

TEST(Records, RoundTripIsExact) {
    const auto recs = some_records(10);
    std::stringstream s;
    io::write_records_jsonl(s, recs);
    const auto back = io::read_records_jsonl(s, io::RecordDims{3, 2});
    ASSERT_EQ(back.size(), recs.size());
    for (std::size_t k = 0; k < recs.size(); ++k) EXPECT_EQ(back[k], recs[k]) << k;
}

TEST(Records, BlankLinesSkipped) {
    std::istringstream in("\n" + good_line() + "\n  \n" + good_line() + "\n");
    EXPECT_EQ(io::read_records_jsonl(in).size(), 2u);
}

TEST(Records, BadErrorValueReportsLine) {
    std::string bad = good_line();
    bad.replace(bad.find("\"error\":0"), 9, "\"error\":2");
    EXPECT_EQ(parse_error_line(good_line() + "\n" + good_line() + "\n" + bad + "\n"), 3u);
}

TEST(Records, MalformedAndIncompleteRecordsRejected) {
    EXPECT_EQ(parse_error_line(good_line() + "\n{\"packet\":1,"), 2u);
    EXPECT_EQ(parse_error_line(R"({"packet":0,"snr_db":10,"sigma_e2":0.01,"gamma":[[1.0]],"error":0,"flow":"simulation"})"), 1u);

    std::string extra = good_line();
    extra.insert(1, "\"colour\":1,");
    EXPECT_EQ(parse_error_line(extra), 1u);

    std::string neg = good_line();
    neg.replace(neg.find("1.5"), 3, "-1.");
    EXPECT_EQ(parse_error_line(neg), 1u);

    std::string flow = good_line();
    flow.replace(flow.find("simulation"), 10, "other");
    EXPECT_EQ(parse_error_line(flow), 1u);

    EXPECT_EQ(parse_error_line(R"({"packet":0,"snr_db":10,"sigma_e2":0.01,"gamma":[[1.0,2.0],[3.0]],"error":0,"gamma_eff":null,"flow":"analysis"})"), 1u);
}

TEST(Records, DimensionMismatchRejected) {
    EXPECT_EQ(parse_error_line(good_line(), io::RecordDims{242, 2}), 1u);
    EXPECT_EQ(parse_error_line(good_line(), io::RecordDims{1, 2}), 0u);
}

TEST(Records, FullSizeTraceCalibrates) {
    const auto ref = l2s::AwgnPerReference::parametric(10.0, 3.0);
    const auto synth = testutil::synthetic_records(400, 6.0, ref, 11);
    std::vector<PacketRecord> recs;
    std::mt19937_64 gen(3);
    std::lognormal_distribution<double> d(0.0, 0.8);
    for (std::size_t k = 0; k < synth.size(); ++k) {
        PacketRecord r;
        r.packet = k;
        const double level = synth[k].gamma(0, 0);
        std::vector<double> v(242 * 2);
        for (auto& x : v) x = level * d(gen);
        r.gamma = PostSinrMatrix(242, 2, std::move(v));
        r.error = synth[k].error;
        recs.push_back(std::move(r));
    }
    std::stringstream s;
    io::write_records_jsonl(s, recs);
    const auto back = io::read_records_jsonl(s, io::RecordDims{242, 2});
    const auto c = l2s::calibrate_beta(back, ref);
    EXPECT_TRUE(std::isfinite(c.beta));
    EXPECT_GE(c.beta, c.beta_lo);
    EXPECT_LE(c.beta, c.beta_hi);
}

TEST(Channels, RoundTripWithAndWithoutPrecoder) {
    channel::ChannelConfig cfg;
    cfg.n_sc = 8;
    std::vector<channel::ChannelRealization> chans{channel::generate_channel(cfg, 0), channel::generate_channel(cfg, 1)};

    std::stringstream with;
    io::write_channels_jsonl(with, chans, true);
    const auto a = io::read_channels_jsonl(with, cfg);
    ASSERT_EQ(a.size(), 2u);
    for (std::size_t p = 0; p < 2; ++p) {
        EXPECT_EQ(a[p].packet, p);
        for (std::size_t i = 0; i < cfg.n_sc; ++i) {
            EXPECT_EQ(linalg::max_abs(a[p].H[i] - chans[p].H[i]), 0.0);
            EXPECT_EQ(linalg::max_abs(a[p].F[i] - chans[p].F[i]), 0.0);
        }
    }

    std::stringstream without;
    io::write_channels_jsonl(without, chans, false);
    const auto b = io::read_channels_jsonl(without, cfg);
    for (std::size_t i = 0; i < cfg.n_sc; ++i) {
        const auto expect = channel::svd_precoder(chans[1].H[i], cfg.n_s);
        EXPECT_LT(linalg::max_abs(b[1].F[i] - expect), 1e-12);
    }
}

TEST(Channels, ShapeErrorsRejected) {
    channel::ChannelConfig cfg;
    cfg.n_sc = 2;
    std::istringstream short_h(R"({"packet":0,"H":[[[[1,0],[0,0]],[[0,0],[1,0]]]]})");
    EXPECT_THROW(io::read_channels_jsonl(short_h, cfg), ParseError);
    std::istringstream bad_entry(R"({"packet":0,"H":[[[[1,0],[0,0]],[[0,0],[1]]],[[[1,0],[0,0]],[[0,0],[1,0]]]]})");
    EXPECT_THROW(io::read_channels_jsonl(bad_entry, cfg), ParseError);
    std::istringstream extra(R"({"packet":0,"G":1})");
    EXPECT_THROW(io::read_channels_jsonl(extra, cfg), ParseError);
}

TEST(FitJson, RoundTripKeepsEveryField) {
    sgn::FitReport f;
    f.params = {1.25, 0.5, -0.3, 2.0};
    f.log_likelihood = -1234.5;
    f.ks_distance = 0.0125;
    f.n_samples = 20000;
    f.converged = true;
    const auto j = io::to_json(f);
    for (const char* key : {"mu", "sigma", "lambda1", "lambda2", "loglik", "ks", "n", "converged"}) EXPECT_TRUE(j.contains(key)) << key;
    const auto back = io::fit_report_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.params.mu, f.params.mu);
    EXPECT_EQ(back.params.sigma, f.params.sigma);
    EXPECT_EQ(back.params.lambda1, f.params.lambda1);
    EXPECT_EQ(back.params.lambda2, f.params.lambda2);
    EXPECT_EQ(back.log_likelihood, f.log_likelihood);
    EXPECT_EQ(back.ks_distance, f.ks_distance);
    EXPECT_EQ(back.n_samples, f.n_samples);
    EXPECT_TRUE(back.converged);
    EXPECT_THROW(io::fit_report_from_json(nlohmann::json{{"mu", 1.0}}), ParseError);
}

TEST(CalibrationJson, Keys) {
    l2s::EesmCalibration c{4.5, 4.5, 0.2, 0.1, 1000.0, false};
    const auto j = io::to_json(c);
    EXPECT_EQ(j["beta"].get<double>(), 4.5);
    EXPECT_EQ(j["alpha"].get<double>(), 4.5);
    EXPECT_EQ(j["search_range"][1].get<double>(), 1000.0);
    EXPECT_FALSE(j["degenerate"].get<bool>());
}

TEST(Histogram, DensityIntegratesToOne) {
    std::mt19937_64 gen(8);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> x(5000);
    for (auto& v : x) v = d(gen);
    std::stringstream s;
    io::write_histogram_csv(s, x, 40);
    std::string line;
    std::getline(s, line);
    EXPECT_EQ(line, "bin_left,bin_right,density");
    double area = 0.0;
    int rows = 0;
    while (std::getline(s, line)) {
        std::istringstream row(line);
        double l = 0, r = 0, dens = 0;
        char c1 = 0, c2 = 0;
        row >> l >> c1 >> r >> c2 >> dens;
        area += (r - l) * dens;
        ++rows;
    }
    EXPECT_EQ(rows, 40);
    EXPECT_NEAR(area, 1.0, 1e-12);

    std::stringstream flat;
    const std::vector<double> same(10, 2.0);
    io::write_histogram_csv(flat, same, 5);
    EXPECT_NE(flat.str().find("2.5"), std::string::npos);
}

TEST(Samples, AcceptedFormats) {
    std::istringstream arr("[1, 2.5, 3e1]");
    EXPECT_EQ(io::read_samples(arr), (std::vector<double>{1.0, 2.5, 30.0}));
    std::istringstream obj(R"({"samples":[4, 5]})");
    EXPECT_EQ(io::read_samples(obj), (std::vector<double>{4.0, 5.0}));
    std::istringstream text("1 2\n3,4\n\n5\n");
    EXPECT_EQ(io::read_samples(text), (std::vector<double>{1.0, 2.0, 3.0, 4.0, 5.0}));

    std::istringstream bad("1 2\n3 x\n");
    try {
        io::read_samples(bad);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    std::istringstream bad_json("[1, \"a\"]");
    EXPECT_THROW(io::read_samples(bad_json), ParseError);
}

TEST(Config, DefaultsAndOverrides) {
    const auto def = config::parse("{}");
    EXPECT_EQ(def.run.channel.n_sc, 242u);
    EXPECT_TRUE(def.run.beta.calibrate);

    const auto c = config::parse(R"({"n_t":2,"n_r":1,"n_s":1,"snr_db":[5,10],"sigma_e":"rule","beta":3.5,
        "analytical_mode":"consistent","awgn_reference":{"mid_db":12,"slope_db":2},"threads":3,"output_dir":"x"})");
    EXPECT_EQ(c.run.channel.n_t, 2u);
    EXPECT_EQ(c.run.snr_db, (std::vector<double>{5.0, 10.0}));
    EXPECT_EQ(c.run.sigma_e.kind, pipeline::SigmaEPolicy::Kind::rule);
    EXPECT_FALSE(c.run.beta.calibrate);
    EXPECT_EQ(c.run.beta.value, 3.5);
    EXPECT_EQ(c.run.analytical.mode, rx::AnalyticalMode::consistent);
    ASSERT_TRUE(c.run.awgn_reference.has_value());
    EXPECT_DOUBLE_EQ(l2s::awgn_per(*c.run.awgn_reference, 12.0), 0.5);
    EXPECT_EQ(c.run.threads, 3u);
    EXPECT_EQ(c.output_dir, "x");

    const auto s = config::parse(R"({"snr_db":17,"sigma_e":0.1,"beta":"calibrate","awgn_reference":"ref.csv"})");
    EXPECT_EQ(s.run.snr_db, (std::vector<double>{17.0}));
    EXPECT_DOUBLE_EQ(s.run.sigma_e.sigma_e2(2, 10.0), 0.01);
    EXPECT_TRUE(s.run.beta.calibrate);
    EXPECT_EQ(s.awgn_csv_path, "ref.csv");
}

TEST(Config, InvalidInputsRejected) {
    EXPECT_THROW(config::parse(R"({"n_tx":2})"), ConfigError);
    EXPECT_THROW(config::parse("{"), ConfigError);
    EXPECT_THROW(config::parse("[]"), ConfigError);
    EXPECT_THROW(config::parse(R"({"n_t":-1})"), ConfigError);
    EXPECT_THROW(config::parse(R"({"sigma_e":"auto"})"), ConfigError);
    EXPECT_THROW(config::parse(R"({"beta":"guess"})"), ConfigError);
    EXPECT_THROW(config::parse(R"({"analytical_mode":"exact"})"), ConfigError);
    EXPECT_THROW(config::parse(R"({"beta_search":[1]})"), ConfigError);
    EXPECT_THROW(config::parse(R"({"awgn_reference":{"mid":1}})"), ConfigError);
    EXPECT_THROW(config::parse(R"({"snr_db":"high"})"), ConfigError);
    EXPECT_THROW(config::sigma_e_from_string("0.1x"), ConfigError);
    EXPECT_DOUBLE_EQ(config::sigma_e_from_string("0.1").sigma_e2(1, 1.0), 0.01);
}
