#include <gtest/gtest.h>

#include <bit>
#include <random>

#include "eesm/channel.hpp"
#include "eesm/mmse.hpp"
#include "eesm/toy_phy.hpp"
#include "test_util.hpp"

using namespace eesm;
using namespace eesm::phy;
using linalg::CMatrix;

TEST(Qam, UnitAverageEnergy) {
    for (int order : {4, 16, 64}) {
        const QamConstellation q(order);
        double e = 0.0;
        for (int i = 0; i < q.levels(); ++i) {
            for (int k = 0; k < q.levels(); ++k) e += std::norm(q.modulate(i, k));
        }
        EXPECT_NEAR(e / order, 1.0, 1e-14) << order;
    }
    EXPECT_THROW(QamConstellation(32), ConfigError);
}

TEST(Qam, NeighbouringPointsDifferInOneBit) {
    const QamConstellation q(64);
    for (int k = 0; k + 1 < q.levels(); ++k) {
        EXPECT_EQ(std::popcount(static_cast<unsigned>(QamConstellation::gray_encode(k) ^ QamConstellation::gray_encode(k + 1))), 1);
    }
    for (int g = 0; g < 8; ++g) EXPECT_EQ(QamConstellation::gray_encode(QamConstellation::gray_decode(g)), g);
}

TEST(Qam, SlicerInvertsModulator) {
    for (int order : {4, 16, 64}) {
        const QamConstellation q(order);
        for (int i = 0; i < q.levels(); ++i) {
            for (int k = 0; k < q.levels(); ++k) {
                const auto s = q.modulate(i, k);
                EXPECT_EQ(q.slice(s.real()), i);
                EXPECT_EQ(q.slice(s.imag()), k);
            }
        }
        // far outside the grid clamps to the edge point
        EXPECT_EQ(q.slice(100.0), QamConstellation::gray_encode(q.levels() - 1));
    }
}

namespace {

struct Link {
    std::vector<CMatrix> H, F, W;
    std::vector<SubcarrierLink> links;
};

Link make_link(std::size_t n_sc, double snr_linear, std::uint64_t seed) {
    channel::ChannelConfig cfg;
    cfg.n_sc = n_sc;
    cfg.seed = seed;
    const auto chan = channel::generate_channel(cfg, 0);
    Link l{chan.H, chan.F, {}, {}};
    for (std::size_t i = 0; i < n_sc; ++i) l.W.push_back(rx::mmse_detector(l.H[i], l.F[i], {snr_linear, 1.0}));
    for (std::size_t i = 0; i < n_sc; ++i) l.links.push_back({&l.H[i], &l.F[i], &l.W[i], &l.H[i]});
    return l;
}

}  // namespace

TEST(PacketError, NoiselessLinkNeverErrs) {
    const double snr = 1e9;
    const Link l = make_link(16, snr, 3);
    const ToyPhyConfig cfg{64, 4, 1.0, 1.0 / snr};
    Rng rng(1);
    int errors = 0;
    for (int k = 0; k < 100; ++k) errors += simulate_packet_error(l.links, cfg, rng) ? 1 : 0;
    EXPECT_EQ(errors, 0);
}

TEST(PacketError, VeryLowSnrAlwaysErrs) {
    const double snr = 0.01;
    const Link l = make_link(16, snr, 4);
    const ToyPhyConfig cfg{64, 4, 1.0, 1.0 / snr};
    Rng rng(2);
    int errors = 0;
    for (int k = 0; k < 100; ++k) errors += simulate_packet_error(l.links, cfg, rng) ? 1 : 0;
    EXPECT_EQ(errors, 100);
}

TEST(PacketError, ScalarAwgnMatchesClosedFormSer) {
    const CMatrix one{{1.0}};
    const std::vector<SubcarrierLink> links{{&one, &one, &one, &one}};
    for (auto [order, snr_db] : {std::pair{4, 8.0}, std::pair{16, 16.0}, std::pair{64, 22.0}}) {
        const double snr = l2s::from_db(snr_db);
        const ToyPhyConfig cfg{order, 1, 1.0, 1.0 / snr};
        Rng rng(static_cast<std::uint64_t>(order));
        const int n = 40000;
        int errors = 0;
        for (int k = 0; k < n; ++k) errors += simulate_packet_error(links, cfg, rng) ? 1 : 0;
        const double p = qam_ser(order, snr);
        const double se = std::sqrt(p * (1.0 - p) / n);
        EXPECT_NEAR(static_cast<double>(errors) / n, p, 4.0 * se) << order;
    }
}

TEST(PacketError, DetectorShapeChecked) {
    const CMatrix h{{1.0, 0.0}, {0.0, 1.0}};
    const CMatrix f = CMatrix::identity(2);
    const CMatrix w{{1.0, 0.0}};
    const std::vector<SubcarrierLink> links{{&h, &f, &w, &h}};
    Rng rng(1);
    EXPECT_THROW(simulate_packet_error(links, ToyPhyConfig{}, rng), DimensionError);
}

TEST(QamSer, Limits) {
    EXPECT_NEAR(qam_ser(4, 1e9), 0.0, 1e-300);
    EXPECT_NEAR(qam_ser(64, 1e-9), 1.0 - 1.0 / 64.0, 1e-3);
    // QPSK: SER = 1 - (1 - Q(sqrt(snr)))^2
    const double q = 0.5 * std::erfc(std::sqrt(10.0) / std::sqrt(2.0));
    EXPECT_NEAR(qam_ser(4, 10.0), 1.0 - (1.0 - q) * (1.0 - q), 1e-15);
}

TEST(AwgnToyReference, MonotoneAndMatchesPacketFormula) {
    const auto ref = toy_awgn_reference(64, 1936);
    double prev = 1.0;
    for (double db = -10.0; db <= 60.0; db += 0.1) {
        const double p = ref.per(db);
        EXPECT_LE(p, prev + 1e-15);
        prev = p;
    }
    for (double db : {20.0, 25.0, 30.0}) {
        const double ser = qam_ser(64, l2s::from_db(db));
        EXPECT_NEAR(ref.per(db), 1.0 - std::pow(1.0 - ser, 1936.0), 1e-9);
    }
    EXPECT_THROW(toy_awgn_reference(64, 0), ConfigError);
    EXPECT_THROW(toy_awgn_reference(64, 10, 5.0, 5.0), ConfigError);
}
