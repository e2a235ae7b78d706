#include <gtest/gtest.h>

#include <random>

#include "eesm/channel.hpp"
#include "test_util.hpp"

using namespace eesm;
using namespace eesm::channel;
using linalg::conj_transpose;
using linalg::frobenius_norm;
using namespace std::complex_literals;

TEST(ChannelConfig, ValidationRejectsBadGeometry) {
    ChannelConfig c;
    c.n_s = 3;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.n_sc = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.n_taps = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.decay = -1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_NO_THROW(ChannelConfig{}.validate());
}

TEST(TapPowers, NormalisedExponentialProfile) {
    for (double p : tap_powers(4, 0.0)) EXPECT_DOUBLE_EQ(p, 0.25);
    const auto p = tap_powers(3, 1.0);
    const double z = 1.0 + std::exp(-1.0) + std::exp(-2.0);
    EXPECT_NEAR(p[0], 1.0 / z, 1e-15);
    EXPECT_NEAR(p[2], std::exp(-2.0) / z, 1e-15);
}

TEST(GenerateChannel, SingleTapIsFrequencyFlat) {
    ChannelConfig c;
    c.n_taps = 1;
    c.n_sc = 16;
    const auto r = generate_channel(c, 3);
    for (std::size_t i = 1; i < c.n_sc; ++i) EXPECT_EQ(r.H[i], r.H[0]);
}

TEST(GenerateChannel, MultiTapIsFrequencySelective) {
    ChannelConfig c;
    c.n_sc = 64;
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        c.seed = seed;
        const auto r = generate_channel(c, 0);
        double spread = 0.0;
        for (std::size_t i = 1; i < c.n_sc; ++i) spread = std::max(spread, frobenius_norm(r.H[i] - r.H[0]));
        EXPECT_GT(spread, 1e-3);
    }
}

TEST(GenerateChannel, PureFunctionOfConfigAndPacket) {
    ChannelConfig c;
    c.n_sc = 32;
    const auto a = generate_channel(c, 17);
    const auto b = generate_channel(c, 17);
    EXPECT_EQ(a.H, b.H);
    EXPECT_EQ(a.F, b.F);
    EXPECT_EQ(a.seed, b.seed);
    EXPECT_NE(generate_channel(c, 18).H, a.H);
    c.seed = 2;
    EXPECT_NE(generate_channel(c, 17).H, a.H);
}

TEST(GenerateChannel, PrecodersHaveOrthonormalColumns) {
    for (std::size_t n_s : {1u, 2u}) {
        ChannelConfig c;
        c.n_s = n_s;
        c.n_sc = 64;
        const auto r = generate_channel(c, 5);
        for (const auto& F : r.F) {
            EXPECT_LT(frobenius_norm(conj_transpose(F) * F - linalg::CMatrix::identity(n_s)), 1e-10);
        }
    }
}

TEST(GenerateChannel, UnitAveragePowerPerEntry) {
    ChannelConfig c;
    c.n_sc = 3;
    c.n_t = 2;
    c.n_r = 1;
    c.n_s = 1;
    const std::size_t packets = 100000;
    double power = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < packets; ++k) {
        const auto r = generate_channel(c, k);
        for (const auto& v : r.H[1].data()) {
            power += std::norm(v);
            ++count;
        }
    }
    EXPECT_NEAR(power / static_cast<double>(count), 1.0, 0.02);
}

TEST(SvdPrecoder, Examples) {
    const linalg::CMatrix h{{3.0, 0.0}, {0.0, 1.0}};
    const auto f = svd_precoder(h, 1);
    EXPECT_NEAR(std::abs(f(0, 0)), 1.0, 1e-14);
    EXPECT_NEAR(std::abs(f(1, 0)), 0.0, 1e-14);

    std::mt19937_64 gen(1);
    const auto sq = testutil::random_matrix(2, 2, gen);
    const auto full = svd_precoder(sq, 2);
    EXPECT_LT(frobenius_norm(conj_transpose(full) * full - linalg::CMatrix::identity(2)), 1e-12);
    EXPECT_LT(frobenius_norm(full * conj_transpose(full) - linalg::CMatrix::identity(2)), 1e-12);
}

TEST(SvdPrecoder, BeamformingGainEqualsLargestSingularValueSquared) {
    std::mt19937_64 gen(2);
    for (int t = 0; t < 20; ++t) {
        const auto h = testutil::random_matrix(2, 2, gen);
        const auto f = svd_precoder(h, 1);
        // independent: largest eigenvalue of H*H in closed form
        const auto g = conj_transpose(h) * h;
        const double tr = g(0, 0).real() + g(1, 1).real();
        const double det = (g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0)).real();
        const double top = tr / 2.0 + std::sqrt(tr * tr / 4.0 - det);
        EXPECT_NEAR(std::pow(frobenius_norm(h * f), 2), top, 1e-10);
    }
}

TEST(SvdPrecoder, DegenerateInputsRejected) {
    EXPECT_THROW(svd_precoder(linalg::CMatrix(2, 2), 1), ConfigError);
    EXPECT_THROW(svd_precoder(linalg::CMatrix{{1.0, 2.0}}, 2), DimensionError);
}

TEST(InjectError, ZeroVarianceLeavesChannelIntact) {
    std::mt19937_64 gen(3);
    const auto h = testutil::random_matrix(2, 2, gen);
    Rng rng(1);
    const auto e = inject_error(h, {0.0}, rng);
    EXPECT_EQ(e.H_hat, h);
    EXPECT_EQ(e.delta_H, linalg::CMatrix(2, 2));
    EXPECT_THROW(inject_error(h, {-0.1}, rng), ConfigError);
}

TEST(InjectError, EntryVarianceAndCircularSymmetry) {
    const double se2 = 0.04;
    const std::size_t draws = 1000000;
    Rng rng(42);
    const linalg::CMatrix h{{0.3 + 0.1i}};
    double sum_re = 0.0, sum_im = 0.0, sq_re = 0.0, sq_im = 0.0, quad_re = 0.0, quad_im = 0.0;
    for (std::size_t k = 0; k < draws; ++k) {
        const auto d = inject_error(h, {se2}, rng).delta_H(0, 0);
        sum_re += d.real();
        sum_im += d.imag();
        sq_re += d.real() * d.real();
        sq_im += d.imag() * d.imag();
        quad_re += std::pow(d.real(), 4);
        quad_im += std::pow(d.imag(), 4);
    }
    const double n = static_cast<double>(draws);
    EXPECT_NEAR((sq_re + sq_im) / n, se2, 0.01 * se2);
    // per-part variance se2/2; SE of a sample second moment is sqrt((m4 - m2^2) / n)
    const double se_re = std::sqrt((quad_re / n - std::pow(sq_re / n, 2)) / n);
    const double se_im = std::sqrt((quad_im / n - std::pow(sq_im / n, 2)) / n);
    EXPECT_LT(std::abs(sq_re / n - se2 / 2.0), 5.0 * se_re);
    EXPECT_LT(std::abs(sq_im / n - se2 / 2.0), 5.0 * se_im);
    EXPECT_LT(std::abs(sum_re / n), 5.0 * std::sqrt(se2 / 2.0 / n));
    EXPECT_LT(std::abs(sum_im / n), 5.0 * std::sqrt(se2 / 2.0 / n));
}

TEST(InjectError, TraceIdentityHoldsInMonteCarlo) {
    // E[dH A dH*] = se2 tr(A) I for a fixed non-Hermitian A
    const double se2 = 0.04;
    const std::size_t draws = 100000;
    const linalg::CMatrix A{{1.0 + 0.5i, -0.3}, {0.2i, 2.0}};
    const linalg::CMatrix zero(2, 2);
    Rng rng(7);
    std::vector<std::complex<double>> mean(4), m2re(4), m2im(4);
    for (std::size_t k = 0; k < draws; ++k) {
        const auto d = inject_error(zero, {se2}, rng).delta_H;
        const auto x = d * A * conj_transpose(d);
        for (std::size_t e = 0; e < 4; ++e) {
            const auto v = x.data()[e];
            mean[e] += v;
            m2re[e] += v.real() * v.real();
            m2im[e] += v.imag() * v.imag();
        }
    }
    const double n = static_cast<double>(draws);
    const auto expected = linalg::CMatrix::identity(2) * (se2 * linalg::trace(A));
    for (std::size_t e = 0; e < 4; ++e) {
        const auto m = mean[e] / n;
        const double se_re = std::sqrt((m2re[e].real() / n - m.real() * m.real()) / n);
        const double se_im = std::sqrt((m2im[e].real() / n - m.imag() * m.imag()) / n);
        EXPECT_LT(std::abs(m.real() - expected.data()[e].real()), 5.0 * se_re) << e;
        EXPECT_LT(std::abs(m.imag() - expected.data()[e].imag()), 5.0 * se_im) << e;
    }
}

TEST(DefaultSigmaE2, Examples) {
    EXPECT_DOUBLE_EQ(default_sigma_e2(2, 10.0), 0.05);
    EXPECT_DOUBLE_EQ(default_sigma_e2(1, 1.0), 1.0);
    EXPECT_NEAR(default_sigma_e2(4, std::pow(10.0, 1.7)), 0.0049881, 1e-7);
    EXPECT_THROW(default_sigma_e2(2, 0.0), ConfigError);
}

TEST(Rng, StreamsAreIndependentOfEachOtherAndReproducible) {
    EXPECT_NE(derive_seed(1, 0, StreamTag::channel), derive_seed(1, 0, StreamTag::estimation));
    EXPECT_NE(derive_seed(1, 0, StreamTag::channel), derive_seed(1, 1, StreamTag::channel));
    Rng a(5, 3, StreamTag::symbols), b(5, 3, StreamTag::symbols);
    for (int k = 0; k < 100; ++k) EXPECT_EQ(a.next_u64(), b.next_u64());
    Rng u(9);
    for (int k = 0; k < 100000; ++k) {
        const double x = u.uniform();
        ASSERT_GT(x, 0.0);
        ASSERT_LT(x, 1.0);
    }
}
