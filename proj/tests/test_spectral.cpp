#include <cmath>

#include <gtest/gtest.h>

#include "levitrap/dynamics.hpp"
#include "levitrap/protocols.hpp"
#include "levitrap/reproduction.hpp"
#include "levitrap/spectral.hpp"

using namespace levitrap;

namespace {

const double pi = std::acos(-1.0);

/// Direct two-sample variance from its definition, for cross-checking.
double allan_reference(const std::vector<double>& f, std::size_t m, double nominal) {
    const std::size_t blocks = f.size() / m;
    std::vector<double> y(blocks, 0.0);
    for (std::size_t k = 0; k < blocks; ++k) {
        for (std::size_t i = 0; i < m; ++i) y[k] += f[k * m + i] / nominal;
        y[k] /= static_cast<double>(m);
    }
    double s = 0.0;
    for (std::size_t k = 1; k < blocks; ++k) s += (y[k] - y[k - 1]) * (y[k] - y[k - 1]);
    return std::sqrt(0.5 * s / static_cast<double>(blocks - 1));
}

}  // namespace

TEST(Allan, MatchesDefinition) {
    const CounterRng rng(4);
    std::vector<double> f(997);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = 1000.0 + 0.01 * rng.normal(i) + 1e-5 * i;
    const auto pts = allan_deviation(f, 0.5, {0.5, 2.0, 10.0}, 1000.0);
    for (const auto& p : pts) {
        ASSERT_TRUE(p.valid);
        const auto m = static_cast<std::size_t>(std::llround(p.tau / 0.5));
        EXPECT_NEAR(p.sigma, allan_reference(f, m, 1000.0), 1e-15);
        EXPECT_EQ(p.intervals, f.size() / m);
    }
}

TEST(Allan, ConstantFrequencyIsExactlyZero) {
    const std::vector<double> f(500, 1280.0);
    for (const auto& p : allan_deviation(f, 1.0, log_taus(1.0, 100.0, 5), 1280.0)) {
        EXPECT_TRUE(p.valid);
        EXPECT_EQ(p.sigma, 0.0);
    }
}

TEST(Allan, WhiteNoiseLevelAndSlope) {
    // White FM: sigma(tau) = (s / f0) sqrt(dt / tau).
    const CounterRng rng(5);
    const double s = 2e-3, f0 = 1280.0;
    std::vector<double> f(20000);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = f0 + s * rng.normal(i);
    const auto pts = allan_deviation(f, 1.0, {1.0, 10.0}, f0);
    EXPECT_NEAR(pts[0].sigma / (s / f0), 1.0, 0.03);
    EXPECT_NEAR(pts[1].sigma / (s / f0 * std::sqrt(0.1)), 1.0, 0.1);
}

TEST(Allan, RandomWalkPlusWhiteHasMinimum) {
    // sigma^2 = (h^2 / f0^2) dt / tau + k^2 tau / (3 dt) has its minimum where
    // tau = dt sqrt(3) h / (f0 k).
    const CounterRng rng(6);
    // Levels chosen for a minimum of 2e-6 at 20 s.
    const double f0 = 1.0, dt = 1.0;
    const double h = std::sqrt(4e-12 * 20.0 / 2.0), k = std::sqrt(3.0) * h / 20.0;
    std::vector<double> f(200000);
    double walk = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const auto [a, b] = rng.normal_pair(i);
        walk += k * b;
        f[i] = f0 * (1.0 + walk) + h * a;
    }
    const auto pts = allan_deviation(f, dt, log_taus(1.0, 1000.0, 10), f0);
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (pts[i].valid && pts[i].sigma < pts[best].sigma) best = i;
    const double tau_min = dt * std::sqrt(3.0) * h / (f0 * k);
    EXPECT_NEAR(tau_min, 20.0, 1e-9);
    EXPECT_NEAR(std::log10(pts[best].tau / tau_min), 0.0, 0.3);
    EXPECT_NEAR(pts[best].sigma / 2e-6, 1.0, 0.2);
}

TEST(Allan, GapsAndShortRecords) {
    std::vector<double> f(100, 10.0);
    std::vector<std::uint8_t> valid(100, 1);
    for (int i = 20; i < 30; ++i) valid[i] = 0;
    const auto pts = allan_deviation(f, 1.0, {10.0, 80.0}, 10.0, 0.0, valid);
    EXPECT_TRUE(pts[0].valid);
    EXPECT_FALSE(pts[1].valid);
    EXPECT_EQ(pts[1].flag, "fewer than two intervals");
    EXPECT_THROW(allan_deviation(f, 1.0, {1.0}, 0.0), InvalidInput);
}

TEST(Allan, TotalTimeLimitsIntervals) {
    const std::vector<double> f(1000, 1.0);
    const auto pts = allan_deviation(f, 1.0, {10.0}, 1.0, 500.0);
    EXPECT_EQ(pts[0].intervals, 50u);
}

TEST(Pll, ConstantToneAndChirp) {
    const auto tone = protocols::chirp_trace(1280.3, 0.0, 60.0, 6007.0, 1.0);
    const auto s = pll_extract(tone, 1280.0, 5.0);
    ASSERT_GT(s.size(), 100u);
    for (double f : s.frequencies) EXPECT_NEAR(f, 1280.3, 1e-4);
    const auto chirp = protocols::chirp_trace(1280.0, 1e-3, 200.0, 6007.0, 1.0);
    const auto d = drift_fit(pll_extract(chirp, 1280.0, 5.0));
    EXPECT_NEAR(d.value, 1e-3, 1e-5);
}

TEST(Pll, DarkWindowsBecomeGaps) {
    auto tr = protocols::chirp_trace(1280.0, 0.0, 60.0, 6007.0, 1.0);
    tr.lit.assign(tr.size(), 1);
    for (std::size_t i = 30 * 6007; i < 35 * 6007; ++i) tr.lit[i] = 0;
    const auto s = pll_extract(tr, 1280.0, 5.0);
    EXPECT_GT(s.gap_count(), 0u);
    EXPECT_THROW(pll_extract(tr, 1280.0, 500.0), InvalidInput);
    EXPECT_THROW(pll_extract(tr, 2000.0, 5.0), InvalidInput);
}

TEST(Psd, WhiteNoiseLevelAndParseval) {
    TimeTrace x;
    x.dt = 1e-3;
    const CounterRng rng(8);
    const double s_one_sided = 2e-4;
    const double sigma = std::sqrt(s_one_sided / (2.0 * x.dt));
    for (int i = 0; i < 1 << 18; ++i) x.values.push_back(sigma * rng.normal(i));
    const auto p = psd(x, 4096);
    double mean = 0.0;
    for (std::size_t k = 1; k + 1 < p.density.size(); ++k) mean += p.density[k];
    mean /= static_cast<double>(p.density.size() - 2);
    EXPECT_NEAR(mean / s_one_sided, 1.0, 0.02);
    EXPECT_NEAR(band_power(p, 0.0, 500.0) / (sigma * sigma), 1.0, 0.02);
}

TEST(Psd, ThermalPeakArea) {
    // The area under the displacement peak is k_B T / (m Omega^2).
    SimConfig cfg;
    cfg.particle = reference_particle();
    cfg.env = reference_environment(1e-3);
    cfg.env.secular_frequency_hz = 100.0;
    cfg.gamma = 5.0;
    cfg.noise.push_back(ThermalNoise{300.0});
    cfg.initial = ThermalStart{300.0};
    cfg.dt = 1e-3;
    cfg.duration = 2000.0;
    cfg.seed = 2;
    const auto tr = simulate_trajectory(cfg);
    const auto p = psd(tr.position, 8192);
    const double w = cfg.env.omega();
    const double expect = constants::boltzmann * 300.0 / (cfg.particle.mass_kg * w * w);
    EXPECT_NEAR(band_power(p, 0.0, 500.0) / expect, 1.0, 0.05);
}

TEST(Allan, AlternatingBlocks) {
    const double f1 = 1280.0, f2 = 1280.002, f0 = 1280.0;
    std::vector<double> f;
    for (int k = 0; k < 40; ++k)
        for (int i = 0; i < 5; ++i) f.push_back(k % 2 ? f2 : f1);
    const auto pts = allan_deviation(f, 2.0, {10.0}, f0);
    EXPECT_NEAR(pts[0].sigma, std::abs(f2 - f1) / (std::sqrt(2.0) * f0), 1e-15);
}

TEST(Pll, SlowDriftRecovered) {
    const double rate = 8e-8;
    const auto chirp = protocols::chirp_trace(1280.0, rate, 600.0, 6007.0, 1.0);
    const auto d = drift_fit(pll_extract(chirp, 1280.0, 5.0));
    EXPECT_NEAR(d.value / rate, 1.0, 0.2);
}

TEST(Pll, NoiseMatchesPhaseNoisePrediction) {
    // Additive white noise S_n on a tone of amplitude A gives one-sided phase
    // noise 2 S_n / A^2. Each output sample is a phase difference over one
    // block T, filtered by four single-pole stages, so
    // var f = int (2 S_n / A^2) |H|^2 4 sin^2(pi nu T) / (2 pi T)^2 dnu.
    const double fs = 6007.0, fz = 1280.0, fc = 5.0, amp = 1.0;
    const double s_n = amp * amp / 2.0 / (1000.0 * fc);  // 30 dB in the filter band
    const auto block = std::llround(fs / (2.0 * fc));
    const double t_block = static_cast<double>(block) / fs;
    double predicted = 0.0;
    const double dnu = 1e-3;
    for (double nu = 0.5 * dnu; nu < 200.0; nu += dnu) {
        const double h2 = std::pow(1.0 + (nu / fc) * (nu / fc), -4.0);
        const double s = std::sin(pi * nu * t_block);
        predicted += 2.0 * s_n / (amp * amp) * h2 * 4.0 * s * s * dnu;
    }
    predicted /= std::pow(2.0 * pi * t_block, 2);
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto tr = protocols::chirp_trace(fz, 0.0, 5.0, fs, amp, s_n, seed);
        for (double f : pll_extract(tr, fz, fc).frequencies) {
            sum += f - fz;
            sum2 += (f - fz) * (f - fz);
            ++n;
        }
    }
    const double var = sum2 / n - std::pow(sum / n, 2);
    EXPECT_GT(var / predicted, 0.5);
    EXPECT_LT(var / predicted, 2.0);
    EXPECT_NEAR(var / predicted, 1.0, 0.15);
}

TEST(Psd, InjectedDisplacementNoiseLevel) {
    const double s_zz = 9.5e-26, fs = 6007.0, fz = 1280.0;
    const auto tr = protocols::chirp_trace(fz, 0.0, 100.0, fs, 0.0, s_zz, 9);
    const auto p = psd(tr, 8192);
    double level = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < p.frequencies.size(); ++k)
        if (p.frequencies[k] > fz - 60.0 && p.frequencies[k] < fz - 20.0) {
            level += p.density[k];
            ++n;
        }
    EXPECT_NEAR(level / n / s_zz, 1.0, 0.1);
}

TEST(Psd, ToneIntegratesToHalfSquaredAmplitude) {
    const auto tr = protocols::chirp_trace(1280.0, 0.0, 50.0, 6007.0, 0.3);
    const auto p = psd(tr, 8192);
    EXPECT_NEAR(band_power(p, 1270.0, 1290.0) / (0.3 * 0.3 / 2.0), 1.0, 0.02);
}
