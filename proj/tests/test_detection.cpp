#include <cmath>

#include <gtest/gtest.h>

#include "levitrap/detection.hpp"
#include "levitrap/dynamics.hpp"
#include "levitrap/protocols.hpp"
#include "levitrap/reproduction.hpp"

using namespace levitrap;

namespace {

const double pi = std::acos(-1.0);

TimeTrace sine(double f, double amp, double dt, std::size_t n) {
    TimeTrace z;
    z.dt = dt;
    z.unit = SeriesUnit::Metre;
    for (std::size_t i = 0; i < n; ++i) z.values.push_back(amp * std::cos(2.0 * pi * f * i * dt + 0.4));
    return z;
}

}  // namespace

TEST(Apd, LinearGainAndReadoutNoiseVariance) {
    const auto z = sine(1280.0, 1e-7, 1e-4, 200000);
    const auto clean = apd_trace(z, 2e5);
    EXPECT_EQ(clean.unit, SeriesUnit::Volt);
    EXPECT_DOUBLE_EQ(clean.values[10], 2e5 * z.values[10]);
    // One-sided white PSD S: per-sample variance S / (2 dt).
    TimeTrace zero = z;
    std::fill(zero.values.begin(), zero.values.end(), 0.0);
    const double s = 1e-10;
    const auto noisy = apd_trace(zero, 1.0, s, 9);
    double acc = 0.0;
    for (double v : noisy.values) acc += v * v;
    const double n = static_cast<double>(noisy.size());
    EXPECT_NEAR(acc / n / (s / (2.0 * z.dt)), 1.0, 4.0 * std::sqrt(2.0 / n));
    EXPECT_THROW(apd_trace(z, 0.0), InvalidInput);
}

TEST(Apd, VarianceSeriesOfSinusoid) {
    const auto u = sine(1280.0, 2.0, 1e-4, 10000);
    const auto v = variance_series(u, 0.1);
    ASSERT_EQ(v.size(), 10u);
    EXPECT_EQ(v.unit, SeriesUnit::VoltSquared);
    for (double x : v.values) EXPECT_NEAR(x, 2.0, 1e-3);
}

TEST(Apd, VarianceSeriesSkipsDarkSamples) {
    auto u = sine(1280.0, 1.0, 1e-3, 200);
    u.lit.assign(200, 1);
    for (std::size_t i = 100; i < 200; ++i) u.lit[i] = 0;
    const auto v = variance_series(u, 0.1);
    ASSERT_EQ(v.size(), 2u);
    EXPECT_FALSE(v.is_lit(1));
    EXPECT_TRUE(v.is_lit(0));
}

TEST(Calibration, ExactRingupCurve) {
    // sigma(t) = a + (b - a) exp(-gamma (t - t_fb)) with a = alpha^2 k_B T0 / (m Omega^2).
    const double alpha = 1e6, m = 4.3e-17, w = 2.0 * pi * 1280.0, t0 = 300.0;
    const double a = alpha * alpha * constants::boltzmann * t0 / (m * w * w);
    const double b = a / 300.0, g = 0.25;
    TimeTrace v;
    v.dt = 0.1;
    v.unit = SeriesUnit::VoltSquared;
    for (int i = 0; i < 600; ++i) {
        const double t = v.time(i);
        v.values.push_back(t < 0.5 ? b : a + (b - a) * std::exp(-g * (t - 0.5)));
    }
    const auto c = calibrate_ringup(v, 0.5, t0, m, w);
    ASSERT_TRUE(c.fit.ok());
    EXPECT_NEAR(c.fit.param("gamma").value, g, 1e-6);
    EXPECT_NEAR(c.calibration.variance_scale_a / a, 1.0, 1e-8);
    EXPECT_NEAR(c.calibration.alpha / alpha, 1.0, 1e-8);
    EXPECT_NEAR(c.fit.param("T_fb").value, 1.0, 1e-6);
    const auto e = to_thermal_units(v, c.calibration);
    EXPECT_NEAR(e.values.back(), v.values.back() / a, 1e-9);
}

TEST(Calibration, DriveToneAndRescale) {
    auto u = sine(1300.0, 0.37, 1e-4, 50000);
    const auto noise = apd_trace(sine(1280.0, 0.0, 1e-4, 50000), 1.0, 1e-8, 3);
    for (std::size_t i = 0; i < u.size(); ++i) u.values[i] += noise.values[i];
    EXPECT_NEAR(drive_tone_amplitude(u, 1300.0), 0.37, 1e-3);
    EXPECT_NEAR(rescale_factor(5.49 * std::sqrt(30.1), 5.49), 30.1, 1e-9);
    EXPECT_THROW(drive_tone_amplitude(u, 6000.0), InvalidInput);
    EXPECT_THROW(rescale_factor(0.0, 1.0), InvalidInput);
}

TEST(Calibration, ProtocolRecoversGain) {
    const auto p = reference_ringup(3);
    const auto out = protocols::run_ringup(p);
    EXPECT_NEAR(out.calibration.calibration.alpha / p.alpha_v_per_m, 1.0, 0.1);
}

TEST(Calibration, FlatSeriesIsDegenerate) {
    TimeTrace v;
    v.dt = 0.1;
    v.unit = SeriesUnit::VoltSquared;
    v.values.assign(100, 2.5);
    const auto c = calibrate_ringup(v, 0.5, 300.0);
    EXPECT_TRUE(c.fit.degenerate);
    EXPECT_TRUE(c.fit.flagged("degenerate"));
    EXPECT_NEAR(c.fit.param("T_fb").value, 300.0, 1e-9);
}

TEST(Calibration, SecondParticleRingupAgreesWithRingdown) {
    // Heavier particle at 3.1e-4 mbar, 400 ring-ups from 0.1 K.
    auto up = reference_ringup(1);
    up.particle.mass_kg = 1.5e-16;
    up.particle.charge_e = 115;
    up.env.set_pressure_mbar(3.1e-4);
    up.gamma = reference::get("gamma_ringup_hv").value;
    up.t_fb_k = reference::get("T_fb_ringup_hv").value;
    const auto r = protocols::run_ringup(up);
    const auto g_up = r.fit.get("gamma");
    const double published_sigma = reference::get("gamma_ringup_hv").sigma;
    EXPECT_NEAR(g_up.value, up.gamma, 3.0 * g_up.sigma);
    EXPECT_LT(g_up.sigma, 3.0 * published_sigma);
    EXPECT_GT(g_up.sigma, published_sigma / 3.0);

    // Camera ring-down of the same particle from 200 um, short exposures.
    protocols::RingdownProtocol down;
    down.particle = up.particle;
    down.env = up.env;
    down.gamma = up.gamma;
    down.cadence_s = 0.1;
    down.span_s = 2.0;
    down.exposure_s = 0.02;
    down.delta_a_m = 1e-6;
    down.seed = 1;
    const auto d = protocols::run_ringdown(down);
    ASSERT_TRUE(d.fit.ok());
    EXPECT_NEAR(d.fit.param("gamma").value / g_up.value, 1.0, 0.2);
}

TEST(Apd, ThermalVarianceScalesWithGainSquared) {
    SimConfig cfg;
    cfg.particle = reference_particle();
    cfg.env = reference_environment(1.2e-4);
    cfg.gamma = 5.0;
    cfg.noise.push_back(ThermalNoise{300.0});
    cfg.initial = ThermalStart{300.0};
    cfg.dt = 1.0 / (16.0 * cfg.env.secular_frequency_hz);
    cfg.duration = 100.0;
    const auto z = simulate_trajectory(cfg).position;
    const double alpha = 2.5e5;
    const auto u = apd_trace(z, alpha);
    double zz = 0.0, uu = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        zz += z.values[i] * z.values[i];
        uu += u.values[i] * u.values[i];
    }
    EXPECT_NEAR(uu / (alpha * alpha * zz), 1.0, 1e-12);
    const double w = cfg.env.omega();
    const double expect = constants::boltzmann * 300.0 / (cfg.particle.mass_kg * w * w);
    // The record spans about 250 damping times.
    EXPECT_NEAR(zz / static_cast<double>(z.size()) / expect, 1.0, 0.3);
}
