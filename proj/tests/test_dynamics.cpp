#include <cmath>
#include <numeric>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "levitrap/dynamics.hpp"
#include "levitrap/reproduction.hpp"

using namespace levitrap;

namespace {

const double pi = std::acos(-1.0);

/// exp(A t) for A = [[0, 1], [-Omega^2, -gamma]], evaluated on the balanced
/// form S A S^-1 with S = diag(Omega, 1) so the exponential stays accurate.
Eigen::Matrix2d drift_exp(double gamma, double omega, double t) {
    Eigen::Matrix2d b;
    b << 0.0, omega, -omega, -gamma;
    const Eigen::Matrix2d e = (b * t).exp();
    Eigen::Matrix2d out;
    out << e(0, 0), e(0, 1) / omega, e(1, 0) * omega, e(1, 1);
    return out;
}

/// Q(dt) = int_0^dt e^{As} D e^{A^T s} ds with D = diag(0, S_a / 2), by
/// composite Simpson quadrature on matrix exponentials.
Eigen::Matrix2d covariance_quadrature(double dt, double gamma, double omega, double s_a) {
    Eigen::Matrix2d d = Eigen::Matrix2d::Zero();
    d(1, 1) = 0.5 * s_a;
    const int n = 2000;
    const double h = dt / n;
    Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
    for (int k = 0; k <= n; ++k) {
        const Eigen::Matrix2d e = drift_exp(gamma, omega, k * h);
        const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        acc += w * e * d * e.transpose();
    }
    return acc * h / 3.0;
}

SimConfig thermal_config(double t_k = 300.0) {
    SimConfig cfg;
    cfg.particle = reference_particle();
    cfg.env = reference_environment(1.2e-4);
    cfg.gamma = 0.5;
    cfg.noise.push_back(ThermalNoise{t_k});
    cfg.initial = ThermalStart{t_k};
    cfg.dt = 0.013;
    cfg.duration = 10.0;
    cfg.seed = 11;
    return cfg;
}

}  // namespace

TEST(Propagator, TransitionMatchesMatrixExponential) {
    for (double dt : {1e-5, 3.7e-4, 2.1e-3}) {
        const double gamma = 0.8, omega = 2.0 * pi * 1.28e3;
        const Propagator p(dt, gamma, omega, 0.0);
        const Eigen::Matrix2d e = drift_exp(gamma, omega, dt);
        const auto& t = p.transition();
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                EXPECT_NEAR(t[2 * i + j], e(i, j), 1e-9 * (std::abs(e(i, j)) + 1.0)) << dt;
    }
}

TEST(Propagator, LongStepEqualsComposedShortSteps) {
    const double gamma = 0.8, omega = 2.0 * pi * 1.28e3, dt = 0.21;
    const Propagator big(dt, gamma, omega, 0.0);
    const Eigen::Matrix2d small = drift_exp(gamma, omega, dt / 128.0);
    Eigen::Matrix2d composed = Eigen::Matrix2d::Identity();
    for (int i = 0; i < 128; ++i) composed = small * composed;
    const auto& t = big.transition();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            EXPECT_NEAR(t[2 * i + j], composed(i, j), 1e-8 * (std::abs(composed(i, j)) + 1.0));
}

TEST(Propagator, CovarianceMatchesQuadrature) {
    const double gamma = 30.0, omega = 2.0 * pi * 50.0, s_a = 2.0;
    for (double dt : {1e-3, 0.017, 0.05}) {
        const Propagator p(dt, gamma, omega, s_a);
        const Eigen::Matrix2d q = covariance_quadrature(dt, gamma, omega, s_a);
        const auto& c = p.covariance();
        EXPECT_NEAR(c[0], q(0, 0), 1e-7 * q(0, 0)) << dt;
        EXPECT_NEAR(c[1], q(0, 1), 1e-7 * std::sqrt(q(0, 0) * q(1, 1))) << dt;
        EXPECT_NEAR(c[3], q(1, 1), 1e-7 * q(1, 1)) << dt;
    }
}

TEST(Propagator, LongStepReachesEquipartition) {
    // For dt >> 1/gamma the step covariance is the stationary one; with a
    // one-sided S_a, <v^2> = S_a / (4 gamma) and <z^2> = <v^2> / Omega^2.
    const double gamma = 5.0, omega = 2.0 * pi * 20.0, s_a = 3.0;
    const Propagator p(40.0, gamma, omega, s_a);
    EXPECT_NEAR(p.covariance()[0], s_a / (4.0 * gamma * omega * omega), 1e-9 * s_a / (gamma * omega * omega));
    EXPECT_NEAR(p.covariance()[3], s_a / (4.0 * gamma), 1e-9 * s_a / gamma);
    EXPECT_NEAR(p.covariance()[1], 0.0, 1e-12);
}

TEST(Propagator, RejectsUnsupportedRegimes) {
    EXPECT_THROW(Propagator(0.0, 1.0, 1.0, 0.0), InvalidInput);
    EXPECT_THROW(Propagator(1e-3, -1.0, 1.0, 0.0), InvalidInput);
    EXPECT_THROW(Propagator(1e-3, 3.0, 1.0, 0.0), UnsupportedRegime);
}

TEST(Dynamics, ZeroDampingConservesEnergyExactly) {
    LinearOscillator osc;
    osc.omega = 2.0 * pi * 1.28e3;
    OscState s{1e-6, 0.0, 0.0};
    for (int i = 0; i < 10000; ++i) s = exact_step(s, 1.234e-4, osc, 0.0, 0.0);
    const double e = s.v * s.v + osc.omega * osc.omega * s.z * s.z;
    EXPECT_NEAR(e / (osc.omega * osc.omega * 1e-12), 1.0, 1e-9);
}

TEST(Dynamics, DrivenSteadyStateAmplitude) {
    // Lorentzian response |z| = (F/m) / sqrt((Omega^2 - w^2)^2 + gamma^2 w^2).
    LinearOscillator osc;
    osc.gamma = 20.0;
    osc.omega = 2.0 * pi * 100.0;
    osc.mass = 1e-17;
    osc.drive = DriveConfig{1e-18, 103.0, 0.3};
    OscState s{};
    const double dt = 1.0 / 1024.0;
    for (int i = 0; i < 4096; ++i) s = exact_step(s, dt, osc, 0.0, 0.0);
    double peak = 0.0;
    for (int i = 0; i < 4096; ++i) {
        s = exact_step(s, dt, osc, 0.0, 0.0);
        peak = std::max(peak, std::abs(s.z));
    }
    const double w = 2.0 * pi * 103.0;
    const double expect = 0.1 / std::hypot(osc.omega * osc.omega - w * w, osc.gamma * w);
    EXPECT_NEAR(peak / expect, 1.0, 2e-3);
}

TEST(Dynamics, TrajectoryIsAPureFunctionOfConfig) {
    const auto cfg = thermal_config();
    const auto a = simulate_trajectory(cfg);
    const auto b = simulate_trajectory(cfg);
    EXPECT_EQ(a.position.values, b.position.values);
    auto other = cfg;
    other.seed = 12;
    EXPECT_NE(simulate_trajectory(other).position.values, a.position.values);
}

TEST(Dynamics, EnsembleIndependentOfThreadCount) {
    const auto cfg = thermal_config();
    const auto one = simulate_ensemble(cfg, 6, 1);
    const auto four = simulate_ensemble(cfg, 6, 4);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(one[i].position.values, four[i].position.values);
    EXPECT_NE(one[0].position.values, one[1].position.values);
}

TEST(Dynamics, FeedbackGainForTemperature) {
    const auto fb = FeedbackConfig::for_temperature(0.2, 300.0, 1.0);
    EXPECT_NEAR(fb.gain, 0.2 * 299.0, 1e-12);
    // Steady state with feedback: T_eff = T0 gamma / (gamma + gain).
    auto cfg = thermal_config();
    cfg.gamma = 2.0;
    cfg.feedback = FeedbackConfig::for_temperature(cfg.gamma, 300.0, 30.0);
    cfg.initial = ThermalStart{30.0};
    cfg.dt = 0.37;
    cfg.duration = 40000.0;
    const auto tr = simulate_trajectory(cfg);
    double acc = 0.0;
    for (double z : tr.position.values) acc += z * z;
    const double w = cfg.env.omega();
    const double t_eff = acc / tr.position.size() * cfg.particle.mass_kg * w * w / constants::boltzmann;
    EXPECT_NEAR(t_eff / 30.0, 1.0, 0.05);
}

TEST(Dynamics, ScheduleSwitchesChannels) {
    auto cfg = thermal_config();
    cfg.feedback = FeedbackConfig{1.0};
    cfg.schedule = {Segment{0.0, 1.0, true, std::nullopt, std::nullopt},
                    Segment{2.0, 3.0, std::nullopt, std::nullopt, true}};
    EXPECT_TRUE(flags_at(cfg, 0.5).feedback);
    EXPECT_FALSE(flags_at(cfg, 1.5).feedback);
    EXPECT_FALSE(flags_at(cfg, 0.5).illumination);
    EXPECT_TRUE(flags_at(cfg, 2.5).illumination);
    const auto tr = simulate_trajectory(cfg);
    ASSERT_FALSE(tr.position.lit.empty());
    EXPECT_EQ(tr.position.lit[0], 0);
}

TEST(Dynamics, EnergySeriesOfSinusoid) {
    TimeTrace z;
    z.dt = 1e-4;
    z.unit = SeriesUnit::Metre;
    const double w = 2.0 * pi * 1000.0, a = 2e-6, m = 1e-17;
    for (int i = 0; i < 20000; ++i) z.values.push_back(a * std::cos(w * i * z.dt));
    const auto e = energy_series(z, 0.1, m, w);
    ASSERT_EQ(e.size(), 20u);
    for (double v : e.values) EXPECT_NEAR(v / (0.5 * m * w * w * a * a), 1.0, 1e-9);
    const auto k = to_thermal_units(e, 300.0);
    EXPECT_NEAR(k.values[0], e.values[0] / (constants::boltzmann * 300.0), 1e-9 * k.values[0]);
}

TEST(Dynamics, EnsembleMeanAverages) {
    TimeTrace a, b;
    a.values = {1.0, 2.0};
    b.values = {3.0, 6.0};
    const auto m = ensemble_mean({a, b});
    EXPECT_DOUBLE_EQ(m.values[0], 2.0);
    EXPECT_DOUBLE_EQ(m.values[1], 4.0);
}

TEST(Random, CounterStreamIsReproducibleAndNormal) {
    const CounterRng rng(derive_key(5, 3));
    EXPECT_EQ(rng.bits(17), CounterRng(derive_key(5, 3)).bits(17));
    EXPECT_NE(rng.bits(17), CounterRng(derive_key(5, 4)).bits(17));
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal(i);
        s += x;
        s2 += x * x;
    }
    EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(n));
    EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(Dynamics, SingleMemberEnsembleUsesDerivedSeed) {
    auto cfg = thermal_config();
    const auto e = simulate_ensemble(cfg, 1);
    cfg.seed = member_seed(cfg.seed, 0);
    EXPECT_EQ(e[0].position.values, simulate_trajectory(cfg).position.values);
}

TEST(Dynamics, QuietStartStaysAtRest) {
    auto cfg = thermal_config();
    cfg.noise.clear();
    cfg.initial = OscState{0.0, 0.0, 0.0};
    const auto tr = simulate_trajectory(cfg);
    for (double z : tr.position.values) EXPECT_EQ(z, 0.0);
    const auto e = energy_series(tr.position, 0.13, cfg.particle.mass_kg, cfg.env.omega());
    for (double v : e.values) EXPECT_EQ(v, 0.0);
}

TEST(Dynamics, ThermalEnergySeriesMeanIsKT) {
    auto cfg = thermal_config(300.0);
    cfg.dt = 1.0 / (16.0 * cfg.env.secular_frequency_hz);
    cfg.duration = 200.0;
    cfg.gamma = 2.0;
    const auto tr = simulate_trajectory(cfg);
    const auto e = energy_series(tr.position, 1.0, cfg.particle.mass_kg, cfg.env.omega());
    double mean = 0.0, m2 = 0.0;
    for (double v : e.values) {
        mean += v;
        m2 += v * v;
    }
    const double n = static_cast<double>(e.size());
    mean /= n;
    const double sd = std::sqrt((m2 / n - mean * mean) / n);
    const double kt = constants::boltzmann * 300.0;
    EXPECT_NEAR(mean, kt, 3.0 * sd);
}
