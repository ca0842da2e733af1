#include <cmath>

#include <gtest/gtest.h>

#include "levitrap/analysis.hpp"
#include "levitrap/protocols.hpp"
#include "levitrap/reproduction.hpp"

using namespace levitrap;

namespace {

const double pi = std::acos(-1.0);

std::vector<double> grid(double t0, double t1, double step) {
    std::vector<double> t;
    for (double x = t0; x <= t1 + 1e-9; x += step) t.push_back(x);
    return t;
}

TimeTrace energy_trace(double dt, std::size_t n, auto&& f) {
    TimeTrace e;
    e.dt = dt;
    e.unit = SeriesUnit::ThermalEnergy;
    for (std::size_t i = 0; i < n; ++i) e.values.push_back(f(e.time(i)));
    return e;
}

}  // namespace

TEST(Ringdown, ExactDataRecoversRate) {
    const auto t = grid(0.0, 7200.0, 300.0);
    const double g = 2.0 * pi * 59e-6, a0 = 2e-4;
    std::vector<double> z2;
    for (double x : t) z2.push_back(a0 * a0 * std::exp(-g * x));
    const auto f = ringdown_fit(t, z2, 3.9e-6);
    ASSERT_TRUE(f.ok());
    EXPECT_NEAR(f.param("gamma").value / g, 1.0, 1e-10);
    EXPECT_NEAR(f.param("z0_sq").value / (a0 * a0), 1.0, 1e-10);
    EXPECT_NEAR(f.mse, 0.0, 1e-18);
}

TEST(Ringdown, WeightsFollowAmplitude) {
    // sigma_i = 2 delta_a / a_i in ln(z^2).
    const auto t = grid(0.0, 3000.0, 300.0);
    std::vector<double> z2;
    for (double x : t) z2.push_back(1e-8 * std::exp(-1e-4 * x));
    const auto f = ringdown_fit(t, z2, 1e-6);
    ASSERT_EQ(f.variances.size(), t.size());
    EXPECT_NEAR(f.variances.front(), std::pow(2e-6 / 1e-4, 2), 1e-12);
}

TEST(Ringdown, UnweightedWhenDeltaAIsZero) {
    const auto t = grid(0.0, 3000.0, 300.0);
    std::vector<double> z2;
    for (double x : t) z2.push_back(1e-8 * std::exp(-1e-4 * x));
    const auto f = ringdown_fit(t, z2, 0.0);
    EXPECT_NEAR(f.param("gamma").value, 1e-4, 1e-12);
}

TEST(Ringdown, RejectsBadInput) {
    EXPECT_THROW(ringdown_fit({0.0, 1.0}, {1.0}, 0.0), InvalidInput);
    EXPECT_THROW(ringdown_fit({0.0, 1.0, 2.0}, {1.0, -1.0, 1.0}, 0.0), InvalidInput);
}

TEST(Ringdown, DegenerateTimesAreReported) {
    const auto f = ringdown_fit({5.0, 5.0, 5.0}, {1.0, 1.0, 1.0}, 0.0);
    EXPECT_FALSE(f.ok());
}

TEST(Mse, CleanDataNearOneAndExcessFlagged) {
    const auto t = grid(0.0, 7200.0, 300.0);
    const double g = 2.0 * pi * 59e-6;
    double clean = 0.0, excess = 0.0;
    const int seeds = 40;
    for (int s = 0; s < seeds; ++s) {
        const auto zc = protocols::synthetic_ringdown(t, g, 2e-4, 3.9e-6, 100 + s);
        const auto fc = ringdown_fit(t, zc, 3.9e-6);
        clean += fc.mse / fc.mean_variance;
        const auto ze = protocols::synthetic_ringdown(t, g, 2e-4, 3.9e-6, 100 + s, 0.5, 8.0);
        const auto fe = ringdown_fit(t, ze, 3.9e-6);
        excess += fe.mse / fe.mean_variance;
        EXPECT_TRUE(fe.flagged("model_misfit"));
    }
    EXPECT_NEAR(clean / seeds, 1.0, 0.25);
    EXPECT_GT(excess / seeds, 10.0);
}

TEST(Mse, ResidualMseDividesByDegreesOfFreedom) {
    FitResult f;
    f.residuals = {1.0, -1.0, 1.0, -1.0};
    f.variances = {0.5, 1.5, 0.5, 1.5};
    const auto m = residual_mse(f, 2);
    EXPECT_DOUBLE_EQ(m.mse, 2.0);
    EXPECT_DOUBLE_EQ(m.mean_variance, 1.0);
    EXPECT_THROW(residual_mse(f, 4), InvalidInput);
}

TEST(Ringup, ExactCurveRecoversRate) {
    const double g = 0.23, tfb = 1.0, t0 = 300.0;
    const auto e = energy_trace(0.1, 110, [&](double t) {
        return t < 0.5 ? tfb / t0 : 1.0 + (tfb / t0 - 1.0) * std::exp(-g * (t - 0.5));
    });
    const auto f = ringup_fit(e, tfb, t0, 0.5);
    ASSERT_TRUE(f.ok());
    EXPECT_NEAR(f.param("gamma").value, g, 1e-8);
}

TEST(Ringup, RejectsBadTemperatures) {
    const auto e = energy_trace(0.1, 10, [](double) { return 1.0; });
    EXPECT_THROW(ringup_fit(e, 400.0, 300.0), InvalidInput);
    auto v = e;
    v.unit = SeriesUnit::VoltSquared;
    EXPECT_THROW(ringup_fit(v, 1.0, 300.0), InvalidInput);
}

TEST(Heating, SlopeConvertsToPhonons) {
    Environment env;
    const double slope = 6.7e-6, b = 0.8 / 300.0;
    const auto e = energy_trace(1.0, 205, [&](double t) { return t < 5.0 ? b : b + slope * (t - 5.0); });
    const double to_ph = constants::boltzmann * 300.0 / (constants::hbar * env.omega());
    const auto fixed = heating_fit(e, env, 0.8, 5.0);
    EXPECT_NEAR(fixed.param("slope").value, slope, 1e-15);
    EXPECT_NEAR(fixed.param("Gamma").value, slope * to_ph, 1e-6 * slope * to_ph);
    const auto free = heating_fit(e, env, std::nullopt, 5.0);
    EXPECT_NEAR(free.param("intercept").value, b, 1e-12);
    EXPECT_NEAR(free.param("Gamma").value, slope * to_ph, 1e-6 * slope * to_ph);
}

TEST(Heating, EnsembleSigmaIsStandardErrorOfMemberSlopes) {
    Environment env;
    std::vector<TimeTrace> members;
    const std::vector<double> slopes{1e-6, 2e-6, 3e-6, 6e-6};
    for (double s : slopes) members.push_back(energy_trace(1.0, 50, [&](double t) { return 0.01 + s * t; }));
    const auto mean = ensemble_mean(members);
    const auto f = ensemble_heating_fit(mean, members, env, 3.0, 0.0);
    EXPECT_NEAR(f.param("slope").value, 3e-6, 1e-15);
    // sample std of {1, 2, 3, 6} is sqrt(14/3); standard error divides by 2.
    EXPECT_NEAR(f.param("slope").sigma, std::sqrt(14.0 / 3.0) / 2.0 * 1e-6, 1e-15);
}

TEST(Tls, MatchesBruteForceMinimum) {
    const auto [g, p] = reference_pressure_points();
    const auto f = tls_pressure_fit(g, p);
    // Brute force over ln a of sum d_i^2 / (sx_i^2 + sy_i^2), d = y - x - c.
    double best = 0.0, best_cost = 1e300;
    for (double c = 5.0; c < 8.0; c += 1e-6) {
        double cost = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double d = std::log(g[i].value / (2.0 * pi)) - std::log(p[i].value) - c;
            cost += d * d / (std::pow(p[i].relative(), 2) + std::pow(g[i].relative(), 2));
        }
        if (cost < best_cost) {
            best_cost = cost;
            best = c;
        }
    }
    EXPECT_NEAR(f.param("ln_a").value, best, 2e-6);
    EXPECT_NEAR(f.param("a").value, 900.0, 200.0);
}

TEST(Tls, ExactLineAndValidation) {
    std::vector<Measured> g, p;
    for (double pm : {1e-10, 1e-9, 1e-8}) {
        p.push_back({pm, 0.1 * pm});
        g.push_back({2.0 * pi * 500.0 * pm, 0.05 * 2.0 * pi * 500.0 * pm});
    }
    EXPECT_NEAR(tls_pressure_fit(g, p).param("a").value, 500.0, 1e-9);
    g[0].value = -1.0;
    EXPECT_THROW(tls_pressure_fit(g, p), InvalidInput);
    EXPECT_THROW(tls_pressure_fit({g[1]}, {p[1]}), InvalidInput);
}

TEST(Tls, LogSpacePerturbationIsAntisymmetric) {
    const auto [g, p] = reference_pressure_points();
    const double base = tls_pressure_fit(g, p).param("ln_a").value;
    const double k = std::exp(0.3);
    auto up = g, down = g;
    up[2] = {g[2].value * k, g[2].sigma * k};
    down[2] = {g[2].value / k, g[2].sigma / k};
    const double du = tls_pressure_fit(up, p).param("ln_a").value - base;
    const double dd = tls_pressure_fit(down, p).param("ln_a").value - base;
    EXPECT_GT(du, 0.0);
    EXPECT_NEAR(du + dd, 0.0, 1e-10);
}
