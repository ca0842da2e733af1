#pragma once

// APD channel: u(t) = alpha z(t) plus readout noise, the ring-up calibration
// sigma(t) = a + (b - a) exp(-gamma (t - t_fb)) with T_fb = T0 b / a, and the
// drive-tone rescaling (A'_cal / A'_meas)^2.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "levitrap/error.hpp"
#include "levitrap/fit_result.hpp"
#include "levitrap/least_squares.hpp"
#include "levitrap/profile.hpp"
#include "levitrap/random.hpp"
#include "levitrap/time_trace.hpp"
#include "levitrap/units.hpp"

namespace levitrap {

struct ApdCalibration {
    double alpha = 1.0;             // V/m
    double variance_scale_a = 1.0;  // V^2, thermal plateau of the variance
    double rescale_factor = 1.0;    // (A'_cal / A'_meas)^2
};

/// Voltage trace u = alpha z with white readout noise of one-sided PSD
/// readout_psd (V^2/Hz); noise sample k is drawn from counter k of `key`.
inline TimeTrace apd_trace(const TimeTrace& z, double alpha, double readout_psd = 0.0,
                           std::uint64_t key = 0) {
    z.check();
    if (!(alpha > 0.0)) throw InvalidInput("APD gain alpha must be positive");
    if (readout_psd < 0.0) throw InvalidInput("readout noise PSD must be non-negative");
    TimeTrace u = z;
    u.unit = SeriesUnit::Volt;
    const double sigma = std::sqrt(readout_psd / (2.0 * z.dt));
    const CounterRng rng(key);
    for (std::size_t i = 0; i < u.size(); ++i) {
        u.values[i] = alpha * z.values[i];
        if (sigma > 0.0) u.values[i] += sigma * rng.normal(i);
    }
    return u;
}

/// Mean of u^2 over bins of `bin_s`, lit samples only (V^2).
inline TimeTrace variance_series(const TimeTrace& u, double bin_s) {
    u.check();
    const double per_bin = bin_s / u.dt;
    if (!(per_bin >= 1.0 - 1e-9)) throw InvalidInput("variance bin shorter than one sample");
    const auto n = static_cast<std::size_t>(std::llround(per_bin));
    const std::size_t bins = u.size() / n;
    TimeTrace out;
    out.dt = static_cast<double>(n) * u.dt;
    out.t0 = u.t0 + 0.5 * static_cast<double>(n - 1) * u.dt;
    out.unit = SeriesUnit::VoltSquared;
    out.values.assign(bins, 0.0);
    std::vector<std::uint8_t> lit(bins, 1);
    bool any_dark = false;
    for (std::size_t b = 0; b < bins; ++b) {
        double acc = 0.0;
        std::size_t used = 0;
        for (std::size_t i = b * n; i < (b + 1) * n; ++i) {
            if (!u.is_lit(i)) continue;
            acc += u.values[i] * u.values[i];
            ++used;
        }
        if (used == 0) {
            lit[b] = 0;
            any_dark = true;
        } else {
            out.values[b] = acc / static_cast<double>(used);
        }
    }
    if (any_dark) out.lit = std::move(lit);
    return out;
}

struct RingupCalibration {
    ApdCalibration calibration;
    FitResult fit;  // parameters gamma (rad/s), a (V^2), b (V^2), T_fb (K)
};

/// Fits sigma(t) = a + (b - a) exp(-gamma (t - t_fb)) to samples after t_fb,
/// with b fixed to the mean variance before t_fb. alpha is derived from
/// a = alpha^2 <z^2>_th = alpha^2 k_B T0 / (m Omega^2) when mass and omega are
/// given, otherwise left at 1.
inline RingupCalibration calibrate_ringup(const TimeTrace& variance, double t_fb, double t0_k,
                                          double mass_kg = 0.0, double omega = 0.0) {
    variance.check();
    if (!(t0_k > 0.0)) throw InvalidInput("T0 must be positive");
    std::vector<double> ts, ys;
    double b_sum = 0.0;
    std::size_t b_n = 0;
    for (std::size_t i = 0; i < variance.size(); ++i) {
        if (!variance.is_lit(i)) continue;
        const double t = variance.time(i);
        if (t < t_fb) {
            b_sum += variance.values[i];
            ++b_n;
        } else {
            ts.push_back(t - t_fb);
            ys.push_back(variance.values[i]);
        }
    }
    if (b_n == 0) throw InvalidInput("variance series has no samples before t_fb");
    if (ts.size() < 3) throw InvalidInput("variance series needs at least 3 samples after t_fb");
    const double b = b_sum / static_cast<double>(b_n);
    const std::size_t m = ts.size();

    // Plateau from the last quarter; rate from a log-linear look at the rise.
    double a0 = 0.0;
    const std::size_t tail = std::max<std::size_t>(1, m / 4);
    for (std::size_t i = m - tail; i < m; ++i) a0 += ys[i];
    a0 /= static_cast<double>(tail);
    const double span = ts.back() - ts.front();
    double g0 = 3.0 / std::max(span, 1e-12);
    {
        double st = 0, sl = 0, stt = 0, stl = 0;
        std::size_t k = 0;
        for (std::size_t i = 0; i < m / 2; ++i) {
            const double d = (a0 - ys[i]) / (a0 - b);
            if (!(d > 0.05 && d < 1.5)) continue;
            const double l = std::log(d);
            st += ts[i];
            sl += l;
            stt += ts[i] * ts[i];
            stl += ts[i] * l;
            ++k;
        }
        if (k >= 3) {
            const double kk = static_cast<double>(k);
            const double slope = (kk * stl - st * sl) / (kk * stt - st * st);
            if (slope < 0.0 && std::isfinite(slope)) g0 = -slope;
        }
    }
    const double scale = std::max(std::abs(a0), 1e-300);
    auto residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
        const double a = x[0] * scale, g = x[1] * g0;
        for (std::size_t i = 0; i < m; ++i)
            r[static_cast<Eigen::Index>(i)] =
                (a + (b - a) * std::exp(-g * ts[i]) - ys[i]) / scale;
    };
    Eigen::VectorXd x0(2);
    x0 << a0 / scale, 1.0;
    const auto sol = solve_least_squares(residual, x0, static_cast<Eigen::Index>(m));

    RingupCalibration out;
    const double a = sol.x[0] * scale, g = sol.x[1] * g0;
    const double sa = std::sqrt(std::max(0.0, sol.covariance(0, 0))) * scale;
    const double sg = std::sqrt(std::max(0.0, sol.covariance(1, 1))) * g0;
    auto& fit = out.fit;
    fit.converged = sol.converged;
    fit.message = sol.status;
    fit.covariance = sol.covariance;
    fit.covariance.row(0) *= scale;
    fit.covariance.col(0) *= scale;
    fit.covariance.row(1) *= g0;
    fit.covariance.col(1) *= g0;
    const double t_fb_k = t0_k * b / a;
    fit.add("gamma", g, sg);
    fit.add("a", a, sa);
    fit.add("b", b, 0.0);
    fit.add("T_fb", t_fb_k, t_fb_k * sa / std::abs(a));
    for (Eigen::Index i = 0; i < sol.residuals.size(); ++i)
        fit.residuals.push_back(sol.residuals[i] * scale);
    fit.mse = m > 2 ? sol.cost / static_cast<double>(m - 2) : 0.0;

    // With no rise the rate is unidentifiable.
    const double contrast = std::abs(a - b);
    if (sol.singular || contrast <= std::max(3.0 * sa, 1e-9 * std::abs(a))) {
        fit.degenerate = true;
        fit.flags.emplace_back("degenerate");
        fit.message = "no resolvable rise: gamma unidentifiable";
    }
    if (!(g > 0.0) || !std::isfinite(g)) fit.converged = false;

    out.calibration.variance_scale_a = a;
    if (mass_kg > 0.0 && omega > 0.0 && a > 0.0)
        out.calibration.alpha =
            std::sqrt(a * mass_kg * omega * omega / (constants::boltzmann * t0_k));
    return out;
}

/// Amplitude of the component at f_cal: linear least squares on
/// {cos, sin, 1} at f_cal over the lit samples.
inline double drive_tone_amplitude(const TimeTrace& u, double f_cal) {
    u.check();
    if (!(f_cal > 0.0)) throw InvalidInput("calibration frequency must be positive");
    if (f_cal >= 0.5 / u.dt) throw InvalidInput("calibration frequency above Nyquist");
    if (u.duration() * f_cal < 10.0) throw InvalidInput("trace shorter than 10 periods of f_cal");
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d aty = Eigen::Vector3d::Zero();
    const double w = 2.0 * constants::pi * f_cal;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!u.is_lit(i)) continue;
        const double t = static_cast<double>(i) * u.dt;
        const Eigen::Vector3d row(std::cos(w * t), std::sin(w * t), 1.0);
        ata += row * row.transpose();
        aty += row * u.values[i];
    }
    const Eigen::Vector3d x = ata.ldlt().solve(aty);
    return std::hypot(x[0], x[1]);
}

inline double rescale_factor(double a_cal, double a_meas) {
    if (!(a_cal > 0.0) || !(a_meas > 0.0)) throw InvalidInput("tone amplitudes must be positive");
    return (a_cal / a_meas) * (a_cal / a_meas);
}

/// Variance series in V^2 to energy in units of k_B T0:
/// E = rescale * sigma / a.
inline TimeTrace to_thermal_units(const TimeTrace& variance, const ApdCalibration& cal) {
    if (!(cal.variance_scale_a > 0.0)) throw InvalidInput("calibration plateau a must be positive");
    if (!(cal.rescale_factor > 0.0)) throw InvalidInput("rescale factor must be positive");
    TimeTrace e = variance;
    for (auto& v : e.values) v *= cal.rescale_factor / cal.variance_scale_a;
    e.unit = SeriesUnit::ThermalEnergy;
    return e;
}

}  // namespace levitrap
