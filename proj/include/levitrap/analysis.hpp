#pragma once

// Damping and heating estimators:
//   ring-down  <z(t)^2> = <z(0)^2> exp(-gamma t)          (log-linear, weighted)
//   ring-up    <E(t)>   = k_B T0 + k_B (T_fb - T0) exp(-gamma t)
//   heating    <E(t)>  ~= k_B T_fb + k_B T0 gamma t      (linear in t)
//   gamma / 2pi = a P                                     (unit-slope TLS in log space)

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "levitrap/error.hpp"
#include "levitrap/fit_result.hpp"
#include "levitrap/least_squares.hpp"
#include "levitrap/physics.hpp"
#include "levitrap/time_trace.hpp"
#include "levitrap/units.hpp"

namespace levitrap {

/// MSE / <sigma^2> above which a fit is flagged as a model misfit.
inline constexpr double misfit_ratio_threshold = 3.0;

struct MseSummary {
    double mse = 0.0;
    double mean_variance = 0.0;
};

/// MSE = sum eps_i^2 / (n - p) over the stored residuals, and the mean of the
/// stored per-point variances.
inline MseSummary residual_mse(const FitResult& fit, std::size_t n_params) {
    const std::size_t n = fit.residuals.size();
    if (n <= n_params) throw InvalidInput("MSE needs more observations than parameters");
    double ss = 0.0;
    for (double e : fit.residuals) ss += e * e;
    MseSummary out;
    out.mse = ss / static_cast<double>(n - n_params);
    if (!fit.variances.empty()) {
        double sv = 0.0;
        for (double v : fit.variances) sv += v;
        out.mean_variance = sv / static_cast<double>(fit.variances.size());
    }
    return out;
}

/// Weighted straight-line fit y = c0 + c1 x with optional absolute sigmas.
/// When `scale_by_residuals` is set the covariance is multiplied by the
/// reduced chi-square.
struct LineFit {
    double intercept = 0.0, slope = 0.0;
    double var_intercept = 0.0, var_slope = 0.0, cov = 0.0;
    double chi2 = 0.0;
};

inline LineFit weighted_line_fit(const std::vector<double>& x, const std::vector<double>& y,
                                 const std::vector<double>& w, bool scale_by_residuals) {
    const std::size_t n = x.size();
    if (y.size() != n || w.size() != n) throw InvalidInput("line fit: length mismatch");
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double xm = sx / sw, ym = sy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - xm;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * (y[i] - ym);
    }
    if (!(sxx > 0.0)) throw InvalidInput("line fit needs at least two distinct abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = ym - f.slope * xm;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        f.chi2 += w[i] * r * r;
    }
    const double s2 = scale_by_residuals && n > 2 ? f.chi2 / static_cast<double>(n - 2) : 1.0;
    f.var_slope = s2 / sxx;
    f.var_intercept = s2 * (1.0 / sw + xm * xm / sxx);
    f.cov = -s2 * xm / sxx;
    return f;
}

/// Ring-down fit on ln(z^2) versus t with sigma_i = 2 delta_a / a_i. A zero
/// delta_a gives unit weights. Residuals are normalised: z_i^2 / fit - 1.
/// Parameters: gamma (rad/s) and z0_sq (m^2).
inline FitResult ringdown_fit(const std::vector<double>& times,
                              const std::vector<double>& squared_amplitudes, double delta_a) {
    const std::size_t n = times.size();
    if (squared_amplitudes.size() != n) throw InvalidInput("ring-down: length mismatch");
    if (n < 3) throw InvalidInput("ring-down fit needs at least 3 points");
    if (delta_a < 0.0) throw InvalidInput("amplitude uncertainty must be non-negative");
    std::vector<double> y(n), w(n), var(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z2 = squared_amplitudes[i];
        if (!(z2 > 0.0) || !std::isfinite(z2)) throw InvalidInput("ring-down: squared amplitudes must be positive");
        y[i] = std::log(z2);
        const double s = 2.0 * delta_a / std::sqrt(z2);
        var[i] = s * s;
        w[i] = delta_a > 0.0 ? 1.0 / var[i] : 1.0;
    }
    FitResult fit;
    if (std::all_of(times.begin(), times.end(), [&](double t) { return t == times.front(); })) {
        fit.converged = false;
        fit.degenerate = true;
        fit.message = "all samples share one time; the decay rate is unidentifiable";
        return fit;
    }
    const LineFit lf = weighted_line_fit(times, y, w, true);
    const double z0sq = std::exp(lf.intercept);
    fit.add("gamma", -lf.slope, std::sqrt(lf.var_slope));
    fit.add("z0_sq", z0sq, z0sq * std::sqrt(lf.var_intercept));
    fit.covariance.resize(2, 2);
    fit.covariance << lf.var_slope, -lf.cov * z0sq, -lf.cov * z0sq, lf.var_intercept * z0sq * z0sq;
    for (std::size_t i = 0; i < n; ++i)
        fit.residuals.push_back(squared_amplitudes[i] / std::exp(lf.intercept + lf.slope * times[i]) - 1.0);
    if (delta_a > 0.0) fit.variances = var;
    const auto s = residual_mse(fit, 2);
    fit.mse = s.mse;
    fit.mean_variance = s.mean_variance;
    if (fit.mean_variance > 0.0 && fit.mse > misfit_ratio_threshold * fit.mean_variance)
        fit.flags.emplace_back("model_misfit");
    return fit;
}

namespace detail {

struct SeriesPoints {
    std::vector<double> t, y;
};

inline SeriesPoints lit_points_after(const TimeTrace& e, double t_origin) {
    SeriesPoints p;
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (!e.is_lit(i)) continue;
        const double t = e.time(i);
        if (t < t_origin) continue;
        p.t.push_back(t - t_origin);
        p.y.push_back(e.values[i]);
    }
    return p;
}

}  // namespace detail

/// One-parameter fit of E(t)/k_B T0 = 1 + (T_fb/T0 - 1) exp(-gamma (t - t_origin))
/// to the lit samples at t >= t_origin.
inline FitResult ringup_fit(const TimeTrace& mean_energy, double t_fb_k, double t0_k,
                            double t_origin = 0.0) {
    mean_energy.check();
    if (mean_energy.unit != SeriesUnit::ThermalEnergy && mean_energy.unit != SeriesUnit::Dimensionless)
        throw InvalidInput("ring-up fit expects energies in units of k_B T0");
    if (!(t0_k > 0.0) || !(t_fb_k >= 0.0) || !(t_fb_k < t0_k))
        throw InvalidInput("ring-up fit requires 0 <= T_fb < T0");
    const auto pts = detail::lit_points_after(mean_energy, t_origin);
    const std::size_t m = pts.t.size();
    if (m < 3) throw InvalidInput("ring-up fit needs at least 3 samples");
    const double depth = t_fb_k / t0_k - 1.0;
    auto cost_at = [&](double g) {
        double c = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double r = 1.0 + depth * std::exp(-g * pts.t[i]) - pts.y[i];
            c += r * r;
        }
        return c;
    };
    // Log-spaced scan for a robust starting point.
    const double span = std::max(pts.t.back(), 1e-12);
    double g0 = 1.0 / span, best = cost_at(g0);
    for (int k = 0; k <= 120; ++k) {
        const double g = std::pow(10.0, -3.0 + 6.0 * k / 120.0) / span;
        const double c = cost_at(g);
        if (c < best) {
            best = c;
            g0 = g;
        }
    }
    auto residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
        const double g = x[0] * g0;
        for (std::size_t i = 0; i < m; ++i)
            r[static_cast<Eigen::Index>(i)] = 1.0 + depth * std::exp(-g * pts.t[i]) - pts.y[i];
    };
    Eigen::VectorXd x0(1);
    x0 << 1.0;
    const auto sol = solve_least_squares(residual, x0, static_cast<Eigen::Index>(m));
    FitResult fit;
    const double g = sol.x[0] * g0;
    fit.converged = sol.converged && g > 0.0 && std::isfinite(g);
    fit.message = sol.status;
    fit.covariance = sol.covariance * (g0 * g0);
    fit.add("gamma", g, std::sqrt(std::max(0.0, fit.covariance(0, 0))));
    fit.residuals.assign(sol.residuals.data(), sol.residuals.data() + sol.residuals.size());
    fit.mse = m > 1 ? sol.cost / static_cast<double>(m - 1) : 0.0;
    if (sol.singular) fit.degenerate = true;
    return fit;
}

/// Linear fit of E(t)/k_B T0 against t - t_origin on the lit samples. With
/// t_fb_k set, the intercept is fixed to T_fb/T0. The slope s (k_B T0 per
/// second) converts to Gamma = s k_B T0 / (hbar Omega).
/// Parameters: Gamma (1/s), slope (1/s), intercept.
inline FitResult heating_fit(const TimeTrace& mean_energy, const Environment& env,
                             std::optional<double> t_fb_k = std::nullopt, double t_origin = 0.0) {
    mean_energy.check();
    env.validate();
    if (mean_energy.unit != SeriesUnit::ThermalEnergy && mean_energy.unit != SeriesUnit::Dimensionless)
        throw InvalidInput("heating fit expects energies in units of k_B T0");
    const auto pts = detail::lit_points_after(mean_energy, t_origin);
    const std::size_t m = pts.t.size();
    if (m < 3) throw InvalidInput("heating fit needs at least 3 samples");
    const double t0 = env.gas_temperature_k;
    double slope = 0.0, intercept = 0.0, var_slope = 0.0, var_intercept = 0.0;
    FitResult fit;
    if (t_fb_k) {
        if (!(*t_fb_k >= 0.0)) throw InvalidInput("T_fb must be non-negative");
        intercept = *t_fb_k / t0;
        double stt = 0.0, sty = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            stt += pts.t[i] * pts.t[i];
            sty += pts.t[i] * (pts.y[i] - intercept);
        }
        if (!(stt > 0.0)) throw InvalidInput("heating fit needs samples after the origin");
        slope = sty / stt;
        double ss = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double r = pts.y[i] - intercept - slope * pts.t[i];
            fit.residuals.push_back(r);
            ss += r * r;
        }
        var_slope = ss / static_cast<double>(m - 1) / stt;
        fit.mse = ss / static_cast<double>(m - 1);
    } else {
        const std::vector<double> w(m, 1.0);
        const LineFit lf = weighted_line_fit(pts.t, pts.y, w, true);
        slope = lf.slope;
        intercept = lf.intercept;
        var_slope = lf.var_slope;
        var_intercept = lf.var_intercept;
        for (std::size_t i = 0; i < m; ++i)
            fit.residuals.push_back(pts.y[i] - intercept - slope * pts.t[i]);
        fit.mse = lf.chi2 / static_cast<double>(m - 2);
    }
    const double to_phonons = constants::boltzmann * t0 / (constants::hbar * env.omega());
    fit.add("Gamma", slope * to_phonons, std::sqrt(var_slope) * to_phonons);
    fit.add("slope", slope, std::sqrt(var_slope));
    fit.add("intercept", intercept, std::sqrt(var_intercept));
    fit.covariance = Eigen::MatrixXd::Constant(1, 1, var_slope * to_phonons * to_phonons);
    return fit;
}

/// heating_fit on the ensemble mean with the 1-sigma taken from the spread
/// of per-member fits. Neighbouring energy bins are strongly correlated, so
/// the residual-based error of the mean-trace fit is far too small. When the
/// intercept is fixed to a T_fb measured on the same ensemble, pass each
/// member's own T_fb in member_t_fb_k; the fit is then linear in the member
/// data and the spread equals the delete-one jackknife.
inline FitResult ensemble_heating_fit(const TimeTrace& mean_energy, const std::vector<TimeTrace>& members,
                                      const Environment& env, std::optional<double> t_fb_k = std::nullopt,
                                      double t_origin = 0.0, const std::vector<double>& member_t_fb_k = {}) {
    FitResult fit = heating_fit(mean_energy, env, t_fb_k, t_origin);
    const std::size_t n = members.size();
    if (n < 2) return fit;
    if (!member_t_fb_k.empty() && member_t_fb_k.size() != n)
        throw InvalidInput("ensemble heating fit: one T_fb per member expected");
    std::vector<double> slopes;
    slopes.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto own = t_fb_k && !member_t_fb_k.empty() ? std::optional<double>(member_t_fb_k[i]) : t_fb_k;
        slopes.push_back(heating_fit(members[i], env, own, t_origin).param("slope").value);
    }
    double mean = 0.0;
    for (double v : slopes) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : slopes) ss += (v - mean) * (v - mean);
    const double se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
    const double to_phonons = constants::boltzmann * env.gas_temperature_k / (constants::hbar * env.omega());
    for (auto& p : fit.parameters) {
        if (p.name == "slope") p.sigma = se;
        if (p.name == "Gamma") p.sigma = se * to_phonons;
    }
    fit.covariance = Eigen::MatrixXd::Constant(1, 1, se * se * to_phonons * to_phonons);
    fit.message = "sigma from the spread of " + std::to_string(n) + " member fits";
    return fit;
}

/// Unit-slope orthogonal regression y = x + c. With slope 1 the orthogonal
/// distance is (y - x - c)/sqrt(2) and the per-point variance is
/// (sx^2 + sy^2)/2, so the weighted objective is minimised by the weighted
/// mean of (y - x). The 1-sigma is scaled by sqrt(chi2_red) when above 1.
struct UnitSlopeFit {
    double offset = 0.0;
    double sigma = 0.0;
    double chi2 = 0.0;
    std::vector<double> residuals;  // orthogonal distances
};

inline UnitSlopeFit unit_slope_offset(const std::vector<double>& x, const std::vector<double>& sx,
                                      const std::vector<double>& y, const std::vector<double>& sy) {
    const std::size_t n = x.size();
    if (n < 2 || sx.size() != n || y.size() != n || sy.size() != n)
        throw InvalidInput("unit-slope fit needs at least two points of matching length");
    std::vector<double> w(n);
    bool any_sigma = false;
    for (std::size_t i = 0; i < n; ++i) any_sigma |= (sx[i] * sx[i] + sy[i] * sy[i]) > 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = sx[i] * sx[i] + sy[i] * sy[i];
        if (any_sigma && !(v > 0.0)) throw InvalidInput("unit-slope fit: mixed zero and non-zero uncertainties");
        w[i] = any_sigma ? 1.0 / v : 1.0;
    }
    double sw = 0.0, swd = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sw += w[i];
        swd += w[i] * (y[i] - x[i]);
    }
    UnitSlopeFit f;
    f.offset = swd / sw;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = y[i] - x[i] - f.offset;
        f.chi2 += w[i] * d * d;
        f.residuals.push_back(d / std::sqrt(2.0));
    }
    const double red = f.chi2 / static_cast<double>(n - 1);
    const double base = any_sigma ? 1.0 / sw : red / sw;
    f.sigma = std::sqrt(base * (any_sigma ? std::max(1.0, red) : 1.0));
    return f;
}

/// gamma / 2pi = a P in log space with relative uncertainties in both
/// coordinates. gammas in rad/s, pressures in mbar. Parameters: a (Hz/mbar),
/// ln_a.
inline FitResult tls_pressure_fit(const std::vector<Measured>& gammas,
                                  const std::vector<Measured>& pressures_mbar) {
    const std::size_t n = gammas.size();
    if (pressures_mbar.size() != n) throw InvalidInput("TLS fit: length mismatch");
    if (n < 2) throw InvalidInput("TLS fit needs at least two points");
    std::vector<double> x(n), sx(n), y(n), sy(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& g = gammas[i];
        const auto& p = pressures_mbar[i];
        if (!(g.value > 0.0) || !(p.value > 0.0)) throw InvalidInput("TLS fit: values must be positive");
        if (g.sigma < 0.0 || p.sigma < 0.0) throw InvalidInput("TLS fit: negative uncertainty");
        x[i] = std::log(p.value);
        sx[i] = p.sigma / p.value;
        y[i] = std::log(g.value / (2.0 * constants::pi));
        sy[i] = g.sigma / g.value;
    }
    const auto f = unit_slope_offset(x, sx, y, sy);
    FitResult fit;
    const double a = std::exp(f.offset);
    fit.add("a", a, a * f.sigma);
    fit.add("ln_a", f.offset, f.sigma);
    fit.covariance = Eigen::MatrixXd::Constant(1, 1, f.sigma * f.sigma);
    fit.residuals = f.residuals;
    for (std::size_t i = 0; i < n; ++i) fit.variances.push_back(0.5 * (sx[i] * sx[i] + sy[i] * sy[i]));
    fit.mse = f.chi2 / static_cast<double>(n - 1);
    return fit;
}

}  // namespace levitrap
