#pragma once

// Time-integrated camera profiles of an oscillating point scatterer:
// the arcsine position density of a harmonic oscillator with linear
// illumination tilt, smeared by a Gaussian image of width w.
//
//   I(z) = I0 * int P(z') exp(-2 (z - z')^2 / w^2) dz' + c
//   P(x) = (1 + b x) / sqrt(a^2 - x^2),  x = z' - z0,  |x| < a
//
// P is integrated analytically over sub-pixel cells, so the singular edges
// contribute their exact mass and first moment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "levitrap/error.hpp"
#include "levitrap/fit_result.hpp"
#include "levitrap/least_squares.hpp"
#include "levitrap/time_trace.hpp"
#include "levitrap/units.hpp"

namespace levitrap {

/// Model parameters, all in pixels (b in 1/pixel).
struct ProfileParams {
    double i0 = 1.0;
    double z0 = 0.0;
    double w = 1.0;
    double a = 1.0;
    double b = 0.0;
    double c = 0.0;
};

struct IntensityProfile {
    std::vector<double> intensities;  // pixel i sits at position i
    double metres_per_pixel = 1e-6;
    double exposure_s = 0.0;

    std::size_t size() const noexcept { return intensities.size(); }
    double position_m(std::size_t i) const noexcept {
        return static_cast<double>(i) * metres_per_pixel;
    }
};

struct Peak {
    std::size_t index = 0;
    double height = 0.0;
    double prominence = 0.0;
};

namespace detail {

// Antiderivatives of (1 + b x)/sqrt(a^2 - x^2) and x (1 + b x)/sqrt(a^2 - x^2).
inline double arcsine_mass(double x, double a, double b) {
    const double r = std::sqrt(std::max(0.0, a * a - x * x));
    return std::asin(std::clamp(x / a, -1.0, 1.0)) - b * r;
}

inline double arcsine_moment(double x, double a, double b) {
    const double r = std::sqrt(std::max(0.0, a * a - x * x));
    const double s = std::asin(std::clamp(x / a, -1.0, 1.0));
    return -r + 0.5 * b * (a * a * s - x * r);
}

/// Point masses (centroid, mass) approximating a density on sub-pixel cells.
struct CellMasses {
    std::vector<double> position;
    std::vector<double> mass;
};

inline int subcells_per_pixel(double w) {
    return std::max(4, static_cast<int>(std::ceil(8.0 / w)));
}

inline CellMasses arcsine_cells(double z0, double a, double b, int per_pixel) {
    CellMasses out;
    const double h = 1.0 / per_pixel;
    const double lo = z0 - a, hi = z0 + a;
    // Cell j covers [j h - 1/2, (j+1) h - 1/2), so pixel edges are cell edges.
    const auto j0 = static_cast<std::int64_t>(std::floor((lo + 0.5) / h));
    const auto j1 = static_cast<std::int64_t>(std::floor((hi + 0.5) / h));
    out.position.reserve(static_cast<std::size_t>(j1 - j0 + 1));
    out.mass.reserve(static_cast<std::size_t>(j1 - j0 + 1));
    for (auto j = j0; j <= j1; ++j) {
        const double e0 = std::max(lo, static_cast<double>(j) * h - 0.5) - z0;
        const double e1 = std::min(hi, static_cast<double>(j + 1) * h - 0.5) - z0;
        if (!(e1 > e0)) continue;
        const double m = arcsine_mass(e1, a, b) - arcsine_mass(e0, a, b);
        if (m == 0.0) continue;
        const double mom = arcsine_moment(e1, a, b) - arcsine_moment(e0, a, b);
        out.position.push_back(z0 + mom / m);
        out.mass.push_back(m);
    }
    return out;
}

/// Adds scale * sum_k m_k exp(-2 (i - x_k)^2 / w^2) to out[i] for every pixel.
inline void splat_gaussians(const CellMasses& cells, double w, double scale,
                            std::vector<double>& out) {
    const double kappa = 2.0 / (w * w);
    const double reach = 4.5 * w;
    const double q = std::exp(-2.0 * kappa);
    const auto n = static_cast<std::int64_t>(out.size());
    for (std::size_t k = 0; k < cells.mass.size(); ++k) {
        const double x = cells.position[k];
        const auto i0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(x - reach)));
        const auto i1 = std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(std::floor(x + reach)));
        if (i1 < i0) continue;
        const double d0 = static_cast<double>(i0) - x;
        double g = std::exp(-kappa * d0 * d0);
        double r = std::exp(-kappa * (2.0 * d0 + 1.0));
        const double m = scale * cells.mass[k];
        for (auto i = i0; i <= i1; ++i) {
            out[static_cast<std::size_t>(i)] += m * g;
            g *= r;
            r *= q;
        }
    }
}

inline double model_at(const CellMasses& cells, const ProfileParams& p, double x) {
    const double kappa = 2.0 / (p.w * p.w);
    double s = 0.0;
    for (std::size_t k = 0; k < cells.mass.size(); ++k) {
        const double d = x - cells.position[k];
        s += cells.mass[k] * std::exp(-kappa * d * d);
    }
    return p.i0 * s + p.c;
}

/// Model on pixel centres 0..n-1 without validation (used inside fits).
inline void evaluate_profile(const ProfileParams& p, std::size_t n, std::vector<double>& out) {
    out.assign(n, p.c);
    if (!(p.a > 0.0) || !(p.w > 0.0)) return;
    const auto cells = arcsine_cells(p.z0, p.a, p.b, subcells_per_pixel(p.w));
    splat_gaussians(cells, p.w, p.i0, out);
}

}  // namespace detail

/// Renders the model on n_pixels pixels. Requires w >= 4 pixels and a grid
/// that covers [z0 - a - 4w, z0 + a + 4w].
inline IntensityProfile render_profile(const ProfileParams& p, std::size_t n_pixels,
                                       double metres_per_pixel = 1e-6) {
    if (!(p.a > 0.0)) throw InvalidInput("profile amplitude must be positive");
    if (!(p.w > 0.0)) throw InvalidInput("profile width must be positive");
    if (p.w < 4.0) throw InvalidInput("pixel pitch exceeds w/4: grid too coarse to resolve the image width");
    if (std::abs(p.b) * p.a >= 1.0) throw InvalidInput("illumination slope makes the density negative");
    if (p.z0 - p.a - 4.0 * p.w < 0.0 || p.z0 + p.a + 4.0 * p.w > static_cast<double>(n_pixels) - 1.0)
        throw InvalidInput("pixel grid does not cover z0 +- (a + 4w)");
    if (!(metres_per_pixel > 0.0)) throw InvalidInput("pixel scale must be positive");
    IntensityProfile out;
    out.metres_per_pixel = metres_per_pixel;
    detail::evaluate_profile(p, n_pixels, out.intensities);
    return out;
}

/// Local maxima filtered by minimum separation (higher peaks win) and by
/// prominence, in the manner of scipy.signal.find_peaks.
inline std::vector<Peak> find_peaks(const std::vector<double>& y, double min_prominence,
                                    double min_distance = 1.0) {
    std::vector<Peak> peaks;
    const std::size_t n = y.size();
    if (n < 3) return peaks;
    for (std::size_t i = 1; i + 1 < n;) {
        if (y[i - 1] < y[i]) {
            std::size_t ahead = i + 1;
            while (ahead + 1 < n && y[ahead] == y[i]) ++ahead;
            if (y[ahead] < y[i]) {
                peaks.push_back({(i + ahead - 1) / 2, y[i], 0.0});
                i = ahead;
                continue;
            }
        }
        ++i;
    }
    if (min_distance > 1.0 && peaks.size() > 1) {
        std::vector<std::size_t> order(peaks.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::stable_sort(order.begin(), order.end(),
                         [&](auto l, auto r) { return peaks[l].height > peaks[r].height; });
        std::vector<bool> keep(peaks.size(), true);
        for (auto k : order) {
            if (!keep[k]) continue;
            for (std::size_t j = 0; j < peaks.size(); ++j) {
                if (j == k || !keep[j]) continue;
                const double d = std::abs(static_cast<double>(peaks[j].index) -
                                          static_cast<double>(peaks[k].index));
                if (d < min_distance) keep[j] = false;
            }
        }
        std::vector<Peak> kept;
        for (std::size_t k = 0; k < peaks.size(); ++k)
            if (keep[k]) kept.push_back(peaks[k]);
        peaks = std::move(kept);
    }
    std::vector<Peak> out;
    for (auto& p : peaks) {
        double left_min = p.height;
        for (std::size_t i = p.index; i-- > 0;) {
            if (y[i] > p.height) break;
            left_min = std::min(left_min, y[i]);
        }
        double right_min = p.height;
        for (std::size_t i = p.index + 1; i < n; ++i) {
            if (y[i] > p.height) break;
            right_min = std::min(right_min, y[i]);
        }
        p.prominence = p.height - std::max(left_min, right_min);
        if (p.prominence >= min_prominence) out.push_back(p);
    }
    return out;
}

/// The two most prominent peaks (prominence >= 5% of the profile range,
/// separation >= min_distance), ordered by position.
inline std::vector<Peak> major_peaks(const std::vector<double>& y, double min_distance) {
    if (y.empty()) return {};
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    auto peaks = find_peaks(y, 0.05 * (*hi - *lo), min_distance);
    std::stable_sort(peaks.begin(), peaks.end(),
                     [](const Peak& l, const Peak& r) { return l.prominence > r.prominence; });
    if (peaks.size() > 2) peaks.resize(2);
    std::sort(peaks.begin(), peaks.end(),
              [](const Peak& l, const Peak& r) { return l.index < r.index; });
    return peaks;
}

/// Separation of the two highest maxima of the continuous model, in pixels.
/// Returns nullopt when the model has a single maximum.
inline std::optional<double> model_peak_separation(const ProfileParams& p) {
    if (!(p.a > 0.0) || !(p.w > 0.0)) return std::nullopt;
    const auto cells = detail::arcsine_cells(p.z0, p.a, p.b, detail::subcells_per_pixel(p.w));
    const double step = std::min(0.25, p.w / 16.0);
    const double lo = p.z0 - p.a - p.w, hi = p.z0 + p.a + p.w;
    const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = detail::model_at(cells, p, lo + static_cast<double>(i) * step);
    std::vector<std::pair<double, double>> maxima;  // (height, position)
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(y[i] > y[i - 1] && y[i] >= y[i + 1])) continue;
        // Golden-section refinement on the bracketing interval.
        double l = lo + static_cast<double>(i - 1) * step, r = lo + static_cast<double>(i + 1) * step;
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = r - g * (r - l), x2 = l + g * (r - l);
        double f1 = detail::model_at(cells, p, x1), f2 = detail::model_at(cells, p, x2);
        for (int it = 0; it < 60 && r - l > 1e-9; ++it) {
            if (f1 > f2) {
                r = x2;
                x2 = x1;
                f2 = f1;
                x1 = r - g * (r - l);
                f1 = detail::model_at(cells, p, x1);
            } else {
                l = x1;
                x1 = x2;
                f1 = f2;
                x2 = l + g * (r - l);
                f2 = detail::model_at(cells, p, x2);
            }
        }
        const double x = 0.5 * (l + r);
        maxima.emplace_back(detail::model_at(cells, p, x), x);
    }
    if (maxima.size() < 2) return std::nullopt;
    std::sort(maxima.begin(), maxima.end(), std::greater<>());
    return std::abs(maxima[0].second - maxima[1].second);
}

struct ProfileFit {
    ProfileParams params;
    ProfileParams sigma;               // 1-sigma from the fit covariance
    std::optional<double> d_model;     // model maxima separation, pixels
    std::optional<double> d_pf;        // peak-finder separation, pixels
    std::optional<double> peak_error;  // |d_model - d_pf|, pixels
    double metres_per_pixel = 1e-6;
    FitResult fit;

    double amplitude_m() const { return params.a * metres_per_pixel; }
};

namespace detail {

// Initial guess from the two major peaks (or the single broad maximum).
inline ProfileParams initial_profile_guess(const IntensityProfile& prof) {
    const auto& y = prof.intensities;
    const auto n = y.size();
    const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
    const double base = *lo_it, top = *hi_it;
    const double half = base + 0.5 * (top - base);

    auto peaks = major_peaks(y, 4.0);
    ProfileParams p;
    p.c = base;
    p.b = 0.0;
    std::size_t left_edge = 0, right_edge = n - 1;
    std::size_t outer_l = 0, outer_r = n - 1;
    if (peaks.size() == 2) {
        outer_l = peaks[0].index;
        outer_r = peaks[1].index;
    } else {
        outer_l = outer_r = static_cast<std::size_t>(hi_it - y.begin());
    }
    // Half-maximum crossings outside the outermost peaks.
    const double hl = base + 0.5 * (y[outer_l] - base);
    const double hr = base + 0.5 * (y[outer_r] - base);
    for (std::size_t i = outer_l; i-- > 0;)
        if (y[i] < hl) {
            left_edge = i;
            break;
        }
    for (std::size_t i = outer_r + 1; i < n; ++i)
        if (y[i] < hr) {
            right_edge = i;
            break;
        }
    const double flank = 0.5 * (static_cast<double>(outer_l - left_edge) +
                                static_cast<double>(right_edge - outer_r));
    if (peaks.size() == 2) {
        p.z0 = 0.5 * static_cast<double>(outer_l + outer_r);
        p.a = 1.1 * 0.5 * static_cast<double>(outer_r - outer_l);
        p.w = std::max(4.0, 1.5 * flank);
    } else {
        // One broad hump: half width at half maximum spans roughly a + w/2.
        std::size_t l = outer_l, r = outer_r;
        while (l > 0 && y[l] >= half) --l;
        while (r + 1 < n && y[r] >= half) ++r;
        p.z0 = 0.5 * static_cast<double>(l + r);
        const double hw = 0.5 * static_cast<double>(r - l);
        p.w = std::max(4.0, hw);
        p.a = std::max(0.5, 0.5 * hw);
    }
    // Linear least squares for (I0, c) at the shape guess.
    std::vector<double> shape;
    ProfileParams unit = p;
    unit.i0 = 1.0;
    unit.c = 0.0;
    evaluate_profile(unit, n, shape);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += shape[i];
        sy += y[i];
        sxx += shape[i] * shape[i];
        sxy += shape[i] * y[i];
    }
    const double dn = static_cast<double>(n);
    const double det = dn * sxx - sx * sx;
    if (det > 0.0) {
        p.i0 = (dn * sxy - sx * sy) / det;
        p.c = (sy - p.i0 * sx) / dn;
    }
    if (!(p.i0 > 0.0)) p.i0 = (top - base) / std::max(1e-12, *std::max_element(shape.begin(), shape.end()));
    return p;
}

}  // namespace detail

/// Six-parameter least-squares fit of the model to a profile, plus the
/// peak-separation diagnostic used for the amplitude uncertainty.
inline ProfileFit fit_profile(const IntensityProfile& prof,
                              std::optional<ProfileParams> guess = std::nullopt) {
    const auto n = prof.size();
    if (n < 16) throw InvalidInput("profile too short to fit");
    for (double v : prof.intensities)
        if (!std::isfinite(v)) throw InvalidInput("profile contains non-finite intensities");
    const ProfileParams p0 = guess ? *guess : detail::initial_profile_guess(prof);

    // Parameters are fitted relative to their initial scale for conditioning.
    const double sc_i = std::max(std::abs(p0.i0), 1e-12);
    const double sc_c = std::max({std::abs(p0.c), 1e-3 * sc_i, 1e-12});
    auto unpack = [&](const Eigen::VectorXd& x) {
        return ProfileParams{x[0] * sc_i, x[1], std::abs(x[2]), std::abs(x[3]), x[4] * 1e-3, x[5] * sc_c};
    };
    Eigen::VectorXd x0(6);
    x0 << p0.i0 / sc_i, p0.z0, p0.w, p0.a, p0.b * 1e3, p0.c / sc_c;
    std::vector<double> model;
    auto residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
        const ProfileParams p = unpack(x);
        detail::evaluate_profile(p, n, model);
        for (std::size_t i = 0; i < n; ++i)
            r[static_cast<Eigen::Index>(i)] = model[i] - prof.intensities[i];
    };
    LeastSquaresOptions opt;
    opt.ftol = 1e-12;
    opt.xtol = 1e-12;
    const auto sol = solve_least_squares(residual, x0, static_cast<Eigen::Index>(n), opt);

    ProfileFit out;
    out.metres_per_pixel = prof.metres_per_pixel;
    out.params = unpack(sol.x);
    out.params.a = std::abs(out.params.a);
    out.params.w = std::abs(out.params.w);
    const Eigen::VectorXd scale =
        (Eigen::VectorXd(6) << sc_i, 1.0, 1.0, 1.0, 1e-3, sc_c).finished();
    Eigen::MatrixXd cov = scale.asDiagonal() * sol.covariance * scale.asDiagonal();
    auto sd = [&](int k) { return std::sqrt(std::max(0.0, cov(k, k))); };
    out.sigma = {sd(0), sd(1), sd(2), sd(3), sd(4), sd(5)};

    auto& fit = out.fit;
    fit.converged = sol.converged;
    fit.degenerate = sol.singular;
    fit.message = sol.status;
    fit.covariance = cov;
    const char* names[] = {"I0", "z0", "w", "a", "b", "c"};
    const double values[] = {out.params.i0, out.params.z0, out.params.w,
                             out.params.a,  out.params.b,  out.params.c};
    for (int k = 0; k < 6; ++k) fit.add(names[k], values[k], sd(k));
    fit.residuals.assign(sol.residuals.data(), sol.residuals.data() + sol.residuals.size());
    fit.mse = n > 6 ? sol.cost / static_cast<double>(n - 6) : 0.0;

    out.d_model = model_peak_separation(out.params);
    const auto peaks = major_peaks(prof.intensities, std::max(1.0, out.params.w));
    if (peaks.size() == 2)
        out.d_pf = static_cast<double>(peaks[1].index) - static_cast<double>(peaks[0].index);
    if (out.d_model && out.d_pf) out.peak_error = std::abs(*out.d_model - *out.d_pf);
    else fit.flags.emplace_back("peak_separation_unavailable");
    return out;
}

/// Delta a = mean |d_model - d_pf| over a measurement set, in pixels.
/// Profiles without two detectable peaks are skipped; nullopt if none remain.
inline std::optional<double> amplitude_uncertainty(const std::vector<ProfileFit>& fits) {
    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& f : fits) {
        if (!f.peak_error) continue;
        sum += *f.peak_error;
        ++used;
    }
    if (used == 0) return std::nullopt;
    return sum / static_cast<double>(used);
}

/// Camera and illumination geometry for synthesising frames.
struct CameraOptics {
    std::size_t n_pixels = 512;
    double metres_per_pixel = 2e-6;
    double center_px = 255.5;  // trap centre on the sensor
    double w_px = 5.0;
    double i0 = 1.0;
    double b_per_px = 0.0;
    double c = 0.0;
};

struct CameraFrame {
    IntensityProfile profile;
    bool short_exposure = false;  // fewer than 10 oscillation periods
};

/// Time-integrated image of the lit samples of a position trace: the sample
/// histogram on sub-pixel cells, weighted by the illumination tilt and blurred
/// by the Gaussian image. Normalised so a long exposure of a pure sinusoid of
/// amplitude a reproduces render_profile with the same (I0, w, b, c).
inline CameraFrame camera_frame_from_trace(const TimeTrace& z, const CameraOptics& optics,
                                           double secular_frequency_hz) {
    z.check();
    if (optics.n_pixels < 16) throw InvalidInput("camera needs at least 16 pixels");
    if (!(optics.metres_per_pixel > 0.0)) throw InvalidInput("pixel scale must be positive");
    if (optics.w_px < 4.0) throw InvalidInput("pixel pitch exceeds w/4: grid too coarse to resolve the image width");
    const int per_pixel = detail::subcells_per_pixel(optics.w_px);
    const double h = 1.0 / per_pixel;
    const std::size_t cells = optics.n_pixels * static_cast<std::size_t>(per_pixel);
    std::vector<double> weight(cells, 0.0), moment(cells, 0.0);
    std::size_t lit = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!z.is_lit(i)) continue;
        ++lit;
        const double x = optics.center_px + z.values[i] / optics.metres_per_pixel;
        const double jf = std::floor((x + 0.5) / h);
        if (jf < 0.0 || jf >= static_cast<double>(cells)) continue;
        const auto j = static_cast<std::size_t>(jf);
        const double wgt = 1.0 + optics.b_per_px * (x - optics.center_px);
        weight[j] += wgt;
        moment[j] += wgt * x;
    }
    if (lit == 0) throw InvalidInput("camera exposure contains no lit samples");
    detail::CellMasses cm;
    const double norm = constants::pi / static_cast<double>(lit);
    for (std::size_t j = 0; j < cells; ++j) {
        if (weight[j] == 0.0) continue;
        cm.position.push_back(moment[j] / weight[j]);
        cm.mass.push_back(norm * weight[j]);
    }
    CameraFrame out;
    out.profile.metres_per_pixel = optics.metres_per_pixel;
    out.profile.exposure_s = static_cast<double>(lit) * z.dt;
    out.profile.intensities.assign(optics.n_pixels, optics.c);
    detail::splat_gaussians(cm, optics.w_px, optics.i0, out.profile.intensities);
    out.short_exposure = out.profile.exposure_s * secular_frequency_hz < 10.0;
    return out;
}

}  // namespace levitrap
