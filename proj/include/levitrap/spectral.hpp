#pragma once

// Frequency-stability tools: non-overlapping Allan deviation
//   sigma(tau)^2 = 1/(2 f_z^2) * 1/(N-1) * sum_k (fbar_k - fbar_{k-1})^2,  N = floor(t_f / tau)
// a quadrature-demodulation PLL, drift fitting and a Welch PSD.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <unsupported/Eigen/FFT>
#include <vector>

#include "levitrap/error.hpp"
#include "levitrap/time_trace.hpp"
#include "levitrap/units.hpp"

namespace levitrap {

struct FrequencySeries {
    std::vector<double> times;        // s
    std::vector<double> frequencies;  // Hz
    std::vector<std::uint8_t> valid;  // empty: all valid; 0 marks a detection gap
    double nominal_hz = 0.0;

    std::size_t size() const noexcept { return times.size(); }
    bool is_valid(std::size_t i) const noexcept { return valid.empty() || valid[i] != 0; }
    std::size_t gap_count() const noexcept {
        return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), 0));
    }
};

struct AllanPoint {
    double tau = 0.0;        // realised averaging time (block length times dt)
    double sigma = 0.0;
    double error = 0.0;      // propagated standard error of the mean squared difference
    std::size_t intervals = 0;
    bool valid = false;
    std::string flag;        // reason when not valid
};

/// Allan deviation of uniformly spaced frequency samples (spacing dt). Block
/// means run over contiguous samples; the trailing partial block is dropped.
/// t_f <= 0 means the full record. Invalid samples are left out of the block
/// means, and blocks with no valid sample drop their adjacent differences.
inline std::vector<AllanPoint> allan_deviation(const std::vector<double>& freqs, double dt,
                                               const std::vector<double>& taus, double nominal_hz,
                                               double t_f = 0.0,
                                               const std::vector<std::uint8_t>& valid = {}) {
    if (!(dt > 0.0)) throw InvalidInput("Allan deviation: sample spacing must be positive");
    if (!(nominal_hz > 0.0)) throw InvalidInput("Allan deviation: nominal frequency must be positive");
    if (!valid.empty() && valid.size() != freqs.size()) throw InvalidInput("Allan deviation: mask length mismatch");
    const double total = t_f > 0.0 ? t_f : static_cast<double>(freqs.size()) * dt;
    std::vector<AllanPoint> out;
    for (double tau : taus) {
        AllanPoint pt;
        if (!(tau > 0.0)) {
            pt.tau = tau;
            pt.flag = "non-positive tau";
            out.push_back(pt);
            continue;
        }
        const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(tau / dt)));
        pt.tau = static_cast<double>(m) * dt;
        std::size_t n_blocks = static_cast<std::size_t>(std::floor(total / pt.tau + 1e-9));
        n_blocks = std::min(n_blocks, freqs.size() / m);
        pt.intervals = n_blocks;
        if (n_blocks < 2) {
            pt.flag = "fewer than two intervals";
            out.push_back(pt);
            continue;
        }
        std::vector<double> means(n_blocks, 0.0);
        std::vector<bool> ok(n_blocks, false);
        for (std::size_t k = 0; k < n_blocks; ++k) {
            double s = 0.0;
            std::size_t c = 0;
            for (std::size_t i = k * m; i < (k + 1) * m; ++i) {
                if (!valid.empty() && !valid[i]) continue;
                s += freqs[i];
                ++c;
            }
            if (c > 0) {
                means[k] = s / static_cast<double>(c);
                ok[k] = true;
            }
        }
        std::vector<double> d2;
        for (std::size_t k = 1; k < n_blocks; ++k) {
            if (!ok[k] || !ok[k - 1]) continue;
            const double d = means[k] - means[k - 1];
            d2.push_back(d * d);
        }
        if (d2.empty()) {
            pt.flag = "no complete pair of intervals";
            out.push_back(pt);
            continue;
        }
        double mean_d2 = 0.0;
        for (double v : d2) mean_d2 += v;
        mean_d2 /= static_cast<double>(d2.size());
        const double f2 = nominal_hz * nominal_hz;
        pt.sigma = std::sqrt(mean_d2 / (2.0 * f2));
        pt.valid = true;
        if (d2.size() > 1 && pt.sigma > 0.0) {
            double var = 0.0;
            for (double v : d2) var += (v - mean_d2) * (v - mean_d2);
            var /= static_cast<double>(d2.size() - 1);
            const double se = std::sqrt(var / static_cast<double>(d2.size()));
            pt.error = se / (4.0 * f2 * pt.sigma);
        } else {
            pt.error = pt.sigma;
        }
        out.push_back(pt);
    }
    return out;
}

inline std::vector<AllanPoint> allan_deviation(const FrequencySeries& s, const std::vector<double>& taus,
                                               double t_f = 0.0) {
    if (s.size() < 2) throw InvalidInput("Allan deviation needs at least two samples");
    const double dt = (s.times.back() - s.times.front()) / static_cast<double>(s.size() - 1);
    return allan_deviation(s.frequencies, dt, taus, s.nominal_hz, t_f, s.valid);
}

/// Log-spaced averaging times between tau_min and tau_max.
inline std::vector<double> log_taus(double tau_min, double tau_max, int per_decade = 10) {
    if (!(tau_min > 0.0) || !(tau_max >= tau_min)) throw InvalidInput("bad tau range");
    std::vector<double> t;
    const double step = 1.0 / per_decade;
    for (double e = std::log10(tau_min); e <= std::log10(tau_max) + 1e-12; e += step)
        t.push_back(std::pow(10.0, e));
    return t;
}

struct PllOptions {
    double output_rate_hz = 0.0;       // default: twice the cutoff
    double settle_s = 0.0;             // trimmed at both ends; default 2 / cutoff
    double amplitude_threshold = 0.0;  // absolute (|X|+|Y|, signal units); default 10% of median
};

namespace detail {

/// Two cascaded single-pole low-pass stages run forward then backward.
inline void zero_phase_lowpass(std::vector<double>& x, double alpha) {
    auto pass = [&](auto begin, auto end) {
        for (int stage = 0; stage < 2; ++stage) {
            double y = *begin;
            for (auto it = begin; it != end; ++it) {
                y += alpha * (*it - y);
                *it = y;
            }
        }
    };
    pass(x.begin(), x.end());
    pass(x.rbegin(), x.rend());
}

}  // namespace detail

/// Instantaneous frequency by mixing with cos/sin at f_z, zero-phase low-pass
/// filtering at `cutoff`, four-quadrant phase with unwrapping, central
/// differences and block-average decimation.
inline FrequencySeries pll_extract(const TimeTrace& x, double f_z, double cutoff,
                                   const PllOptions& opt = {}) {
    x.check();
    const double fs = 1.0 / x.dt;
    if (!(f_z > 0.0)) throw InvalidInput("PLL: reference frequency must be positive");
    if (!(fs > 4.0 * f_z)) throw InvalidInput("PLL: sample rate must exceed 4 f_z");
    if (!(cutoff > 0.0) || !(cutoff < f_z / 10.0)) throw InvalidInput("PLL: cutoff must lie in (0, f_z/10)");
    const std::size_t n = x.size();
    const double out_rate = opt.output_rate_hz > 0.0 ? opt.output_rate_hz : 2.0 * cutoff;
    const auto block = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fs / out_rate)));
    const double settle = opt.settle_s > 0.0 ? opt.settle_s : 2.0 / cutoff;
    if (static_cast<double>(n) * x.dt <= 2.0 * settle + static_cast<double>(block) * x.dt)
        throw InvalidInput("PLL: trace too short for the filter settling time");

    std::vector<double> xi(n), yq(n);
    const double w = 2.0 * constants::pi * f_z;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x.is_lit(i) ? x.values[i] : 0.0;
        const double ph = std::remainder(w * x.time(i), 2.0 * constants::pi);
        xi[i] = v * std::cos(ph);
        yq[i] = -v * std::sin(ph);
    }
    const double alpha = 1.0 - std::exp(-2.0 * constants::pi * cutoff / fs);
    detail::zero_phase_lowpass(xi, alpha);
    detail::zero_phase_lowpass(yq, alpha);

    std::vector<double> phase(n), amp(n);
    double prev = 0.0, offset = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = std::atan2(yq[i], xi[i]);
        if (i > 0) {
            double d = p - prev;
            if (d > constants::pi) offset -= 2.0 * constants::pi;
            else if (d < -constants::pi) offset += 2.0 * constants::pi;
        }
        prev = p;
        phase[i] = p + offset;
        amp[i] = std::abs(xi[i]) + std::abs(yq[i]);
    }
    double threshold = opt.amplitude_threshold;
    if (!(threshold > 0.0)) {
        std::vector<double> tmp = amp;
        std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(n / 2), tmp.end());
        threshold = 0.1 * tmp[n / 2];
    }

    FrequencySeries out;
    out.nominal_hz = f_z;
    const auto skip = static_cast<std::size_t>(std::ceil(settle * fs));
    bool any_gap = false;
    std::vector<std::uint8_t> valid;
    for (std::size_t start = std::max<std::size_t>(skip, 1); start + block <= n - std::max<std::size_t>(skip, 1);
         start += block) {
        double sf = 0.0;
        bool ok = true;
        for (std::size_t i = start; i < start + block; ++i) {
            sf += (phase[i + 1] - phase[i - 1]) * 0.5 * fs;
            if (amp[i] < threshold || !x.is_lit(i)) ok = false;
        }
        out.times.push_back(x.time(start) + 0.5 * static_cast<double>(block - 1) * x.dt);
        out.frequencies.push_back(f_z + sf / static_cast<double>(block) / (2.0 * constants::pi));
        valid.push_back(ok ? 1 : 0);
        any_gap |= !ok;
    }
    if (any_gap) out.valid = std::move(valid);
    return out;
}

/// Ordinary least-squares slope of frequency against time (Hz/s), valid
/// samples only.
inline Measured drift_fit(const FrequencySeries& s) {
    std::vector<double> t, f;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!s.is_valid(i)) continue;
        t.push_back(s.times[i]);
        f.push_back(s.frequencies[i]);
    }
    const std::size_t n = t.size();
    if (n < 10) throw InvalidInput("drift fit needs at least 10 samples");
    double tm = 0.0, fm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        tm += t[i];
        fm += f[i];
    }
    tm /= static_cast<double>(n);
    fm /= static_cast<double>(n);
    double stt = 0.0, stf = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        stt += (t[i] - tm) * (t[i] - tm);
        stf += (t[i] - tm) * (f[i] - fm);
    }
    const double slope = stf / stt;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = f[i] - fm - slope * (t[i] - tm);
        ss += r * r;
    }
    return {slope, std::sqrt(ss / static_cast<double>(n - 2) / stt)};
}

struct Psd {
    std::vector<double> frequencies;  // Hz
    std::vector<double> density;      // one-sided, unit^2 / Hz
    double resolution_hz = 0.0;
};

/// Welch estimate: Hann window, 50% overlap, per-segment mean removed,
/// one-sided density.
inline Psd psd(const TimeTrace& x, std::size_t segment_length) {
    x.check();
    if (segment_length < 8) throw InvalidInput("PSD segment length must be at least 8");
    if (x.size() < 2 * segment_length) throw InvalidInput("PSD needs at least two segments of data");
    const std::size_t len = segment_length;
    const std::size_t hop = len / 2;
    const double fs = 1.0 / x.dt;
    std::vector<double> win(len);
    double wss = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        win[i] = 0.5 - 0.5 * std::cos(2.0 * constants::pi * static_cast<double>(i) / static_cast<double>(len));
        wss += win[i] * win[i];
    }
    const std::size_t bins = len / 2 + 1;
    Psd out;
    out.resolution_hz = fs / static_cast<double>(len);
    out.density.assign(bins, 0.0);
    for (std::size_t k = 0; k < bins; ++k) out.frequencies.push_back(static_cast<double>(k) * out.resolution_hz);
    Eigen::FFT<double> fft;
    std::vector<double> seg(len);
    std::vector<std::complex<double>> spec;
    std::size_t count = 0;
    for (std::size_t start = 0; start + len <= x.size(); start += hop) {
        double mean = 0.0;
        for (std::size_t i = 0; i < len; ++i) mean += x.values[start + i];
        mean /= static_cast<double>(len);
        for (std::size_t i = 0; i < len; ++i) seg[i] = (x.values[start + i] - mean) * win[i];
        fft.fwd(spec, seg);
        for (std::size_t k = 0; k < bins; ++k) out.density[k] += std::norm(spec[k]);
        ++count;
    }
    const double norm = 1.0 / (fs * wss * static_cast<double>(count));
    for (std::size_t k = 0; k < bins; ++k) {
        const bool edge = k == 0 || (len % 2 == 0 && k == bins - 1);
        out.density[k] *= norm * (edge ? 1.0 : 2.0);
    }
    return out;
}

/// Integral of the density between f_lo and f_hi (rectangle rule).
inline double band_power(const Psd& p, double f_lo, double f_hi) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.frequencies.size(); ++k)
        if (p.frequencies[k] >= f_lo && p.frequencies[k] <= f_hi) s += p.density[k];
    return s * p.resolution_hz;
}

}  // namespace levitrap
