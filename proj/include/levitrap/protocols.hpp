#pragma once

// Closed-loop measurement protocols: simulate a configured particle, pass the
// motion through a detection channel and run the matching estimator, so the
// recovered parameters can be compared with the simulation truth.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "levitrap/analysis.hpp"
#include "levitrap/detection.hpp"
#include "levitrap/dynamics.hpp"
#include "levitrap/profile.hpp"
#include "levitrap/random.hpp"
#include "levitrap/spectral.hpp"

namespace levitrap::protocols {

// ---------------------------------------------------------------- ring-up

struct RingupProtocol {
    ParticleSpec particle;
    Environment env;
    double gamma = 0.0;           // true damping, rad/s
    double t_fb_k = 1.0;          // feedback temperature
    double feedback_s = 0.5;      // feedback on for t < feedback_s
    double ringup_s = 10.0;       // free evolution after switch-off
    std::size_t members = 400;
    double bin_s = 0.1;
    double samples_per_period = 16.0;
    double alpha_v_per_m = 1e6;
    double readout_psd = 0.0;     // V^2/Hz
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

struct RingupOutcome {
    TimeTrace mean_variance;  // V^2
    RingupCalibration calibration;
    TimeTrace mean_energy;    // k_B T0
    FitResult fit;            // gamma with T_fb fixed
};

inline SimConfig ringup_config(const RingupProtocol& p) {
    SimConfig cfg;
    cfg.particle = p.particle;
    cfg.env = p.env;
    cfg.gamma = p.gamma;
    cfg.dt = 1.0 / (p.samples_per_period * p.env.secular_frequency_hz);
    cfg.duration = p.feedback_s + p.ringup_s;
    cfg.seed = p.seed;
    cfg.noise = {ThermalNoise{p.env.gas_temperature_k}};
    cfg.feedback = FeedbackConfig::for_temperature(p.gamma, p.env.gas_temperature_k, p.t_fb_k);
    cfg.schedule = {Segment{0.0, p.feedback_s, true, std::nullopt, std::nullopt}};
    cfg.initial = ThermalStart{p.t_fb_k};
    return cfg;
}

/// Ensemble-mean APD variance (V^2) in bins of p.bin_s.
inline TimeTrace ringup_variance(const RingupProtocol& p) {
    const SimConfig cfg = ringup_config(p);
    auto variances = simulate_ensemble_map(
        cfg, p.members,
        [&](Trajectory tr, std::size_t i) {
            const auto u = apd_trace(tr.position, p.alpha_v_per_m, p.readout_psd,
                                     derive_key(p.seed ^ 0xa9d0a9d0ULL, i));
            return variance_series(u, p.bin_s);
        },
        p.threads);
    return ensemble_mean(variances);
}

inline RingupOutcome run_ringup(const RingupProtocol& p) {
    RingupOutcome out;
    out.mean_variance = ringup_variance(p);
    const double t0 = p.env.gas_temperature_k;
    out.calibration = calibrate_ringup(out.mean_variance, p.feedback_s, t0, p.particle.mass_kg,
                                       p.env.omega());
    out.mean_energy = to_thermal_units(out.mean_variance, out.calibration.calibration);
    out.fit = ringup_fit(out.mean_energy, p.t_fb_k, t0, p.feedback_s);
    return out;
}

// ---------------------------------------------------------------- heating

struct HeatingProtocol {
    ParticleSpec particle;
    Environment env;
    double gamma = 0.0;               // gas damping, rad/s
    double heating_rate = 3.3e4;      // total phonon heating rate to simulate
    double t_fb_k = 0.8;
    double feedback_s = 5.0;
    double free_s = 200.0;
    std::size_t members = 100;
    double bin_s = 1.0;
    double strobe_on_s = 0.5;
    double strobe_period_s = 20.0;
    double sample_rate_hz = 2710.0;   // incommensurate with f_z; envelope statistics only
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

struct HeatingOutcome {
    TimeTrace continuous_energy;    // k_B T0, all samples lit
    TimeTrace stroboscopic_energy;  // k_B T0, lit only in the windows
    double t_fb_measured_k = 0.0;   // from the feedback segment
    std::vector<TimeTrace> continuous_members;
    std::vector<TimeTrace> stroboscopic_members;
    std::vector<double> member_t_fb_k;
    FitResult continuous;
    FitResult stroboscopic;
};

/// Extra white force PSD that, together with the thermal bath, gives the
/// requested total phonon heating rate.
inline double excess_force_psd(const HeatingProtocol& p) {
    const double total = 4.0 * p.particle.mass_kg * constants::hbar * p.env.omega() * p.heating_rate;
    const double thermal = 4.0 * constants::boltzmann * p.env.gas_temperature_k * p.particle.mass_kg * p.gamma;
    if (total < thermal) throw InvalidInput("requested heating rate is below the gas heating rate");
    return total - thermal;
}

inline SimConfig heating_config(const HeatingProtocol& p) {
    SimConfig cfg;
    cfg.particle = p.particle;
    cfg.env = p.env;
    cfg.gamma = p.gamma;
    cfg.dt = 1.0 / p.sample_rate_hz;
    cfg.duration = p.feedback_s + p.free_s;
    cfg.seed = p.seed;
    cfg.noise = {ThermalNoise{p.env.gas_temperature_k}, WhiteForceNoise{excess_force_psd(p)}};
    // Cold damping that holds the total bath at T_fb.
    const double m = p.particle.mass_kg;
    const double s_total = cfg.total_force_psd();
    const double gain = s_total / (4.0 * m * constants::boltzmann * p.t_fb_k) - p.gamma;
    cfg.feedback = FeedbackConfig{std::max(0.0, gain)};
    cfg.schedule.push_back(Segment{0.0, p.feedback_s, true, std::nullopt, std::nullopt});
    cfg.schedule.push_back(Segment{0.0, p.feedback_s, std::nullopt, std::nullopt, true});
    for (double t = p.feedback_s; t + p.strobe_on_s <= cfg.duration + 1e-9; t += p.strobe_period_s)
        cfg.schedule.push_back(Segment{t, t + p.strobe_on_s, std::nullopt, std::nullopt, true});
    cfg.initial = ThermalStart{p.t_fb_k};
    return cfg;
}

/// One ensemble serves both read-outs: illumination does not act on the
/// motion, so the continuous variant reads every sample and the
/// stroboscopic variant only the lit windows. Fills everything but the fits.
inline HeatingOutcome heating_energies(const HeatingProtocol& p) {
    const SimConfig cfg = heating_config(p);
    const double m = p.particle.mass_kg, w = p.env.omega(), t0 = p.env.gas_temperature_k;
    struct Pair {
        TimeTrace cont, strobe;
    };
    auto pairs = simulate_ensemble_map(
        cfg, p.members,
        [&](Trajectory tr, std::size_t) {
            TimeTrace lit_all = tr.position;
            lit_all.lit.clear();
            return Pair{to_thermal_units(energy_series(lit_all, p.bin_s, m, w), t0),
                        to_thermal_units(energy_series(tr.position, p.strobe_on_s, m, w), t0)};
        },
        p.threads);
    std::vector<TimeTrace> cont, strobe;
    for (auto& pr : pairs) {
        cont.push_back(std::move(pr.cont));
        strobe.push_back(std::move(pr.strobe));
    }
    HeatingOutcome out;
    out.continuous_energy = ensemble_mean(cont);
    out.stroboscopic_energy = ensemble_mean(strobe);
    out.continuous_members = std::move(cont);
    out.stroboscopic_members = std::move(strobe);
    auto feedback_mean = [&](const TimeTrace& e) {
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < e.size() && e.time(i) < p.feedback_s; ++i, ++n) s += e.values[i];
        if (n == 0) throw InvalidInput("heating protocol: no samples during feedback");
        return t0 * s / static_cast<double>(n);
    };
    out.t_fb_measured_k = feedback_mean(out.continuous_energy);
    for (const auto& e : out.continuous_members) out.member_t_fb_k.push_back(feedback_mean(e));
    return out;
}

inline HeatingOutcome run_heating(const HeatingProtocol& p) {
    HeatingOutcome out = heating_energies(p);
    out.continuous = ensemble_heating_fit(out.continuous_energy, out.continuous_members, p.env,
                                          out.t_fb_measured_k, p.feedback_s, out.member_t_fb_k);
    out.stroboscopic = ensemble_heating_fit(out.stroboscopic_energy, out.stroboscopic_members, p.env,
                                            out.t_fb_measured_k, p.feedback_s, out.member_t_fb_k);
    return out;
}

// -------------------------------------------------------------- ring-down

struct RingdownProtocol {
    ParticleSpec particle;
    Environment env;
    double gamma = 0.0;             // rad/s
    double a0_m = 200e-6;           // initial amplitude
    double cadence_s = 300.0;
    double span_s = 7200.0;
    double exposure_s = 1.0;
    double samples_per_period = 15.6;  // incommensurate with the period
    CameraOptics optics{512, 2e-6, 255.5, 5.0, 1.0, 0.0, 0.05};
    double intensity_noise = 0.02;  // multiplicative, per pixel
    double delta_a_m = 0.0;         // amplitude uncertainty passed to the fit
    double amplitude_jitter_m = 0.0;  // extra Gaussian read-out scatter
    std::uint64_t seed = 1;
};

struct RingdownOutcome {
    std::vector<double> times;
    std::vector<double> amplitudes_m;
    std::vector<double> squared_amplitudes;
    std::vector<ProfileFit> profile_fits;
    std::optional<double> delta_a_measured_m;  // mean |d_model - d_pf|
    std::size_t short_exposures = 0;
    std::size_t failed_profiles = 0;
    FitResult fit;
};

/// Simulated camera amplitudes; everything but the ring-down fit.
inline RingdownOutcome ringdown_measurements(const RingdownProtocol& p) {
    if (!(p.cadence_s > p.exposure_s)) throw InvalidInput("ring-down cadence must exceed the exposure");
    SimConfig cfg;
    cfg.particle = p.particle;
    cfg.env = p.env;
    cfg.gamma = p.gamma;
    cfg.dt = 1.0 / (p.samples_per_period * p.env.secular_frequency_hz);
    cfg.duration = p.span_s + p.exposure_s;
    cfg.seed = p.seed;
    cfg.noise = {ThermalNoise{p.env.gas_temperature_k}};
    cfg.initial = OscState{p.a0_m, 0.0, 0.0};
    OscillatorSimulator sim(cfg, p.seed);
    const CounterRng noise(derive_key(p.seed, 0x5ca1ab1eULL));
    const auto frame_samples = static_cast<std::size_t>(std::llround(p.exposure_s / cfg.dt));

    RingdownOutcome out;
    std::uint64_t counter = 0;
    for (double t = 0.0; t <= p.span_s + 1e-9; t += p.cadence_s) {
        sim.advance(t - sim.state().t);
        const double t_mid = sim.state().t + 0.5 * p.exposure_s;
        const auto tr = sim.record(frame_samples, cfg.dt);
        auto frame = camera_frame_from_trace(tr.position, p.optics, p.env.secular_frequency_hz);
        out.short_exposures += frame.short_exposure ? 1 : 0;
        for (auto& v : frame.profile.intensities)
            v = std::max(0.0, v * (1.0 + p.intensity_noise * noise.normal(counter++)));
        auto pf = fit_profile(frame.profile);
        if (!pf.fit.converged) {
            ++out.failed_profiles;
            continue;
        }
        double a = pf.amplitude_m();
        if (p.amplitude_jitter_m > 0.0) a += p.amplitude_jitter_m * noise.normal(counter++);
        out.times.push_back(t_mid);
        out.amplitudes_m.push_back(a);
        out.squared_amplitudes.push_back(a * a);
        out.profile_fits.push_back(std::move(pf));
    }
    if (auto da = amplitude_uncertainty(out.profile_fits)) out.delta_a_measured_m = *da * p.optics.metres_per_pixel;
    return out;
}

inline RingdownOutcome run_ringdown(const RingdownProtocol& p) {
    RingdownOutcome out = ringdown_measurements(p);
    out.fit = ringdown_fit(out.times, out.squared_amplitudes, p.delta_a_m);
    return out;
}

// ------------------------------------------------------- synthetic inputs

/// Ring-down amplitudes a_i = a0 exp(-gamma t_i / 2) + N(0, delta_a). With
/// excess_fraction > 0, that fraction of points (chosen at random) is moved
/// by +-excess_sigmas * sigma_i in ln(a^2).
inline std::vector<double> synthetic_ringdown(const std::vector<double>& times, double gamma, double a0,
                                              double delta_a, std::uint64_t key,
                                              double excess_fraction = 0.0, double excess_sigmas = 5.0) {
    const CounterRng rng(key);
    std::vector<double> z2;
    std::uint64_t c = 0;
    for (double t : times) {
        const double a_true = a0 * std::exp(-0.5 * gamma * t);
        double a = a_true + delta_a * rng.normal(c++);
        double y = 2.0 * std::log(std::abs(a));
        if (excess_fraction > 0.0 && rng.uniform((1ULL << 62) | c++) < excess_fraction) {
            const double sign = rng.uniform((1ULL << 62) | c++) < 0.5 ? -1.0 : 1.0;
            y += sign * excess_sigmas * 2.0 * delta_a / a_true;
        }
        z2.push_back(std::exp(y));
    }
    return z2;
}

/// Linear chirp A cos(2pi (f0 t + rate t^2 / 2)) plus optional white noise
/// of one-sided PSD noise_psd.
inline TimeTrace chirp_trace(double f0, double rate, double duration, double sample_rate, double amplitude,
                             double noise_psd = 0.0, std::uint64_t key = 0) {
    if (!(sample_rate > 0.0) || !(duration > 0.0)) throw InvalidInput("chirp: bad sampling");
    TimeTrace tr;
    tr.dt = 1.0 / sample_rate;
    tr.unit = SeriesUnit::Metre;
    const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
    tr.values.resize(n);
    const CounterRng rng(key);
    const double sigma = std::sqrt(noise_psd * sample_rate / 2.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * tr.dt;
        // Phase in cycles, reduced before scaling to keep precision over long traces.
        const double cycles = f0 * t + 0.5 * rate * t * t;
        const double frac = cycles - std::floor(cycles);
        tr.values[i] = amplitude * std::cos(2.0 * constants::pi * frac);
        if (sigma > 0.0) tr.values[i] += sigma * rng.normal(i);
    }
    return tr;
}

}  // namespace levitrap::protocols
