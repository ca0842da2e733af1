#pragma once

// Exact stochastic propagation of the secular mode
//   z'' + gamma z' + Omega_z^2 z = (F_th + F_extra) / m
// Each step uses the closed-form transition of the linear SDE, so step size
// is limited only by the sampling the caller wants, not by accuracy.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <exception>
#include <cstdint>
#include <functional>
#include <optional>
#include <thread>
#include <variant>
#include <vector>

#include "levitrap/error.hpp"
#include "levitrap/physics.hpp"
#include "levitrap/random.hpp"
#include "levitrap/time_trace.hpp"

namespace levitrap {

struct OscState {
    double z = 0.0;  // m
    double v = 0.0;  // m/s
    double t = 0.0;  // s
};

/// 2x2 row-major matrix helpers for the transition and its covariance.
using Mat2 = std::array<double, 4>;

/// Closed-form transition of the underdamped oscillator over one step of
/// length dt: deterministic propagator and the exact covariance of the
/// accumulated noise for a white acceleration noise of one-sided PSD S_a.
class Propagator {
  public:
    Propagator(double dt, double gamma, double omega, double accel_psd)
        : dt_(dt), gamma_(gamma), omega_(omega) {
        if (!(dt > 0.0)) throw InvalidInput("step size must be positive");
        if (!(omega > 0.0)) throw InvalidInput("trap frequency must be positive");
        if (gamma < 0.0) throw InvalidInput("damping must be non-negative");
        if (accel_psd < 0.0) throw InvalidInput("noise PSD must be non-negative");
        if (!(gamma < 2.0 * omega))
            throw UnsupportedRegime("only the underdamped regime gamma < 2 Omega_z is supported");

        const double a = 0.5 * gamma;
        const double w = std::sqrt(omega * omega - a * a);
        const double decay = std::exp(-a * dt);
        const double c = std::cos(w * dt);
        const double s = std::sin(w * dt);
        phi_ = {decay * (c + a / w * s), decay * s / w,
                -decay * omega * omega / w * s, decay * (c - a / w * s)};

        // Two-sided intensity of the velocity noise.
        const double d = 0.5 * accel_psd;
        const double i1 = gamma > 0.0 ? -std::expm1(-gamma * dt) / gamma : dt;
        // J = int_0^dt exp((-gamma + 2iw)s) ds, evaluated without cancellation.
        const std::complex<double> zexp{-gamma, 2.0 * w};
        const double ch = 2.0 * w * dt;
        const double sh = std::sin(0.5 * ch);
        const std::complex<double> em1{std::expm1(-gamma * dt) * std::cos(ch) - 2.0 * sh * sh,
                                       std::exp(-gamma * dt) * std::sin(ch)};
        const std::complex<double> j = em1 / zexp;
        const double ic = j.real();
        const double is = j.imag();
        const double r = a / w;
        const double szz = d / (w * w) * 0.5 * (i1 - ic);
        const double szv = d / w * (0.5 * is - r * 0.5 * (i1 - ic));
        const double svv = d * (0.5 * (i1 + ic) - r * is + r * r * 0.5 * (i1 - ic));
        cov_ = {szz, szv, szv, svv};

        if (szz > 0.0) {
            chol_[0] = std::sqrt(szz);
            chol_[1] = szv / chol_[0];
            chol_[2] = std::sqrt(std::max(0.0, svv - chol_[1] * chol_[1]));
        }
    }

    double dt() const noexcept { return dt_; }
    double gamma() const noexcept { return gamma_; }
    double omega() const noexcept { return omega_; }
    const Mat2& transition() const noexcept { return phi_; }
    const Mat2& covariance() const noexcept { return cov_; }

    /// Advances (z, v) by dt using two independent standard normals.
    void apply(double& z, double& v, double n1, double n2) const noexcept {
        const double zn = phi_[0] * z + phi_[1] * v + chol_[0] * n1;
        const double vn = phi_[2] * z + phi_[3] * v + chol_[1] * n1 + chol_[2] * n2;
        z = zn;
        v = vn;
    }

  private:
    double dt_, gamma_, omega_;
    Mat2 phi_{};
    Mat2 cov_{};
    std::array<double, 3> chol_{};  // L11, L21, L22
};

struct DriveConfig {
    double force_amplitude_n = 0.0;
    double frequency_hz = 0.0;
    double phase_rad = 0.0;
};

/// Steady-state response (z_p, v_p) to F cos(w_d t + phase) at time t.
inline std::pair<double, double> driven_response(const DriveConfig& drive, double mass,
                                                 double gamma, double omega, double t) {
    const double wd = 2.0 * constants::pi * drive.frequency_hz;
    const std::complex<double> chi =
        1.0 / std::complex<double>(omega * omega - wd * wd, gamma * wd);
    const std::complex<double> phasor =
        std::polar(drive.force_amplitude_n / mass, wd * t + drive.phase_rad);
    const std::complex<double> zc = chi * phasor;
    const std::complex<double> vc = std::complex<double>(0.0, wd) * zc;
    return {zc.real(), vc.real()};
}

/// Parameters of the linear oscillator for a single exact step.
struct LinearOscillator {
    double gamma = 0.0;      // rad/s
    double omega = 0.0;      // rad/s
    double mass = 1.0;       // kg
    double force_psd = 0.0;  // one-sided, N^2/Hz
    std::optional<DriveConfig> drive;
};

/// One exact step; n1, n2 are independent standard normals. Builds the
/// propagator on every call, so loops should hold a Propagator instead.
inline OscState exact_step(const OscState& s, double dt, const LinearOscillator& osc, double n1,
                           double n2) {
    const Propagator prop(dt, osc.gamma, osc.omega, osc.force_psd / (osc.mass * osc.mass));
    double z = s.z, v = s.v;
    std::pair<double, double> p0{0.0, 0.0}, p1{0.0, 0.0};
    if (osc.drive) {
        p0 = driven_response(*osc.drive, osc.mass, osc.gamma, osc.omega, s.t);
        p1 = driven_response(*osc.drive, osc.mass, osc.gamma, osc.omega, s.t + dt);
    }
    z -= p0.first;
    v -= p0.second;
    prop.apply(z, v, n1, n2);
    return {z + p1.first, v + p1.second, s.t + dt};
}

struct ThermalNoise {
    double temperature_k = 300.0;
};
struct WhiteForceNoise {
    double psd_n2_per_hz = 0.0;
};
/// White jitter xi(t) of the trap centre with one-sided PSD S_zz (m^2/Hz),
/// entering as the force m Omega_z^2 xi(t).
struct DisplacementNoise {
    double psd_m2_per_hz = 0.0;
};
using NoiseSource = std::variant<ThermalNoise, WhiteForceNoise, DisplacementNoise>;

/// Ideal cold damping: an extra zero-temperature velocity damping channel.
struct FeedbackConfig {
    double gain = 0.0;  // gamma_fb, rad/s

    /// Gain that brings a purely thermal bath at t0 down to t_fb.
    static FeedbackConfig for_temperature(double gamma, double t0, double t_fb) {
        if (!(t_fb > 0.0) || !(t_fb <= t0)) throw InvalidInput("feedback target must be in (0, T0]");
        return {gamma * (t0 / t_fb - 1.0)};
    }
};

/// Window [start, end) that switches feedback, drive and/or illumination.
/// A flag mentioned by any segment is off outside the segments that switch it
/// on; a flag no segment mentions is on whenever it is configured.
struct Segment {
    double start_s = 0.0;
    double end_s = 0.0;
    std::optional<bool> feedback;
    std::optional<bool> drive;
    std::optional<bool> illumination;
};

struct ThermalStart {
    double temperature_k = 300.0;
};
using InitialCondition = std::variant<OscState, ThermalStart>;

struct SimConfig {
    ParticleSpec particle;
    Environment env;
    double gamma = 0.0;  // intrinsic (gas) damping, rad/s
    double dt = 0.0;
    double duration = 0.0;
    std::uint64_t seed = 0;
    std::vector<NoiseSource> noise;
    std::optional<FeedbackConfig> feedback;
    std::optional<DriveConfig> drive;
    std::vector<Segment> schedule;
    InitialCondition initial = OscState{};

    /// One-sided force PSD summed over all configured sources.
    double total_force_psd() const {
        const double m = particle.mass_kg;
        const double w2 = env.omega() * env.omega();
        double s = 0.0;
        for (const auto& src : noise) {
            std::visit(
                [&](const auto& n) {
                    using T = std::decay_t<decltype(n)>;
                    if constexpr (std::is_same_v<T, ThermalNoise>)
                        s += 4.0 * constants::boltzmann * n.temperature_k * m * gamma;
                    else if constexpr (std::is_same_v<T, WhiteForceNoise>)
                        s += n.psd_n2_per_hz;
                    else
                        s += m * m * w2 * w2 * n.psd_m2_per_hz;
                },
                src);
        }
        return s;
    }

    void validate() const {
        particle.validate();
        env.validate();
        if (!(dt > 0.0)) throw ConfigError("dt must be positive");
        if (!(duration >= dt)) throw ConfigError("duration must be at least one step");
        if (gamma < 0.0) throw ConfigError("gamma must be non-negative");
        if (feedback && feedback->gain < 0.0) throw ConfigError("feedback gain must be non-negative");
        if (drive && drive->force_amplitude_n < 0.0)
            throw ConfigError("drive amplitude must be non-negative");
        for (const auto& src : noise) {
            const bool bad = std::visit(
                [](const auto& n) {
                    using T = std::decay_t<decltype(n)>;
                    if constexpr (std::is_same_v<T, ThermalNoise>) return !(n.temperature_k >= 0.0);
                    else if constexpr (std::is_same_v<T, WhiteForceNoise>) return !(n.psd_n2_per_hz >= 0.0);
                    else return !(n.psd_m2_per_hz >= 0.0);
                },
                src);
            if (bad) throw ConfigError("noise source levels must be non-negative");
        }
        for (std::size_t i = 0; i < schedule.size(); ++i) {
            const auto& a = schedule[i];
            if (!(a.end_s > a.start_s)) throw ConfigError("schedule segment must have end > start");
            for (std::size_t j = i + 1; j < schedule.size(); ++j) {
                const auto& b = schedule[j];
                if (a.start_s >= b.end_s || b.start_s >= a.end_s) continue;
                auto clash = [](const std::optional<bool>& x, const std::optional<bool>& y) {
                    return x && y && *x != *y;
                };
                if (clash(a.feedback, b.feedback) || clash(a.drive, b.drive) ||
                    clash(a.illumination, b.illumination))
                    throw ConfigError("overlapping schedule segments disagree");
            }
        }
        if (gamma + (feedback ? feedback->gain : 0.0) >= 2.0 * env.omega())
            throw UnsupportedRegime("total damping must stay below 2 Omega_z");
    }
};

struct ActiveFlags {
    bool feedback = false;
    bool drive = false;
    bool illumination = true;
};

/// Resolves which channels are active at time t.
inline ActiveFlags flags_at(const SimConfig& cfg, double t) {
    bool fb_mentioned = false, drive_mentioned = false, light_mentioned = false;
    bool fb_on = false, drive_on = false, light_on = false;
    for (const auto& seg : cfg.schedule) {
        const bool inside = t >= seg.start_s && t < seg.end_s;
        if (seg.feedback) {
            fb_mentioned = true;
            if (inside) fb_on = *seg.feedback;
        }
        if (seg.drive) {
            drive_mentioned = true;
            if (inside) drive_on = *seg.drive;
        }
        if (seg.illumination) {
            light_mentioned = true;
            if (inside) light_on = *seg.illumination;
        }
    }
    ActiveFlags f;
    f.feedback = cfg.feedback.has_value() && (fb_mentioned ? fb_on : true);
    f.drive = cfg.drive.has_value() && (drive_mentioned ? drive_on : true);
    f.illumination = light_mentioned ? light_on : true;
    return f;
}

struct Trajectory {
    TimeTrace position;  // m, carries the illumination mask
    TimeTrace velocity;  // m/s
};

/// Stateful exact integrator for one trajectory. The noise for step k is
/// drawn from counter k of the trajectory stream, so the path is a pure
/// function of (config, stream key).
class OscillatorSimulator {
  public:
    OscillatorSimulator(SimConfig cfg, std::uint64_t stream_key)
        : cfg_(std::move(cfg)), rng_(stream_key), accel_psd_(0.0) {
        cfg_.validate();
        const double m = cfg_.particle.mass_kg;
        accel_psd_ = cfg_.total_force_psd() / (m * m);
        state_ = initial_state(CounterRng(derive_key(stream_key, 0xffffffffULL)));
    }

    const OscState& state() const noexcept { return state_; }
    const SimConfig& config() const noexcept { return cfg_; }
    std::uint64_t steps_taken() const noexcept { return step_; }

    /// One exact step of length dt with the channels active at the step start.
    void step(double dt) {
        const ActiveFlags f = flags_at(cfg_, state_.t);
        const double gamma_eff = cfg_.gamma + (f.feedback ? cfg_.feedback->gain : 0.0);
        const Propagator& prop = propagator(dt, gamma_eff);
        double z = state_.z, v = state_.v;
        std::pair<double, double> p0{0.0, 0.0}, p1{0.0, 0.0};
        if (f.drive) {
            const double m = cfg_.particle.mass_kg, w = cfg_.env.omega();
            p0 = driven_response(*cfg_.drive, m, gamma_eff, w, state_.t);
            p1 = driven_response(*cfg_.drive, m, gamma_eff, w, state_.t + dt);
        }
        const auto [n1, n2] = rng_.normal_pair(step_++);
        z -= p0.first;
        v -= p0.second;
        prop.apply(z, v, n1, n2);
        state_ = {z + p1.first, v + p1.second, state_.t + dt};
    }

    /// Advances by `duration` without recording (single step when dt <= 0).
    void advance(double duration, double dt = 0.0) {
        if (duration <= 0.0) return;
        if (dt <= 0.0) {
            step(duration);
            return;
        }
        const auto n = static_cast<std::uint64_t>(std::llround(duration / dt));
        for (std::uint64_t i = 0; i < n; ++i) step(dt);
    }

    /// Records n_samples samples spaced by dt, the first being the current state.
    Trajectory record(std::size_t n_samples, double dt) {
        Trajectory tr;
        tr.position.t0 = tr.velocity.t0 = state_.t;
        tr.position.dt = tr.velocity.dt = dt;
        tr.position.unit = SeriesUnit::Metre;
        tr.velocity.unit = SeriesUnit::MetrePerSecond;
        tr.position.values.reserve(n_samples);
        tr.velocity.values.reserve(n_samples);
        bool any_dark = false;
        std::vector<std::uint8_t> lit;
        lit.reserve(n_samples);
        for (std::size_t i = 0; i < n_samples; ++i) {
            if (i > 0) step(dt);
            tr.position.values.push_back(state_.z);
            tr.velocity.values.push_back(state_.v);
            const bool on = flags_at(cfg_, state_.t).illumination;
            any_dark |= !on;
            lit.push_back(on ? 1 : 0);
        }
        if (any_dark) tr.position.lit = tr.velocity.lit = std::move(lit);
        return tr;
    }

  private:
    OscState initial_state(const CounterRng& init_rng) const {
        return std::visit(
            [&](const auto& ic) -> OscState {
                using T = std::decay_t<decltype(ic)>;
                if constexpr (std::is_same_v<T, OscState>) {
                    return ic;
                } else {
                    const double m = cfg_.particle.mass_kg, w = cfg_.env.omega();
                    const double kt = constants::boltzmann * ic.temperature_k;
                    const auto [n1, n2] = init_rng.normal_pair(0);
                    return {n1 * std::sqrt(kt / (m * w * w)), n2 * std::sqrt(kt / m), 0.0};
                }
            },
            cfg_.initial);
    }

    const Propagator& propagator(double dt, double gamma) {
        for (const auto& p : cache_)
            if (p.dt() == dt && p.gamma() == gamma) return p;
        if (cache_.size() > 8) cache_.clear();
        cache_.emplace_back(dt, gamma, cfg_.env.omega(), accel_psd_);
        return cache_.back();
    }

    SimConfig cfg_;
    CounterRng rng_;
    double accel_psd_;
    OscState state_;
    std::uint64_t step_ = 0;
    std::vector<Propagator> cache_;
};

/// Number of samples (including t = 0) covering cfg.duration at cfg.dt.
inline std::size_t sample_count(const SimConfig& cfg) {
    return static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt)) + 1;
}

/// Full trajectory from the configured initial condition; keyed by cfg.seed.
inline Trajectory simulate_trajectory(const SimConfig& cfg) {
    OscillatorSimulator sim(cfg, cfg.seed);
    return sim.record(sample_count(cfg), cfg.dt);
}

/// Seed of ensemble member `index`.
inline std::uint64_t member_seed(std::uint64_t seed, std::uint64_t index) {
    return derive_key(seed, index);
}

/// Runs n independent members and maps each through fn(Trajectory, index).
/// Members are distributed over threads; the result does not depend on the
/// thread count because each member owns its random stream.
template <class Fn>
auto simulate_ensemble_map(const SimConfig& cfg, std::size_t n, Fn&& fn, unsigned threads = 0)
    -> std::vector<std::invoke_result_t<Fn&, Trajectory, std::size_t>> {
    using R = std::invoke_result_t<Fn&, Trajectory, std::size_t>;
    if (n == 0) throw InvalidInput("ensemble size must be at least 1");
    cfg.validate();
    std::vector<std::optional<R>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    auto work = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < n; i += stride) {
            try {
                SimConfig member = cfg;
                member.seed = member_seed(cfg.seed, i);
                slots[i].emplace(fn(simulate_trajectory(member), i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<R> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

inline std::vector<Trajectory> simulate_ensemble(const SimConfig& cfg, std::size_t n,
                                                 unsigned threads = 0) {
    return simulate_ensemble_map(
        cfg, n, [](Trajectory t, std::size_t) { return t; }, threads);
}

/// Energy estimate m Omega_z^2 <z^2> per bin of `bin_s` seconds, using lit
/// samples only. Bins without a lit sample are marked dark; a trailing
/// partial bin is dropped.
inline TimeTrace energy_series(const TimeTrace& z, double bin_s, double mass, double omega) {
    z.check();
    const double per_bin = bin_s / z.dt;
    if (!(per_bin >= 1.0 - 1e-9)) throw InvalidInput("energy bin shorter than one sample");
    const auto n = static_cast<std::size_t>(std::llround(per_bin));
    const std::size_t bins = z.size() / n;
    TimeTrace out;
    out.dt = static_cast<double>(n) * z.dt;
    out.t0 = z.t0 + 0.5 * static_cast<double>(n - 1) * z.dt;
    out.unit = SeriesUnit::Joule;
    out.values.assign(bins, 0.0);
    std::vector<std::uint8_t> lit(bins, 1);
    bool any_dark = false;
    const double k = mass * omega * omega;
    for (std::size_t b = 0; b < bins; ++b) {
        double acc = 0.0;
        std::size_t used = 0;
        for (std::size_t i = b * n; i < (b + 1) * n; ++i) {
            if (!z.is_lit(i)) continue;
            acc += z.values[i] * z.values[i];
            ++used;
        }
        if (used == 0) {
            lit[b] = 0;
            any_dark = true;
        } else {
            out.values[b] = k * acc / static_cast<double>(used);
        }
    }
    if (any_dark) out.lit = std::move(lit);
    return out;
}

/// Rescales an energy series in joules to units of k_B T0.
inline TimeTrace to_thermal_units(TimeTrace e, double t0_k) {
    if (e.unit != SeriesUnit::Joule) throw InvalidInput("expected an energy series in joules");
    for (auto& x : e.values) x /= constants::boltzmann * t0_k;
    e.unit = SeriesUnit::ThermalEnergy;
    return e;
}

/// Element-wise mean of equally sampled series; a sample is dark if it is
/// dark in any member.
inline TimeTrace ensemble_mean(const std::vector<TimeTrace>& traces) {
    if (traces.empty()) throw InvalidInput("ensemble mean of an empty set");
    TimeTrace out = traces.front();
    std::size_t n = out.size();
    for (const auto& t : traces) n = std::min(n, t.size());
    out.values.assign(n, 0.0);
    std::vector<std::uint8_t> lit(n, 1);
    bool any_dark = false;
    for (const auto& t : traces) {
        for (std::size_t i = 0; i < n; ++i) {
            out.values[i] += t.values[i];
            if (!t.is_lit(i)) {
                lit[i] = 0;
                any_dark = true;
            }
        }
    }
    for (auto& v : out.values) v /= static_cast<double>(traces.size());
    out.lit = any_dark ? std::move(lit) : std::vector<std::uint8_t>{};
    return out;
}

}  // namespace levitrap
