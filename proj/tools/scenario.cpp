#include "scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace levitrap::cli {

Format parse_format(const std::string& s) {
    if (s == "csv") return Format::Csv;
    if (s == "json") return Format::Json;
    throw ConfigError("unknown format '" + s + "' (expected csv or json)");
}

const char* to_string(Pipeline p) {
    switch (p) {
        case Pipeline::Simulate: return "simulate";
        case Pipeline::Ringup: return "ringup";
        case Pipeline::Heating: return "heating";
        case Pipeline::Ringdown: return "ringdown";
    }
    return "?";
}

std::vector<std::string> known_estimators(Pipeline p) {
    switch (p) {
        case Pipeline::Simulate: return {"energy_series", "apd", "psd", "pll", "allan", "drift_fit"};
        case Pipeline::Ringup: return {"calibrate_ringup", "ringup_fit"};
        case Pipeline::Heating: return {"heating_fit", "heating_fit_stroboscopic"};
        case Pipeline::Ringdown: return {"ringdown_fit", "residual_mse"};
    }
    return {};
}

void Scenario::sync() {
    auto& c = simulate.config;
    c.particle = particle;
    c.env = env;
    c.gamma = gamma;
    c.seed = seed;
    for (auto* p : {&ringup.particle, &heating.particle, &ringdown.particle}) *p = particle;
    for (auto* e : {&ringup.env, &heating.env, &ringdown.env}) *e = env;
    ringup.gamma = heating.gamma = ringdown.gamma = gamma;
    ringup.seed = heating.seed = ringdown.seed = seed;
}

namespace {

// ------------------------------------------------------------ YAML reading

struct Problems {
    std::vector<std::string> list;
    void add(std::string m) { list.push_back(std::move(m)); }
};

std::string where(const YAML::Node& n) {
    const auto m = n.Mark();
    return m.line >= 0 ? " (line " + std::to_string(m.line + 1) + ")" : "";
}

/// A mapping whose keys are consumed one by one; leftovers are reported.
class Section {
  public:
    Section(YAML::Node node, std::string path, Problems& problems)
        : node_(std::move(node)), path_(std::move(path)), problems_(problems) {
        if (node_ && !node_.IsMap()) {
            problems_.add(path_ + ": expected a mapping" + where(node_));
            node_ = YAML::Node();
        }
    }

    bool present() const { return node_.IsDefined() && !node_.IsNull(); }
    bool has(const std::string& key) const { return present() && at(key).IsDefined(); }

    template <class T>
    std::optional<T> get(const std::string& key) {
        used_.insert(key);
        if (!present()) return std::nullopt;
        const YAML::Node v = at(key);
        if (!v.IsDefined() || v.IsNull()) return std::nullopt;
        try {
            return v.as<T>();
        } catch (const YAML::Exception&) {
            problems_.add(path_ + "." + key + ": cannot read value '" + scalar(v) + "'" + where(v));
            return std::nullopt;
        }
    }

    template <class T>
    void read(const std::string& key, T& target) {
        if (auto v = get<T>(key)) target = *v;
    }

    template <class T>
    T required(const std::string& key, T fallback = T{}) {
        if (auto v = get<T>(key)) return *v;
        if (!has(key)) problems_.add(path_ + "." + key + ": required");
        return fallback;
    }

    Section sub(const std::string& key) {
        used_.insert(key);
        return Section(present() ? at(key) : YAML::Node(), path_ + "." + key, problems_);
    }

    YAML::Node raw(const std::string& key) {
        used_.insert(key);
        return present() ? at(key) : YAML::Node();
    }

    void finish() const {
        if (!present()) return;
        for (const auto& kv : node_) {
            const auto k = kv.first.as<std::string>();
            if (!used_.count(k)) problems_.add(path_ + "." + k + ": unknown key" + where(kv.first));
        }
    }

    const std::string& path() const { return path_; }

  private:
    // Const access never inserts the key.
    YAML::Node at(const std::string& key) const {
        const YAML::Node& n = node_;
        return n[key];
    }
    static std::string scalar(const YAML::Node& v) { return v.IsScalar() ? v.Scalar() : "<non-scalar>"; }

    YAML::Node node_;
    std::string path_;
    Problems& problems_;
    std::set<std::string> used_;
};

void check(Problems& pr, bool ok, const std::string& msg) {
    if (!ok) pr.add(msg);
}

template <class F>
void collect(Problems& pr, F&& f) {
    try {
        f();
    } catch (const Error& e) {
        pr.add(e.what());
    }
}

void read_particle(Section s, ParticleSpec& p, Problems& pr) {
    s.read("mass_kg", p.mass_kg);
    s.read("radius_m", p.radius_m);
    s.read("charge_e", p.charge_e);
    s.read("accommodation", p.accommodation);
    s.read("surface_temperature_k", p.surface_temperature_k);
    if (auto shape = s.get<std::string>("shape")) {
        if (*shape == "sphere") p.shape = Shape::Sphere;
        else if (*shape == "dumbbell") p.shape = Shape::Dumbbell;
        else pr.add(s.path() + ".shape: expected sphere or dumbbell");
    }
    s.finish();
}

void read_environment(Section s, Environment& e) {
    if (auto p = s.get<double>("pressure_mbar")) e.set_pressure_mbar(*p);
    if (auto p = s.get<double>("pressure_pa")) e.pressure_pa = *p;
    s.read("gas_temperature_k", e.gas_temperature_k);
    s.read("gas_molecule_mass_kg", e.gas_molecule_mass_kg);
    s.read("f_z_hz", e.secular_frequency_hz);
    s.read("electrode_distance_m", e.electrode_distance_m);
    s.read("electrode_resistivity_ohm_m", e.electrode_resistivity_ohm_m);
    s.finish();
}

double read_damping(Section s, const ParticleSpec& particle, const Environment& env, Problems& pr) {
    const auto rad = s.get<double>("gamma_rad_per_s");
    const auto hz = s.get<double>("gamma_hz");
    const auto coeff = s.get<double>("coefficient_hz_per_mbar");
    const auto theory = s.get<bool>("from_theory");
    s.finish();
    const int given = (rad ? 1 : 0) + (hz ? 1 : 0) + (coeff ? 1 : 0) + (theory && *theory ? 1 : 0);
    if (given != 1) {
        pr.add(s.path() + ": give exactly one of gamma_rad_per_s, gamma_hz, coefficient_hz_per_mbar, from_theory");
        return 0.0;
    }
    if (rad) return *rad;
    if (hz) return 2.0 * constants::pi * *hz;
    if (coeff) return damping_rate_from_coefficient(*coeff, env).value;
    double g = 0.0;
    collect(pr, [&] { g = gas_damping_rate(particle, env).value; });
    return g;
}

void read_simulation(Section s, Section det, Section spec, Scenario& sc, Problems& pr) {
    auto& st = sc.simulate;
    auto& c = st.config;
    c.dt = s.required<double>("dt_s");
    c.duration = s.required<double>("duration_s");
    {
        auto init = s.sub("initial");
        const auto z = init.get<double>("z_m");
        const auto v = init.get<double>("v_m_per_s");
        const auto tk = init.get<double>("temperature_k");
        init.finish();
        if (tk && (z || v)) pr.add(init.path() + ": give either temperature_k or z_m/v_m_per_s");
        if (tk) c.initial = ThermalStart{*tk};
        else c.initial = OscState{z.value_or(0.0), v.value_or(0.0), 0.0};
    }
    {
        auto noise = s.sub("noise");
        if (auto t = noise.get<double>("thermal_k")) c.noise.push_back(ThermalNoise{*t});
        if (auto f = noise.get<double>("white_force_n2_per_hz")) c.noise.push_back(WhiteForceNoise{*f});
        if (auto d = noise.get<double>("displacement_m2_per_hz")) c.noise.push_back(DisplacementNoise{*d});
        noise.finish();
    }
    if (auto g = s.get<double>("feedback_gain_rad_per_s")) c.feedback = FeedbackConfig{*g};
    {
        auto drive = s.sub("drive");
        if (drive.present()) {
            DriveConfig d;
            d.force_amplitude_n = drive.required<double>("force_n");
            d.frequency_hz = drive.required<double>("frequency_hz");
            drive.read("phase_rad", d.phase_rad);
            c.drive = d;
        }
        drive.finish();
    }
    if (auto sched = s.raw("schedule"); sched.IsDefined() && !sched.IsNull()) {
        if (!sched.IsSequence()) {
            pr.add(s.path() + ".schedule: expected a list" + where(sched));
        } else {
            for (std::size_t i = 0; i < sched.size(); ++i) {
                Section seg(sched[i], s.path() + ".schedule[" + std::to_string(i) + "]", pr);
                Segment g;
                g.start_s = seg.required<double>("start_s");
                g.end_s = seg.required<double>("end_s");
                g.feedback = seg.get<bool>("feedback");
                g.drive = seg.get<bool>("drive");
                g.illumination = seg.get<bool>("illumination");
                seg.finish();
                c.schedule.push_back(g);
            }
        }
    }
    s.finish();

    if (auto a = det.get<double>("apd_alpha_v_per_m")) st.apd_alpha_v_per_m = a;
    det.read("readout_psd_v2_per_hz", st.readout_psd_v2_per_hz);
    det.read("energy_bin_s", st.energy_bin_s);
    det.finish();

    spec.read("psd_segment_samples", st.psd_segment_samples);
    spec.read("pll_cutoff_hz", st.pll_cutoff_hz);
    spec.read("allan_tau_min_s", st.allan_tau_min_s);
    spec.read("allan_tau_max_s", st.allan_tau_max_s);
    spec.read("allan_per_decade", st.allan_per_decade);
    spec.finish();
}

void read_ringup(Section s, protocols::RingupProtocol& p) {
    s.read("t_fb_k", p.t_fb_k);
    s.read("feedback_s", p.feedback_s);
    s.read("ringup_s", p.ringup_s);
    s.read("members", p.members);
    s.read("bin_s", p.bin_s);
    s.read("samples_per_period", p.samples_per_period);
    s.read("alpha_v_per_m", p.alpha_v_per_m);
    s.read("readout_psd_v2_per_hz", p.readout_psd);
    s.finish();
}

void read_heating(Section s, protocols::HeatingProtocol& p) {
    s.read("heating_rate_per_s", p.heating_rate);
    s.read("t_fb_k", p.t_fb_k);
    s.read("feedback_s", p.feedback_s);
    s.read("free_s", p.free_s);
    s.read("members", p.members);
    s.read("bin_s", p.bin_s);
    s.read("strobe_on_s", p.strobe_on_s);
    s.read("strobe_period_s", p.strobe_period_s);
    s.read("sample_rate_hz", p.sample_rate_hz);
    s.finish();
}

void read_ringdown(Section s, Section cam, protocols::RingdownProtocol& p) {
    s.read("a0_m", p.a0_m);
    s.read("cadence_s", p.cadence_s);
    s.read("span_s", p.span_s);
    s.read("exposure_s", p.exposure_s);
    s.read("samples_per_period", p.samples_per_period);
    s.read("intensity_noise", p.intensity_noise);
    s.read("delta_a_m", p.delta_a_m);
    s.read("amplitude_jitter_m", p.amplitude_jitter_m);
    s.finish();
    cam.read("n_pixels", p.optics.n_pixels);
    cam.read("metres_per_pixel", p.optics.metres_per_pixel);
    cam.read("center_px", p.optics.center_px);
    cam.read("w_px", p.optics.w_px);
    cam.read("i0", p.optics.i0);
    cam.read("b_per_px", p.optics.b_per_px);
    cam.read("c", p.optics.c);
    cam.finish();
}

void validate_scenario(const Scenario& sc, Problems& pr) {
    collect(pr, [&] { sc.particle.validate(); });
    collect(pr, [&] { sc.env.validate(); });
    check(pr, sc.gamma >= 0.0, "damping: gamma must be non-negative");
    switch (sc.pipeline) {
        case Pipeline::Simulate: {
            const auto& st = sc.simulate;
            collect(pr, [&] { st.config.validate(); });
            check(pr, !st.apd_alpha_v_per_m || *st.apd_alpha_v_per_m > 0.0, "detection.apd_alpha_v_per_m must be positive");
            check(pr, st.readout_psd_v2_per_hz >= 0.0, "detection.readout_psd_v2_per_hz must be non-negative");
            check(pr, st.energy_bin_s >= st.config.dt, "detection.energy_bin_s must be at least dt_s");
            check(pr, st.psd_segment_samples >= 8, "spectral.psd_segment_samples must be at least 8");
            check(pr, st.pll_cutoff_hz > 0.0, "spectral.pll_cutoff_hz must be positive");
            check(pr, st.allan_tau_min_s > 0.0 && st.allan_tau_max_s >= st.allan_tau_min_s,
                  "spectral: need 0 < allan_tau_min_s <= allan_tau_max_s");
            check(pr, st.allan_per_decade > 0, "spectral.allan_per_decade must be positive");
            break;
        }
        case Pipeline::Ringup: {
            const auto& p = sc.ringup;
            check(pr, p.t_fb_k > 0.0 && p.t_fb_k < sc.env.gas_temperature_k, "ringup.t_fb_k must lie in (0, T0)");
            check(pr, p.feedback_s >= p.bin_s, "ringup.feedback_s must cover at least one bin");
            check(pr, p.ringup_s > 0.0, "ringup.ringup_s must be positive");
            check(pr, p.members >= 1, "ringup.members must be at least 1");
            check(pr, p.bin_s > 0.0, "ringup.bin_s must be positive");
            check(pr, p.samples_per_period > 2.0, "ringup.samples_per_period must exceed 2");
            check(pr, p.alpha_v_per_m > 0.0, "ringup.alpha_v_per_m must be positive");
            check(pr, p.readout_psd >= 0.0, "ringup.readout_psd_v2_per_hz must be non-negative");
            break;
        }
        case Pipeline::Heating: {
            const auto& p = sc.heating;
            check(pr, p.t_fb_k > 0.0, "heating.t_fb_k must be positive");
            check(pr, p.feedback_s >= p.bin_s, "heating.feedback_s must cover at least one bin");
            check(pr, p.free_s > 0.0, "heating.free_s must be positive");
            check(pr, p.members >= 1, "heating.members must be at least 1");
            check(pr, p.bin_s > 0.0 && p.strobe_on_s > 0.0, "heating: bin_s and strobe_on_s must be positive");
            check(pr, p.strobe_period_s > p.strobe_on_s, "heating.strobe_period_s must exceed strobe_on_s");
            check(pr, p.sample_rate_hz > 0.0, "heating.sample_rate_hz must be positive");
            collect(pr, [&] { protocols::excess_force_psd(p); });
            break;
        }
        case Pipeline::Ringdown: {
            const auto& p = sc.ringdown;
            check(pr, p.a0_m > 0.0, "ringdown.a0_m must be positive");
            check(pr, p.cadence_s > p.exposure_s, "ringdown.cadence_s must exceed exposure_s");
            check(pr, p.span_s >= 2.0 * p.cadence_s, "ringdown.span_s must cover at least three frames");
            check(pr, p.exposure_s > 0.0, "ringdown.exposure_s must be positive");
            check(pr, p.samples_per_period > 2.0, "ringdown.samples_per_period must exceed 2");
            check(pr, p.intensity_noise >= 0.0, "ringdown.intensity_noise must be non-negative");
            check(pr, p.delta_a_m >= 0.0 && p.amplitude_jitter_m >= 0.0,
                  "ringdown: delta_a_m and amplitude_jitter_m must be non-negative");
            check(pr, p.optics.n_pixels >= 16, "camera.n_pixels must be at least 16");
            check(pr, p.optics.metres_per_pixel > 0.0, "camera.metres_per_pixel must be positive");
            check(pr, p.optics.w_px >= 4.0, "camera.w_px must be at least 4 pixels");
            const double reach = p.a0_m / p.optics.metres_per_pixel + 4.0 * p.optics.w_px;
            check(pr, p.optics.center_px - reach >= 0.0 && p.optics.center_px + reach <= p.optics.n_pixels - 1.0,
                  "camera: sensor does not cover the initial amplitude plus 4 w");
            break;
        }
    }
}

}  // namespace

Scenario parse_scenario(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("scenario is not valid YAML: ") + e.what());
    }
    if (!root.IsMap()) throw ConfigError("scenario must be a YAML mapping");
    Problems pr;
    Section top(root, "scenario", pr);
    Scenario sc;
    sc.name = top.required<std::string>("name");
    sc.seed = top.required<std::uint64_t>("seed");
    const auto pipeline = top.required<std::string>("pipeline");
    if (pipeline == "simulate") sc.pipeline = Pipeline::Simulate;
    else if (pipeline == "ringup") sc.pipeline = Pipeline::Ringup;
    else if (pipeline == "heating") sc.pipeline = Pipeline::Heating;
    else if (pipeline == "ringdown") sc.pipeline = Pipeline::Ringdown;
    else if (!pipeline.empty()) pr.add("scenario.pipeline: expected simulate, ringup, heating or ringdown");

    read_particle(top.sub("particle"), sc.particle, pr);
    read_environment(top.sub("environment"), sc.env);
    sc.gamma = read_damping(top.sub("damping"), sc.particle, sc.env, pr);

    // Only the block of the selected pipeline may appear.
    const std::vector<std::string> blocks{"simulation", "detection", "spectral", "ringup", "heating", "ringdown", "camera"};
    auto allowed = [&](const std::string& b) {
        switch (sc.pipeline) {
            case Pipeline::Simulate: return b == "simulation" || b == "detection" || b == "spectral";
            case Pipeline::Ringup: return b == "ringup";
            case Pipeline::Heating: return b == "heating";
            case Pipeline::Ringdown: return b == "ringdown" || b == "camera";
        }
        return false;
    };
    for (const auto& b : blocks)
        if (top.has(b) && !allowed(b)) pr.add("scenario." + b + ": not used by pipeline '" + pipeline + "'");
    switch (sc.pipeline) {
        case Pipeline::Simulate:
            if (!top.has("simulation")) pr.add("scenario.simulation: required for pipeline simulate");
            read_simulation(top.sub("simulation"), top.sub("detection"), top.sub("spectral"), sc, pr);
            break;
        case Pipeline::Ringup: read_ringup(top.sub("ringup"), sc.ringup); break;
        case Pipeline::Heating: read_heating(top.sub("heating"), sc.heating); break;
        case Pipeline::Ringdown: read_ringdown(top.sub("ringdown"), top.sub("camera"), sc.ringdown); break;
    }
    for (const auto& b : blocks) top.sub(b);  // mark as seen; misplaced ones were reported above

    if (auto est = top.raw("estimators"); est.IsDefined() && !est.IsNull()) {
        if (!est.IsSequence()) {
            pr.add("scenario.estimators: expected a list" + where(est));
        } else {
            const auto known = known_estimators(sc.pipeline);
            std::size_t last = 0;
            for (const auto& e : est) {
                const auto name = e.as<std::string>();
                const auto it = std::find(known.begin(), known.end(), name);
                if (it == known.end()) {
                    pr.add("scenario.estimators: '" + name + "' is not available for pipeline " + pipeline);
                    continue;
                }
                const auto idx = static_cast<std::size_t>(it - known.begin());
                if (!sc.estimators.empty() && idx <= last)
                    pr.add("scenario.estimators: '" + name + "' is out of order or repeated");
                last = idx;
                sc.estimators.push_back(name);
            }
        }
    }
    {
        auto out = top.sub("outputs");
        out.read("dir", sc.out_dir);
        out.finish();
    }
    top.finish();
    sc.sync();
    validate_scenario(sc, pr);
    if (!pr.list.empty()) {
        std::string msg = "scenario has " + std::to_string(pr.list.size()) + " problem(s):";
        for (const auto& p : pr.list) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
    return sc;
}

Scenario load_scenario(const std::string& path) { return parse_scenario(io::read_file(path)); }

// ------------------------------------------------------------------ output

bool RunResult::any_failed() const {
    return std::any_of(steps.begin(), steps.end(), [](const StepReport& s) { return !s.ok; });
}

const OutputFile* RunResult::file(const std::string& name) const {
    for (const auto& f : files)
        if (f.name == name) return &f;
    return nullptr;
}

std::string fit_to_csv(const FitResult& f) {
    std::string s = "# converged=" + std::string(f.converged ? "1" : "0") + "\n";
    s += "# degenerate=" + std::string(f.degenerate ? "1" : "0") + "\n";
    s += "# mse=" + io::format_double(f.mse) + "\n";
    s += "# mean_variance=" + io::format_double(f.mean_variance) + "\n";
    for (const auto& flag : f.flags) s += "# flag=" + flag + "\n";
    s += "name,value,sigma\n";
    for (const auto& p : f.parameters) s += p.name + "," + io::format_double(p.value) + "," + io::format_double(p.sigma) + "\n";
    return s;
}

std::string fit_output(const FitResult& f, Format format) {
    return format == Format::Json ? io::to_json(f).dump(2) + "\n" : fit_to_csv(f);
}

namespace {

std::string sci(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

}  // namespace

std::string fit_summary(const FitResult& f) {
    std::string s;
    for (const auto& p : f.parameters) s += "    " + p.name + " = " + sci(p.value, 6) + " +- " + sci(p.sigma, 3) + "\n";
    s += "    converged: " + std::string(f.converged ? "yes" : "no");
    if (f.degenerate) s += ", degenerate";
    for (const auto& fl : f.flags) s += ", flag " + fl;
    s += "\n";
    return s;
}

std::string comparison_table(const std::vector<ComparisonRow>& rows, Format format) {
    if (format == Format::Json) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : rows)
            j.push_back({{"key", r.key},           {"unit", r.unit},          {"reference", r.reference},
                         {"computed", r.computed}, {"deviation", r.deviation()}, {"tolerance", r.tolerance},
                         {"absolute", r.absolute}, {"status", to_string(r.status)}, {"locator", r.locator},
                         {"note", r.note}});
        return j.dump(2) + "\n";
    }
    std::string s = "key,unit,reference,computed,deviation,tolerance,status,locator,note\n";
    for (const auto& r : rows)
        s += r.key + "," + r.unit + "," + io::format_double(r.reference) + "," + io::format_double(r.computed) + "," +
             io::format_double(r.deviation()) + "," + io::format_double(r.tolerance) + (r.absolute ? " abs" : " rel") +
             "," + to_string(r.status) + ",\"" + r.locator + "\",\"" + r.note + "\"\n";
    return s;
}

namespace {

class Runner {
  public:
    Runner(const Scenario& s, Format f) : sc_(s), fmt_(f) {}

    bool wants(const std::string& e) const {
        return std::find(sc_.estimators.begin(), sc_.estimators.end(), e) != sc_.estimators.end();
    }

    void emit(std::string name, std::string content) { result_.files.push_back({std::move(name), std::move(content)}); }

    void emit_fit(const std::string& step, const FitResult& f) {
        emit(step + (fmt_ == Format::Json ? ".json" : ".csv"), fit_output(f, fmt_));
    }

    /// Runs one estimator step; failures are recorded, not propagated.
    template <class F>
    void step(const std::string& name, F&& f) {
        StepReport r{name, true, ""};
        try {
            r.message = f();
        } catch (const Error& e) {
            r.ok = false;
            r.message = e.what();
        }
        result_.steps.push_back(r);
        report_ += "  [" + std::string(r.ok ? "ok" : "FAILED") + "] " + name + "\n";
        if (!r.message.empty()) report_ += r.message;
        if (!r.ok) report_ += "    " + r.message + "\n";
    }

    /// Marks a step failed when its fit did not converge.
    static std::string fit_status(const FitResult& f) {
        if (!f.converged) throw Error("fit did not converge: " + f.message);
        if (f.degenerate) throw Error("fit is degenerate: " + f.message);
        return fit_summary(f);
    }

    RunResult run() {
        report_ = "scenario: " + sc_.name + "\n";
        report_ += "pipeline: " + std::string(to_string(sc_.pipeline)) + "\n";
        report_ += "seed: " + std::to_string(sc_.seed) + "\n";
        report_ += "true gamma: " + sci(sc_.gamma, 6) + " rad/s (" + sci(sc_.gamma / (2.0 * constants::pi), 6) + " Hz)\n";
        report_ += "estimators:" + std::string(sc_.estimators.empty() ? " none" : "") + "\n";
        switch (sc_.pipeline) {
            case Pipeline::Simulate: simulate(); break;
            case Pipeline::Ringup: ringup(); break;
            case Pipeline::Heating: heating(); break;
            case Pipeline::Ringdown: ringdown(); break;
        }
        emit("report.txt", report_);
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& f : result_.files) {
            h = io::fnv1a(f.name, h);
            h = io::fnv1a(std::string_view("\0", 1), h);
            h = io::fnv1a(f.content, h);
        }
        result_.hash = h;
        return std::move(result_);
    }

  private:
    void simulate() {
        const auto& st = sc_.simulate;
        const Trajectory tr = simulate_trajectory(st.config);
        emit("position.csv", io::trace_to_csv(tr.position, "z"));
        const double m = sc_.particle.mass_kg, w = sc_.env.omega();
        if (wants("energy_series"))
            step("energy_series", [&] {
                const auto e = to_thermal_units(energy_series(tr.position, st.energy_bin_s, m, w), sc_.env.gas_temperature_k);
                emit("energy.csv", io::trace_to_csv(e, "e"));
                double mean = 0.0;
                for (double v : e.values) mean += v;
                return "    mean energy = " + sci(mean / static_cast<double>(e.size())) + " k_B T0\n";
            });
        const double alpha = st.apd_alpha_v_per_m.value_or(1.0);
        TimeTrace detected = tr.position;
        if (wants("apd"))
            step("apd", [&] {
                detected = apd_trace(tr.position, alpha, st.readout_psd_v2_per_hz, derive_key(sc_.seed, 0xa9d0ULL));
                emit("apd.csv", io::trace_to_csv(detected, "u"));
                return std::string();
            });
        if (wants("psd"))
            step("psd", [&] {
                const auto p = psd(detected, st.psd_segment_samples);
                Series s{p.frequencies, p.density};
                const std::string unit = detected.unit == SeriesUnit::Volt ? "psd_v2_per_hz" : "psd_m2_per_hz";
                emit("psd.csv", io::series_to_csv(s, "f_hz", unit));
                return "    resolution = " + sci(p.resolution_hz) + " Hz\n";
            });
        std::optional<FrequencySeries> freq;
        if (wants("pll"))
            step("pll", [&] {
                freq = pll_extract(detected, sc_.env.secular_frequency_hz, st.pll_cutoff_hz);
                emit("frequency.csv", io::frequency_series_to_csv(*freq));
                return "    samples = " + std::to_string(freq->size()) + ", gaps = " + std::to_string(freq->gap_count()) + "\n";
            });
        if (wants("allan"))
            step("allan", [&] {
                if (!freq) throw Error("allan needs the pll step");
                const auto pts = allan_deviation(*freq, log_taus(st.allan_tau_min_s, st.allan_tau_max_s, st.allan_per_decade));
                emit("allan.csv", io::allan_to_csv(pts));
                const AllanPoint* best = nullptr;
                for (const auto& p : pts)
                    if (p.valid && (!best || p.sigma < best->sigma)) best = &p;
                if (!best) throw Error("no averaging time has two intervals");
                return "    minimum sigma = " + sci(best->sigma) + " at tau = " + sci(best->tau) + " s\n";
            });
        if (wants("drift_fit"))
            step("drift_fit", [&] {
                if (!freq) throw Error("drift_fit needs the pll step");
                const auto d = drift_fit(*freq);
                FitResult f;
                f.add("drift_hz_per_s", d.value, d.sigma);
                emit_fit("drift_fit", f);
                return fit_summary(f);
            });
    }

    void ringup() {
        const auto& p = sc_.ringup;
        const TimeTrace variance = protocols::ringup_variance(p);
        emit("variance.csv", io::trace_to_csv(variance, "var"));
        const double t0 = sc_.env.gas_temperature_k;
        std::optional<RingupCalibration> cal;
        if (wants("calibrate_ringup"))
            step("calibrate_ringup", [&] {
                cal = calibrate_ringup(variance, p.feedback_s, t0, sc_.particle.mass_kg, sc_.env.omega());
                emit_fit("calibrate_ringup", cal->fit);
                return fit_status(cal->fit) + "    alpha = " + sci(cal->calibration.alpha, 6) + " V/m (true " +
                       sci(p.alpha_v_per_m, 6) + ")\n";
            });
        if (wants("ringup_fit"))
            step("ringup_fit", [&] {
                if (!cal) throw Error("ringup_fit needs a successful calibrate_ringup step");
                const auto e = to_thermal_units(variance, cal->calibration);
                emit("energy.csv", io::trace_to_csv(e, "e"));
                const auto f = ringup_fit(e, p.t_fb_k, t0, p.feedback_s);
                emit_fit("ringup_fit", f);
                const double g = f.param("gamma").value;
                return fit_status(f) + "    recovered / true gamma = " + sci(g / sc_.gamma, 5) + "\n";
            });
    }

    void heating() {
        const auto& p = sc_.heating;
        auto out = protocols::heating_energies(p);
        emit("energy_continuous.csv", io::trace_to_csv(out.continuous_energy, "e"));
        emit("energy_stroboscopic.csv", io::trace_to_csv(out.stroboscopic_energy, "e"));
        report_ += "  T_fb from the feedback segment: " + sci(out.t_fb_measured_k, 5) + " K\n";
        auto run_fit = [&](const std::string& name, const TimeTrace& e, const std::vector<TimeTrace>& members) {
            step(name, [&] {
                const auto f = ensemble_heating_fit(e, members, sc_.env, out.t_fb_measured_k, p.feedback_s, out.member_t_fb_k);
                emit_fit(name, f);
                return fit_status(f) + "    recovered / true Gamma = " + sci(f.param("Gamma").value / p.heating_rate, 5) + "\n";
            });
        };
        if (wants("heating_fit")) run_fit("heating_fit", out.continuous_energy, out.continuous_members);
        if (wants("heating_fit_stroboscopic")) run_fit("heating_fit_stroboscopic", out.stroboscopic_energy, out.stroboscopic_members);
    }

    void ringdown() {
        const auto& p = sc_.ringdown;
        const auto out = protocols::ringdown_measurements(p);
        std::string csv = "t_s,a_m,z2_m2\n";
        for (std::size_t i = 0; i < out.times.size(); ++i)
            csv += io::format_double(out.times[i]) + "," + io::format_double(out.amplitudes_m[i]) + "," +
                   io::format_double(out.squared_amplitudes[i]) + "\n";
        emit("amplitudes.csv", csv);
        report_ += "  frames fitted: " + std::to_string(out.times.size()) + ", failed: " + std::to_string(out.failed_profiles) +
                   ", short exposures: " + std::to_string(out.short_exposures) + "\n";
        if (out.delta_a_measured_m) report_ += "  peak-separation delta a: " + sci(*out.delta_a_measured_m) + " m\n";
        std::optional<FitResult> fit;
        if (wants("ringdown_fit"))
            step("ringdown_fit", [&] {
                fit = ringdown_fit(out.times, out.squared_amplitudes, p.delta_a_m);
                emit_fit("ringdown_fit", *fit);
                emit("residuals.csv", io::residuals_to_csv(*fit));
                return fit_status(*fit) + "    recovered / true gamma = " + sci(fit->param("gamma").value / sc_.gamma, 5) + "\n";
            });
        if (wants("residual_mse"))
            step("residual_mse", [&] {
                if (!fit) throw Error("residual_mse needs the ringdown_fit step");
                const auto m = residual_mse(*fit, 2);
                std::string t = "mse,mean_variance,ratio,flagged\n";
                const double ratio = m.mean_variance > 0.0 ? m.mse / m.mean_variance : 0.0;
                t += io::format_double(m.mse) + "," + io::format_double(m.mean_variance) + "," + io::format_double(ratio) +
                     "," + (fit->flagged("model_misfit") ? "1" : "0") + "\n";
                emit("mse.csv", t);
                return "    MSE = " + sci(m.mse) + ", <sigma^2> = " + sci(m.mean_variance) + ", ratio = " + sci(ratio) +
                       (fit->flagged("model_misfit") ? " (model misfit)" : "") + "\n";
            });
    }

    const Scenario& sc_;
    Format fmt_;
    RunResult result_;
    std::string report_;
};

}  // namespace

RunResult run_scenario(const Scenario& s, Format format) { return Runner(s, format).run(); }

void write_outputs(const RunResult& r, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    std::string manifest;
    for (const auto& f : r.files) {
        io::write_file((std::filesystem::path(dir) / f.name).string(), f.content);
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(io::fnv1a(f.content)));
        manifest += std::string(buf) + "  " + f.name + "\n";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(r.hash));
    manifest += std::string(buf) + "  (all)\n";
    io::write_file((std::filesystem::path(dir) / "manifest.txt").string(), manifest);
}

}  // namespace levitrap::cli
