// levitrap command-line front end.
//
// Exit codes: 0 success, 2 validation error, 3 fit failure, 4 I/O or parse error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "scenario.hpp"

namespace fs = std::filesystem;
using namespace levitrap;
using levitrap::cli::Format;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 2;
constexpr int exit_fit = 3;
constexpr int exit_io = 4;

class FitFailure : public Error {
  public:
    using Error::Error;
};

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string format = "json";
};

Format format_of(const Globals& g) { return cli::parse_format(g.format); }

/// Writes to out_dir when given, otherwise prints to stdout.
void deliver(const Globals& g, const std::string& name, const std::string& content) {
    if (g.out_dir.empty()) {
        std::cout << content;
        if (!content.empty() && content.back() != '\n') std::cout << '\n';
        return;
    }
    std::error_code ec;
    fs::create_directories(g.out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + g.out_dir + "'");
    io::write_file((fs::path(g.out_dir) / name).string(), content);
    std::cout << "wrote " << (fs::path(g.out_dir) / name).string() << "\n";
}

std::string fit_name(const Globals& g, const std::string& stem) {
    return stem + (format_of(g) == Format::Json ? ".json" : ".csv");
}

void require_ok(const FitResult& f) {
    if (!f.converged) throw FitFailure("fit did not converge: " + f.message);
    if (f.degenerate) throw FitFailure("fit is degenerate: " + f.message);
}

/// Columns of a headed numeric CSV ("#" lines are comments).
std::map<std::string, std::vector<double>> read_table(const std::string& text) {
    std::map<std::string, std::vector<double>> cols;
    std::vector<std::string> names;
    std::size_t line_no = 0, pos = 0;
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = io::split_csv(line);
        if (names.empty()) {
            for (auto f : fields) names.emplace_back(f);
            continue;
        }
        if (fields.size() != names.size()) throw ParseError("wrong number of fields", line_no);
        for (std::size_t i = 0; i < fields.size(); ++i) cols[names[i]].push_back(io::parse_double(fields[i], line_no));
    }
    if (names.empty()) throw ParseError("missing header", line_no);
    for (const auto& n : names) cols[n];
    return cols;
}

const std::vector<double>& column(const std::map<std::string, std::vector<double>>& t, const std::string& name) {
    const auto it = t.find(name);
    if (it == t.end()) throw ParseError("missing column '" + name + "'", 1);
    return it->second;
}

std::optional<double> metadata(const std::string& text, const std::string& key) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        if (line.empty() || line.front() != '#') continue;
        line.remove_prefix(1);
        while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
        if (line.starts_with(key + "=")) return io::parse_double(line.substr(key.size() + 1), 0);
    }
    return std::nullopt;
}

std::map<std::string, std::string> read_header_map(const std::string& path) {
    std::map<std::string, std::string> m;
    if (path.empty()) return m;
    const auto t = io::read_file(path);
    std::size_t pos = 0, line_no = 0;
    while (pos < t.size()) {
        const std::size_t end = std::min(t.find('\n', pos), t.size());
        std::string_view line(t.data() + pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        const auto f = io::split_csv(line);
        if (f.size() != 2) throw ParseError("header map lines must read external,internal", line_no);
        m[std::string(f[0])] = std::string(f[1]);
    }
    return m;
}

IntensityProfile read_profile(const std::string& path) {
    const auto data = io::read_file(path);
    if (data.starts_with(io::profile_magic)) return io::profile_from_binary(data);
    return io::profile_from_csv(data);
}

std::string sci(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string closed_loop_summary(Format format) {
    std::vector<ComparisonRow> rows;
    {
        const auto p = reference_ringup();
        const auto out = protocols::run_ringup(p);
        auto r = compare("gamma_P1", out.fit.param("gamma").value, 0.25, false, "ring-up, 400 x 10 s, seed 1");
        rows.push_back(r);
    }
    for (auto w : {RingdownPressure::P2, RingdownPressure::P3, RingdownPressure::P4}) {
        const auto p = reference_ringdown(w);
        const auto out = protocols::run_ringdown(p);
        const auto& ref = reference::get("gamma_" + std::string(to_string(w)));
        rows.push_back(compare(ref.key, out.fit.param("gamma").value, ref.sigma / ref.value, false,
                               "camera ring-down, seed 1"));
    }
    {
        const auto p = reference_heating();
        const auto out = protocols::run_heating(p);
        rows.push_back(compare("Gamma_bright", out.continuous.param("Gamma").value, 0.10, false,
                               "continuous read-out, 100 x 200 s, seed 1"));
        const auto& dark = reference::get("Gamma_dark");
        rows.push_back(compare("Gamma_dark", out.stroboscopic.param("Gamma").value, dark.sigma / dark.value, false,
                               "stroboscopic read-out of the same ensemble"));
    }
    return cli::comparison_table(rows, format);
}

void print_rows(const std::vector<ComparisonRow>& rows) {
    std::printf("%-16s %12s %12s %10s  %-9s %s\n", "key", "reference", "computed", "deviation", "status", "unit");
    for (const auto& r : rows)
        std::printf("%-16s %12.4g %12.4g %+9.3g%s  %-9s %s\n", r.key.c_str(), r.reference, r.computed,
                    r.absolute ? r.deviation() : 100.0 * r.deviation(), r.absolute ? " " : "%", to_string(r.status), r.unit.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"levitrap: levitated-particle simulator and estimators"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "Scenario YAML file");
    app.add_option("--seed", g.seed, "Override the scenario seed");
    app.add_option("--out-dir", g.out_dir, "Directory for output files");
    app.add_option("--format", g.format, "Fit and table format")->check(CLI::IsMember({"csv", "json"}));

    int code = exit_ok;
    std::function<void()> action;

    auto* run = app.add_subcommand("run", "Run a scenario: simulate, detect, estimate");
    run->callback([&] {
        action = [&] {
            if (g.config.empty()) throw ConfigError("run needs --config");
            auto sc = cli::load_scenario(g.config);
            if (g.seed) {
                sc.seed = *g.seed;
                sc.sync();
            }
            const auto result = cli::run_scenario(sc, format_of(g));
            const std::string dir = !g.out_dir.empty() ? g.out_dir : !sc.out_dir.empty() ? sc.out_dir : "out/" + sc.name;
            cli::write_outputs(result, dir);
            std::cout << result.file("report.txt")->content;
            std::printf("output hash %016llx written to %s\n", static_cast<unsigned long long>(result.hash), dir.c_str());
            if (result.any_failed()) code = exit_fit;
        };
    });

    auto* sim = app.add_subcommand("simulate", "Run a scenario's simulation and detection only (no estimators)");
    sim->callback([&] {
        action = [&] {
            if (g.config.empty()) throw ConfigError("simulate needs --config");
            auto sc = cli::load_scenario(g.config);
            if (g.seed) {
                sc.seed = *g.seed;
                sc.sync();
            }
            sc.estimators.clear();
            const auto result = cli::run_scenario(sc, format_of(g));
            const std::string dir = !g.out_dir.empty() ? g.out_dir : "out/" + sc.name;
            cli::write_outputs(result, dir);
            std::printf("traces written to %s (hash %016llx)\n", dir.c_str(), static_cast<unsigned long long>(result.hash));
        };
    });

    std::string input;
    double delta_a = 0.0;
    auto* rd = app.add_subcommand("ringdown-fit", "Fit <z^2> = <z(0)^2> exp(-gamma t) in log space");
    rd->add_option("--input", input, "CSV with t_s and a_m (or z2_m2) columns")->required();
    rd->add_option("--delta-a-m", delta_a, "Amplitude uncertainty (m); 0 gives unit weights");
    rd->callback([&] {
        action = [&] {
            const auto t = read_table(io::read_file(input));
            std::vector<double> z2;
            if (t.count("z2_m2")) z2 = t.at("z2_m2");
            else for (double a : column(t, "a_m")) z2.push_back(a * a);
            const auto f = ringdown_fit(column(t, "t_s"), z2, delta_a);
            deliver(g, fit_name(g, "ringdown_fit"), cli::fit_output(f, format_of(g)));
            if (!g.out_dir.empty()) deliver(g, "residuals.csv", io::residuals_to_csv(f));
            std::cerr << "MSE " << sci(f.mse) << ", <sigma^2> " << sci(f.mean_variance)
                      << (f.flagged("model_misfit") ? " (model misfit)" : "") << "\n";
            require_ok(f);
        };
    });

    double t_fb_k = 0.0, t0_k = 300.0, t_origin = 0.0, f_z = 1.28e3;
    std::optional<double> heating_t_fb;
    auto* ru = app.add_subcommand("ringup-fit", "Fit the ring-up curve with T_fb fixed");
    ru->add_option("--input", input, "Energy trace CSV in units of k_B T0 (column <name>_kbt0)")->required();
    ru->add_option("--t-fb-k", t_fb_k, "Feedback temperature (K)")->required();
    ru->add_option("--t0-k", t0_k, "Bath temperature (K)");
    ru->add_option("--t-origin-s", t_origin, "Time at which feedback was switched off (s)");
    ru->callback([&] {
        action = [&] {
            const auto tr = io::trace_from_csv(io::read_file(input)).trace;
            const auto f = ringup_fit(tr, t_fb_k, t0_k, t_origin);
            deliver(g, fit_name(g, "ringup_fit"), cli::fit_output(f, format_of(g)));
            require_ok(f);
        };
    });

    auto* hf = app.add_subcommand("heating-fit", "Linear heating fit, slope converted to phonons/s");
    hf->add_option("--input", input, "Energy trace CSV in units of k_B T0")->required();
    hf->add_option("--t-fb-k", heating_t_fb, "Fix the intercept to T_fb / T0");
    hf->add_option("--t0-k", t0_k, "Bath temperature (K)");
    hf->add_option("--f-z-hz", f_z, "Secular frequency (Hz)");
    hf->add_option("--t-origin-s", t_origin, "Start of the free evolution (s)");
    hf->callback([&] {
        action = [&] {
            const auto tr = io::trace_from_csv(io::read_file(input)).trace;
            Environment env;
            env.gas_temperature_k = t0_k;
            env.secular_frequency_hz = f_z;
            const auto f = heating_fit(tr, env, heating_t_fb, t_origin);
            deliver(g, fit_name(g, "heating_fit"), cli::fit_output(f, format_of(g)));
            require_ok(f);
        };
    });

    double pressure_sigma = default_pressure_sigma;
    auto* tls = app.add_subcommand("tls-fit", "Unit-slope log-space fit of gamma / 2pi = a P");
    tls->add_option("--input", input,
                    "CSV with pressure_mbar, pressure_sigma_mbar, gamma_rad_per_s, gamma_sigma_rad_per_s; "
                    "defaults to the four published points");
    tls->add_option("--pressure-sigma", pressure_sigma, "Relative pressure 1-sigma for the published points");
    tls->callback([&] {
        action = [&] {
            std::vector<Measured> gam, pre;
            if (input.empty()) {
                std::tie(gam, pre) = reference_pressure_points(pressure_sigma);
            } else {
                const auto t = read_table(io::read_file(input));
                const auto& p = column(t, "pressure_mbar");
                const auto& ps = column(t, "pressure_sigma_mbar");
                const auto& gg = column(t, "gamma_rad_per_s");
                const auto& gs = column(t, "gamma_sigma_rad_per_s");
                for (std::size_t i = 0; i < p.size(); ++i) {
                    pre.push_back({p[i], ps[i]});
                    gam.push_back({gg[i], gs[i]});
                }
            }
            const auto f = tls_pressure_fit(gam, pre);
            deliver(g, fit_name(g, "tls_fit"), cli::fit_output(f, format_of(g)));
        };
    });

    std::optional<double> nominal;
    double tau_min = 1.0, tau_max = 100.0, t_total = 0.0;
    int per_decade = 10;
    auto* al = app.add_subcommand("allan", "Non-overlapping Allan deviation of a frequency series");
    al->add_option("--input", input, "CSV with t_s,f_hz[,valid] columns")->required();
    al->add_option("--nominal-hz", nominal, "Nominal frequency (default: '# nominal_hz=' metadata)");
    al->add_option("--tau-min-s", tau_min, "Shortest averaging time (s)");
    al->add_option("--tau-max-s", tau_max, "Longest averaging time (s)");
    al->add_option("--per-decade", per_decade, "Averaging times per decade");
    al->add_option("--total-time-s", t_total, "t_f for N = floor(t_f / tau); default the record length");
    al->callback([&] {
        action = [&] {
            const auto text = io::read_file(input);
            const auto t = read_table(text);
            FrequencySeries s;
            s.times = column(t, "t_s");
            s.frequencies = column(t, "f_hz");
            if (t.count("valid"))
                for (double v : t.at("valid")) s.valid.push_back(v != 0.0 ? 1 : 0);
            const auto nom = nominal ? nominal : metadata(text, "nominal_hz");
            if (!nom) throw ConfigError("allan needs --nominal-hz or '# nominal_hz=' metadata");
            s.nominal_hz = *nom;
            const auto pts = allan_deviation(s, log_taus(tau_min, tau_max, per_decade), t_total);
            deliver(g, "allan.csv", io::allan_to_csv(pts));
        };
    });

    double cutoff = 5.0;
    auto* pll = app.add_subcommand("pll", "Quadrature-demodulation frequency extraction and drift");
    pll->add_option("--input", input, "Position or APD trace CSV")->required();
    pll->add_option("--f-z-hz", f_z, "Reference frequency (Hz)")->required();
    pll->add_option("--cutoff-hz", cutoff, "Low-pass cut-off (Hz)");
    pll->callback([&] {
        action = [&] {
            const auto tr = io::trace_from_csv(io::read_file(input)).trace;
            const auto s = pll_extract(tr, f_z, cutoff);
            deliver(g, "frequency.csv", io::frequency_series_to_csv(s));
            const auto d = drift_fit(s);
            FitResult f;
            f.add("drift_hz_per_s", d.value, d.sigma);
            deliver(g, fit_name(g, "drift_fit"), cli::fit_output(f, format_of(g)));
        };
    });

    auto* pf = app.add_subcommand("profile-fit", "Fit the six-parameter intensity-profile model");
    pf->add_option("--input", input, "Profile CSV (position_m,intensity) or binary file")->required();
    pf->callback([&] {
        action = [&] {
            const auto prof = read_profile(input);
            const auto f = fit_profile(prof);
            auto fit = f.fit;
            fit.add("a_m", f.amplitude_m(), f.sigma.a * f.metres_per_pixel);
            if (f.d_model) fit.add("d_model_px", *f.d_model, 0.0);
            if (f.d_pf) fit.add("d_pf_px", *f.d_pf, 0.0);
            if (f.peak_error) fit.add("peak_error_px", *f.peak_error, 0.0);
            deliver(g, fit_name(g, "profile_fit"), cli::fit_output(fit, format_of(g)));
            require_ok(f.fit);
        };
    });

    double gamma_phonon = reference::get("Gamma_dark").value;
    ParticleSpec particle = reference_particle();
    Environment env = reference_environment(reference::get("P4").value);
    auto* nb = app.add_subcommand("noise-budget", "Force, field, voltage and displacement noise for a heating rate");
    nb->add_option("--heating-rate-per-s", gamma_phonon, "Phonon heating rate (1/s)");
    nb->add_option("--mass-kg", particle.mass_kg, "Particle mass (kg)");
    nb->add_option("--charge-e", particle.charge_e, "Charge (elementary charges)");
    nb->add_option("--f-z-hz", env.secular_frequency_hz, "Secular frequency (Hz)");
    nb->add_option("--electrode-distance-m", env.electrode_distance_m, "Particle-to-electrode distance (m)");
    nb->add_option("--resistivity-ohm-m", env.electrode_resistivity_ohm_m, "Electrode resistivity (Ohm m)");
    nb->add_option("--temperature-k", env.gas_temperature_k, "Electrode temperature (K)");
    nb->callback([&] {
        action = [&] {
            const auto b = noise_budget(units::Rate{gamma_phonon}, particle, env);
            const auto sn = surface_efield_noise(env, particle);
            nlohmann::json j;
            j["heating_rate_per_s"] = b.phonon_rate.value;
            j["S_ff_n2_per_hz"] = b.force_noise.value;
            j["S_EE_v2_per_m2_hz"] = b.efield_noise ? nlohmann::json(b.efield_noise->value) : nlohmann::json();
            j["S_v_v_per_sqrt_hz"] = b.voltage_noise ? nlohmann::json(b.voltage_noise->value) : nlohmann::json();
            j["S_zz_m2_per_hz"] = b.displacement_noise.value;
            j["provenance"] = std::vector<std::string>(b.provenance.begin(), b.provenance.end());
            j["surface_S_EE_v2_per_m2_hz"] = sn.efield_noise.value;
            j["surface_implied_heating_per_s"] = sn.implied_heating->value;
            if (format_of(g) == Format::Json) {
                deliver(g, "noise_budget.json", j.dump(2) + "\n");
            } else {
                std::string s = "quantity,value\n";
                for (const auto& [k, v] : j.items())
                    if (v.is_number()) s += k + "," + io::format_double(v.get<double>()) + "\n";
                deliver(g, "noise_budget.csv", s);
            }
        };
    });

    std::string shape = "both";
    std::optional<double> radius;
    auto* dt = app.add_subcommand("damping-theory", "Free-molecular damping coefficient a_th (Hz/mbar)");
    dt->add_option("--shape", shape, "sphere, dumbbell or both")->check(CLI::IsMember({"sphere", "dumbbell", "both"}));
    dt->add_option("--radius-m", radius, "Radius entering the drag formula (default: reference particle)");
    dt->add_option("--mass-kg", particle.mass_kg, "Particle mass (kg)");
    dt->add_option("--accommodation", particle.accommodation, "Momentum accommodation factor");
    dt->add_option("--surface-temperature-k", particle.surface_temperature_k, "Particle surface temperature (K)");
    dt->add_option("--gas-temperature-k", env.gas_temperature_k, "Gas temperature (K)");
    dt->add_option("--gas-mass-kg", env.gas_molecule_mass_kg, "Gas molecule mass (kg)");
    dt->callback([&] {
        action = [&] {
            const double mass_sigma = reference::get("mass").sigma * particle.mass_kg / reference::get("mass").value;
            nlohmann::json j = nlohmann::json::array();
            std::string csv = "shape,radius_m,a_hz_per_mbar,sigma_hz_per_mbar\n";
            for (auto s : {Shape::Sphere, Shape::Dumbbell}) {
                if (shape != "both" && (shape == "sphere") != (s == Shape::Sphere)) continue;
                ParticleSpec p = particle;
                p.shape = s;
                p.radius_m = radius ? *radius : reference_particle(s).radius_m;
                const auto a = gas_damping_coefficient(p, env, mass_sigma);
                const char* name = s == Shape::Sphere ? "sphere" : "dumbbell";
                j.push_back({{"shape", name}, {"radius_m", p.radius_m}, {"a_hz_per_mbar", a.value}, {"sigma", a.sigma}});
                csv += std::string(name) + "," + io::format_double(p.radius_m) + "," + io::format_double(a.value) + "," +
                       io::format_double(a.sigma) + "\n";
            }
            if (format_of(g) == Format::Json) deliver(g, "damping_theory.json", j.dump(2) + "\n");
            else deliver(g, "damping_theory.csv", csv);
        };
    });

    bool closed_form_only = false;
    auto* rp = app.add_subcommand("reproduce-paper", "Recompute the published numbers and compare");
    rp->alias("reproduce");
    rp->add_flag("--closed-form-only", closed_form_only, "Skip the desk-scale closed-loop runs");
    rp->callback([&] {
        action = [&] {
            const auto rows = closed_form_rows();
            print_rows(rows);
            deliver(g, format_of(g) == Format::Json ? "closed_form.json" : "closed_form.csv",
                    g.out_dir.empty() ? std::string() : cli::comparison_table(rows, format_of(g)));
            if (!closed_form_only) {
                const auto table = closed_loop_summary(format_of(g));
                deliver(g, format_of(g) == Format::Json ? "closed_loop.json" : "closed_loop.csv", table);
            }
        };
    });

    std::string kind = "trace", header_map, to = "csv";
    auto* im = app.add_subcommand("import", "Read an external trace or profile and write it in canonical form");
    im->add_option("--input", input, "File to import")->required();
    im->add_option("--kind", kind, "trace or profile")->check(CLI::IsMember({"trace", "profile"}));
    im->add_option("--header-map", header_map, "CSV lines 'external,internal' renaming trace columns");
    im->callback([&] {
        action = [&] {
            if (kind == "trace") {
                const auto t = io::trace_from_csv(io::read_file(input), read_header_map(header_map));
                std::cerr << "trace '" << t.name << "': " << t.trace.size() << " samples, dt " << sci(t.trace.dt)
                          << " s, unit " << unit_tag(t.trace.unit) << "\n";
                deliver(g, t.name + ".csv", io::trace_to_csv(t.trace, t.name));
            } else {
                const auto p = read_profile(input);
                std::cerr << "profile: " << p.size() << " pixels, " << sci(p.metres_per_pixel) << " m/pixel\n";
                deliver(g, "profile.csv", io::profile_to_csv(p));
            }
        };
    });

    auto* ex = app.add_subcommand("export", "Convert a canonical file to another representation");
    ex->add_option("--input", input, "Canonical trace or profile file")->required();
    ex->add_option("--kind", kind, "trace or profile")->check(CLI::IsMember({"trace", "profile"}));
    ex->add_option("--to", to, "csv, json (trace) or bin (profile)")->check(CLI::IsMember({"csv", "json", "bin"}));
    ex->callback([&] {
        action = [&] {
            if (kind == "trace") {
                const auto t = io::trace_from_csv(io::read_file(input));
                if (to == "bin") throw ConfigError("binary export exists for profiles only");
                if (to == "csv") {
                    deliver(g, t.name + ".csv", io::trace_to_csv(t.trace, t.name));
                } else {
                    nlohmann::json j{{"name", t.name}, {"t0_s", t.trace.t0}, {"dt_s", t.trace.dt},
                                     {"unit", unit_tag(t.trace.unit)}, {"values", t.trace.values}};
                    if (!t.trace.lit.empty()) j["lit"] = t.trace.lit;
                    deliver(g, t.name + ".json", j.dump() + "\n");
                }
            } else {
                const auto p = read_profile(input);
                if (to == "json") throw ConfigError("profiles export to csv or bin");
                if (to == "bin") {
                    if (g.out_dir.empty()) throw ConfigError("binary export needs --out-dir");
                    deliver(g, "profile.bin", io::profile_to_binary(p));
                } else {
                    deliver(g, "profile.csv", io::profile_to_csv(p));
                }
            }
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_validation;
    }
    try {
        if (action) action();
    } catch (const FitFailure& e) {
        std::cerr << "fit failure: " << e.what() << "\n";
        return exit_fit;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return exit_io;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return exit_io;
    } catch (const Error& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return exit_validation;
    }
    return code;
}
