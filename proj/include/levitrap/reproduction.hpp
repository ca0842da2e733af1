#pragma once

// Recomputes the published closed-form numbers from their inputs and
// compares them with the reference registry.

#include <cmath>
#include <string>
#include <vector>

#include "levitrap/analysis.hpp"
#include "levitrap/detection.hpp"
#include "levitrap/physics.hpp"
#include "levitrap/protocols.hpp"
#include "levitrap/reference_values.hpp"

namespace levitrap {

/// The measured particle: 4.3e-17 kg, +300 e, f = 0.9. The sphere model uses
/// the two-sphere cluster radius, the dumbbell the single-sphere radius.
inline ParticleSpec reference_particle(Shape shape = Shape::Dumbbell) {
    ParticleSpec p;
    p.mass_kg = reference::get("mass").value;
    p.charge_e = 300;
    p.shape = shape;
    p.accommodation = reference::get("accommodation").value;
    p.surface_temperature_k = 300.0;
    p.radius_m = shape == Shape::Sphere ? cluster_equivalent_radius(150e-9, 2) : 150e-9;
    return p;
}

inline Environment reference_environment(double pressure_mbar = 0.0) {
    Environment e;
    e.set_pressure_mbar(pressure_mbar);
    e.gas_temperature_k = 300.0;
    e.gas_molecule_mass_kg = reference::get("gas_mass").value;
    e.secular_frequency_hz = reference::get("f_z").value;
    e.electrode_distance_m = reference::get("electrode_distance").value;
    e.electrode_resistivity_ohm_m = reference::get("electrode_resistivity").value;
    return e;
}

/// Relative 1-sigma assumed for the published pressures, which carry none.
inline constexpr double default_pressure_sigma = 0.3;

/// The four (pressure, gamma) pairs with their uncertainties.
inline std::pair<std::vector<Measured>, std::vector<Measured>> reference_pressure_points(
    double pressure_sigma = default_pressure_sigma) {
    std::vector<Measured> g, p;
    for (const char* k : {"P1", "P2", "P3", "P4"}) {
        const double v = reference::get(k).value;
        p.push_back({v, pressure_sigma * v});
    }
    for (const char* k : {"gamma_P1", "gamma_P2", "gamma_P3", "gamma_P4"}) {
        const auto& r = reference::get(k);
        g.push_back({r.value, r.sigma});
    }
    return {g, p};
}

// ------------------------------------------------- desk-scale protocols

/// Ring-up at P1: 400 x 10 s with feedback to 1 K during the first 0.5 s.
inline protocols::RingupProtocol reference_ringup(std::uint64_t seed = 1) {
    protocols::RingupProtocol p;
    p.particle = reference_particle();
    p.env = reference_environment(reference::get("P1").value);
    p.gamma = reference::get("gamma_P1").value;
    p.t_fb_k = reference::get("T_fb_ringup").value;
    p.feedback_s = reference::get("t_fb_ringup").value;
    p.seed = seed;
    return p;
}

/// Reheating at P4 with 3.3e4 phonons/s in total, from 0.8 K.
inline protocols::HeatingProtocol reference_heating(std::uint64_t seed = 1) {
    protocols::HeatingProtocol p;
    p.particle = reference_particle();
    p.env = reference_environment(reference::get("P4").value);
    p.gamma = reference::get("gamma_P4").value;
    p.heating_rate = reference::get("Gamma_bright").value;
    p.t_fb_k = reference::get("T_fb_heating").value;
    p.seed = seed;
    return p;
}

enum class RingdownPressure { P2, P3, P4 };

inline const char* to_string(RingdownPressure p) {
    switch (p) {
        case RingdownPressure::P2: return "P2";
        case RingdownPressure::P3: return "P3";
        case RingdownPressure::P4: return "P4";
    }
    return "?";
}

/// Camera ring-down at P2, P3 or P4. Frames every 5 min over 2 h, every
/// 30 min over 20 h and every 12 h over 14 days; the read-out scatter equals
/// the published amplitude uncertainty at that pressure.
inline protocols::RingdownProtocol reference_ringdown(RingdownPressure which, std::uint64_t seed = 1) {
    protocols::RingdownProtocol p;
    p.particle = reference_particle();
    const std::string tag = to_string(which);
    p.env = reference_environment(reference::get(tag).value);
    p.gamma = reference::get("gamma_" + tag).value;
    p.delta_a_m = reference::get("delta_a_" + tag).value;
    p.amplitude_jitter_m = p.delta_a_m;
    switch (which) {
        case RingdownPressure::P2: p.cadence_s = 300.0; p.span_s = 7200.0; break;
        case RingdownPressure::P3: p.cadence_s = 1800.0; p.span_s = 72000.0; break;
        case RingdownPressure::P4: p.cadence_s = 43200.0; p.span_s = 14.0 * 86400.0; break;
    }
    p.seed = seed;
    return p;
}

enum class RowStatus { Agree, Disagree, Flagged };

inline const char* to_string(RowStatus s) {
    switch (s) {
        case RowStatus::Agree: return "agree";
        case RowStatus::Disagree: return "DISAGREE";
        case RowStatus::Flagged: return "flagged";
    }
    return "?";
}

struct ComparisonRow {
    std::string key;
    std::string unit;
    double reference = 0.0;
    double computed = 0.0;
    double tolerance = 0.0;  // relative unless `absolute`
    bool absolute = false;
    RowStatus status = RowStatus::Agree;
    std::string locator;
    std::string note;

    double deviation() const {
        return absolute ? computed - reference : (computed - reference) / reference;
    }
};

inline ComparisonRow compare(std::string_view key, double computed, double tolerance,
                             bool absolute = false, std::string note = {}) {
    const auto& ref = reference::get(key);
    ComparisonRow r;
    r.key = std::string(key);
    r.unit = std::string(ref.unit);
    r.reference = ref.value;
    r.computed = computed;
    r.tolerance = tolerance;
    r.absolute = absolute;
    r.locator = std::string(ref.locator);
    r.note = std::move(note);
    r.status = std::abs(r.deviation()) <= tolerance ? RowStatus::Agree : RowStatus::Disagree;
    return r;
}

inline ComparisonRow flagged(std::string_view key, double computed, std::string note) {
    ComparisonRow r = compare(key, computed, 0.0, false, std::move(note));
    r.status = RowStatus::Flagged;
    return r;
}

/// Every closed-form comparison, with the tolerances used for acceptance.
inline std::vector<ComparisonRow> closed_form_rows() {
    std::vector<ComparisonRow> rows;
    const auto dumbbell = reference_particle(Shape::Dumbbell);
    const auto sphere = reference_particle(Shape::Sphere);
    const auto env = reference_environment(reference::get("P4").value);
    const auto& g4 = reference::get("gamma_P4");

    const auto q = quality_factor({g4.value, g4.sigma}, env);
    rows.push_back(compare("Q", q.q.value, 0.05));
    rows.push_back(compare("Qf", q.qf.value, 0.05));
    rows.push_back(compare("Gamma_gas", gas_heating_rate(units::Rate{g4.value}, env).value, 0.05));

    const auto nb = noise_budget(units::Rate{reference::get("Gamma_dark").value}, dumbbell, env);
    rows.push_back(compare("S_ff", nb.force_noise.value, 0.10));
    rows.push_back(compare("S_EE", nb.efield_noise->value, 0.10));
    rows.push_back(compare("S_v", nb.voltage_noise->value, 0.10));
    rows.push_back(compare("S_zz", nb.displacement_noise.value, 0.10));

    Environment surf = env;
    surf.electrode_distance_m = 0.9e-3;
    const auto sn = surface_efield_noise(surf, dumbbell);
    rows.push_back(compare("S_EE_surface", sn.efield_noise.value, 0.05));
    rows.push_back(flagged("Gamma_m", sn.implied_heating->value,
                           "q^2 S_EE / (4 m hbar Omega_z) from the quoted field noise; orders of magnitude apart"));

    rows.push_back(compare("a_th_sphere", gas_damping_coefficient(sphere, env).value, 0.03));
    rows.push_back(compare("a_th_dumbbell", gas_damping_coefficient(dumbbell, env).value, 0.03));

    rows.push_back(compare("sigma_thermal", thermal_allan_limit(reference::get("Q").value, env,
                                                                reference::get("tau_opt").value),
                           0.10));
    rows.push_back(flagged("collision_rate", collision_rate(dumbbell, env).value,
                           "flux n vbar / 4 over two-sphere area; order of magnitude only"));

    const auto [gammas, pressures] = reference_pressure_points();
    const auto tls = tls_pressure_fit(gammas, pressures);
    rows.push_back(compare("a_fit", tls.param("a").value, reference::get("a_fit").sigma, true,
                           "unit-slope log-space fit, pressure 1-sigma 30%"));
    rows.push_back(compare("rescale_example", rescale_factor(5.49, 1.0), 0.01));
    return rows;
}

}  // namespace levitrap
