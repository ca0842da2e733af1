#pragma once

// Kinetic-theory damping, quality factor, heating rates and the conversion
// chain between a phonon heating rate and equivalent force, electric-field,
// voltage and displacement noise. All inputs are SI; mbar and Hz appear only
// in the names of boundary helpers.

#include <array>
#include <cmath>
#include <optional>
#include <string_view>

#include "levitrap/error.hpp"
#include "levitrap/time_trace.hpp"
#include "levitrap/units.hpp"

namespace levitrap {

enum class Shape { Sphere, Dumbbell };

struct ParticleSpec {
    double mass_kg = 4.3e-17;
    double radius_m = 150e-9;  // radius entering the drag formula (r_s or r_c)
    int charge_e = 300;        // signed count of elementary charges
    Shape shape = Shape::Sphere;
    double accommodation = 0.9;
    double surface_temperature_k = 300.0;

    double charge_c() const { return charge_e * constants::elementary_charge; }

    void validate() const {
        if (!(mass_kg > 0.0)) throw InvalidInput("particle mass must be positive");
        if (!(radius_m > 0.0)) throw InvalidInput("particle radius must be positive");
        if (!(accommodation >= 0.0 && accommodation <= 1.0))
            throw InvalidInput("accommodation factor must lie in [0, 1]");
        if (!(surface_temperature_k > 0.0))
            throw InvalidInput("surface temperature must be positive");
    }
};

struct Environment {
    double pressure_pa = 0.0;
    double gas_temperature_k = 300.0;
    double gas_molecule_mass_kg = 3.34e-27;  // molecular hydrogen
    double secular_frequency_hz = 1.28e3;
    double electrode_distance_m = 0.92e-3;
    double electrode_resistivity_ohm_m = 6.9e-7;

    double omega() const { return 2.0 * constants::pi * secular_frequency_hz; }
    double pressure_mbar() const { return pressure_pa / constants::pa_per_mbar; }
    Environment& set_pressure_mbar(double p) {
        pressure_pa = p * constants::pa_per_mbar;
        return *this;
    }

    void validate() const {
        if (!(pressure_pa >= 0.0)) throw InvalidInput("pressure must be non-negative");
        if (!(gas_temperature_k > 0.0)) throw InvalidInput("gas temperature must be positive");
        if (!(secular_frequency_hz > 0.0))
            throw InvalidInput("secular frequency must be positive");
        if (!(electrode_distance_m > 0.0))
            throw InvalidInput("electrode distance must be positive");
    }
};

/// Radius of a single sphere holding the volume of n equal spheres of radius R.
inline double cluster_equivalent_radius(double radius_m, int n_spheres = 2) {
    if (!(radius_m > 0.0) || n_spheres < 1) throw InvalidInput("cluster radius: bad input");
    return std::cbrt(static_cast<double>(n_spheres)) * radius_m;
}

inline units::Speed mean_gas_speed(const Environment& env) {
    if (!(env.gas_temperature_k > 0.0) || !(env.gas_molecule_mass_kg > 0.0))
        throw InvalidInput("mean gas speed: temperature and molecule mass must be positive");
    using constants::boltzmann, constants::pi;
    return units::Speed{std::sqrt(8.0 * boltzmann * env.gas_temperature_k /
                                  (pi * env.gas_molecule_mass_kg))};
}

namespace detail {

// Dimensionless drag prefactors K such that gamma = c * K * r^2 P / (m vbar)
// with c = 4/3 for the sphere and c = 4 for the spherocylinder (P in Pa).
inline double sphere_drag_factor(double f, double ts_over_t) {
    return 8.0 + constants::pi * f * std::sqrt(ts_over_t);
}

inline double spherocylinder_drag_factor(double f, double ts_over_t, double sin2_theta) {
    const double caps = sphere_drag_factor(f, ts_over_t) / 3.0;
    const double side = f + (2.0 - (6.0 - constants::pi) / 4.0 * f) * sin2_theta;
    return caps + 2.0 * side;
}

}  // namespace detail

/// Free-molecular-flow damping rate gamma (rad/s) at the environment pressure.
/// The dumbbell is a spherocylinder with L = 2 r_c; `sin2_theta` is the
/// orientation factor (1/2 is the isotropic average).
inline units::Rate gas_damping_rate(const ParticleSpec& p, const Environment& env,
                                    double sin2_theta = 0.5) {
    p.validate();
    env.validate();
    const double vbar = mean_gas_speed(env).value;
    const double ratio = p.surface_temperature_k / env.gas_temperature_k;
    const double r2 = p.radius_m * p.radius_m;
    const double scale = r2 * env.pressure_pa / (p.mass_kg * vbar);
    switch (p.shape) {
        case Shape::Sphere:
            return units::Rate{4.0 / 3.0 * detail::sphere_drag_factor(p.accommodation, ratio) *
                               scale};
        case Shape::Dumbbell:
            if (!(sin2_theta >= 0.0 && sin2_theta <= 1.0))
                throw InvalidInput("sin^2(theta) must lie in [0, 1]");
            return units::Rate{
                4.0 * detail::spherocylinder_drag_factor(p.accommodation, ratio, sin2_theta) *
                scale};
    }
    throw InvalidInput("unknown particle shape");
}

/// Damping coefficient a_th in Hz/mbar (gamma / 2pi = a_th P). The 1-sigma
/// comes from the particle-mass uncertainty only.
inline Measured gas_damping_coefficient(const ParticleSpec& p, const Environment& env,
                                        double mass_sigma_kg = 0.0, double sin2_theta = 0.5) {
    Environment at_one_mbar = env;
    at_one_mbar.set_pressure_mbar(1.0);
    const double a = gas_damping_rate(p, at_one_mbar, sin2_theta).value / (2.0 * constants::pi);
    return {a, a * mass_sigma_kg / p.mass_kg};
}

/// Converts a coefficient in Hz/mbar back to an angular damping rate.
inline units::Rate damping_rate_from_coefficient(double a_hz_per_mbar, const Environment& env) {
    return units::Rate{2.0 * constants::pi * a_hz_per_mbar * env.pressure_mbar()};
}

struct QualityFactor {
    Measured q;   // Omega_z / gamma
    Measured qf;  // Q f_z in Hz
};

/// Q and the Q-frequency product with first-order error propagation.
inline QualityFactor quality_factor(Measured gamma, const Environment& env,
                                    double frequency_sigma_hz = 0.0) {
    env.validate();
    if (!(gamma.value > 0.0)) throw InvalidInput("quality factor undefined for gamma <= 0");
    const double fz = env.secular_frequency_hz;
    const double q = env.omega() / gamma.value;
    const double rg = gamma.sigma / gamma.value;
    const double rf = frequency_sigma_hz / fz;
    return {{q, q * std::hypot(rg, rf)}, {q * fz, q * fz * std::hypot(rg, 2.0 * rf)}};
}

/// Phonon heating rate of a thermal bath at T0 acting through damping gamma.
inline units::Rate gas_heating_rate(units::Rate gamma, const Environment& env) {
    env.validate();
    if (gamma.value < 0.0) throw InvalidInput("gamma must be non-negative");
    using namespace constants;
    const units::Temperature t0{env.gas_temperature_k};
    const units::Rate omega{env.omega()};
    return k_B * t0 * gamma / (h_bar * omega);
}

struct NoiseBudget {
    units::Rate phonon_rate;
    units::ForcePsd force_noise;
    std::optional<units::EFieldPsd> efield_noise;  // absent for an uncharged particle
    std::optional<units::VoltageAsd> voltage_noise;
    units::DisplacementPsd displacement_noise;

    static constexpr std::array<std::string_view, 4> provenance{
        "S_ff = 4 m hbar Omega_z Gamma",
        "S_EE = S_ff / q^2",
        "S_v = d sqrt(S_EE)",
        "S_zz = 2 hbar Gamma / (pi m Omega_z^3)",
    };
};

/// Equivalent one-sided noise spectra for a white-noise heating rate.
inline NoiseBudget noise_budget(units::Rate heating, const ParticleSpec& p, const Environment& env) {
    p.validate();
    env.validate();
    if (heating.value < 0.0) throw InvalidInput("heating rate must be non-negative");
    using namespace constants;
    const units::Mass m{p.mass_kg};
    const units::Rate omega{env.omega()};
    NoiseBudget nb;
    nb.phonon_rate = heating;
    nb.force_noise = 4.0 * m * h_bar * omega * heating;
    nb.displacement_noise = 2.0 * h_bar * heating / (pi * m * omega * omega * omega);
    if (p.charge_e != 0) {
        const units::Charge q{p.charge_c()};
        const units::EFieldPsd see = nb.force_noise / (q * q);
        nb.efield_noise = see;
        nb.voltage_noise = units::Length{env.electrode_distance_m} * sqrt(see);
    }
    return nb;
}

/// Inverse of the S_ff relation: Gamma = S_ff / (4 m hbar Omega_z).
inline units::Rate heating_from_force_noise(units::ForcePsd sff, const ParticleSpec& p,
                                            const Environment& env) {
    using namespace constants;
    const units::Mass m{p.mass_kg};
    const units::Rate omega{env.omega()};
    return sff / (4.0 * m * h_bar * omega);
}

/// Gamma = q^2 S_EE / (4 m hbar Omega_z).
inline units::Rate heating_from_efield_noise(units::EFieldPsd see, const ParticleSpec& p,
                                             const Environment& env) {
    const units::Charge q{p.charge_c()};
    return heating_from_force_noise(q * q * see, p, env);
}

struct SurfaceNoise {
    units::EFieldPsd efield_noise;
    std::optional<units::Rate> implied_heating;
};

/// Johnson noise of a resistive half-space at distance d: S_EE = k_B T rho / (4 pi d^3).
inline SurfaceNoise surface_efield_noise(const Environment& env,
                                         const std::optional<ParticleSpec>& particle = {}) {
    env.validate();
    if (!(env.electrode_resistivity_ohm_m > 0.0))
        throw InvalidInput("electrode resistivity must be positive");
    const double d = env.electrode_distance_m;
    SurfaceNoise out;
    out.efield_noise = units::EFieldPsd{constants::boltzmann * env.gas_temperature_k *
                                        env.electrode_resistivity_ohm_m /
                                        (4.0 * constants::pi * d * d * d)};
    if (particle) out.implied_heating = heating_from_efield_noise(out.efield_noise, *particle, env);
    return out;
}

/// Gas-molecule impact rate: (n vbar / 4) times the exposed area, with the
/// dumbbell counted as two spheres of radius r_c.
inline units::Rate collision_rate(const ParticleSpec& p, const Environment& env) {
    p.validate();
    env.validate();
    const double n = env.pressure_pa / (constants::boltzmann * env.gas_temperature_k);
    const double sphere_area = 4.0 * constants::pi * p.radius_m * p.radius_m;
    double area = 0.0;
    switch (p.shape) {
        case Shape::Sphere: area = sphere_area; break;
        case Shape::Dumbbell: area = 2.0 * sphere_area; break;
    }
    return units::Rate{n * mean_gas_speed(env).value / 4.0 * area};
}

/// Thermally limited fractional frequency stability 1/sqrt(Q Omega_z tau).
inline double thermal_allan_limit(double q, const Environment& env, double tau_s) {
    if (!(q > 0.0) || !(tau_s > 0.0)) throw InvalidInput("thermal Allan limit: Q and tau must be positive");
    return 1.0 / std::sqrt(q * env.omega() * tau_s);
}

}  // namespace levitrap
