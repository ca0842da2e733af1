#pragma once

// Published reference values of the UHV nanoparticle measurement, each with
// its 1-sigma (0 when only a rounded value was quoted) and a locator naming
// where in the publication it appears.

#include <array>
#include <optional>
#include <stdexcept>
#include <string_view>

#include "levitrap/units.hpp"

namespace levitrap {

struct ReferenceValue {
    std::string_view key;
    double value;
    double sigma;
    std::string_view unit;
    std::string_view locator;
};

namespace reference {

inline constexpr double two_pi = 2.0 * constants::pi;

inline constexpr std::array values{
    ReferenceValue{"mass", 4.3e-17, 0.4e-17, "kg", "measured particle mass"},
    ReferenceValue{"charge", 300.0, 30.0, "e", "particle charge"},
    ReferenceValue{"f_z", 1.28e3, 0.0, "Hz", "secular frequency"},
    ReferenceValue{"electrode_distance", 0.92e-3, 0.0, "m", "particle-to-electrode distance"},
    ReferenceValue{"P1", 1.2e-4, 0.0, "mbar", "ring-up pressure"},
    ReferenceValue{"P2", 5.4e-8, 0.0, "mbar", "first ring-down pressure"},
    ReferenceValue{"P3", 5e-9, 0.0, "mbar", "second ring-down pressure"},
    ReferenceValue{"P4", 7e-11, 0.0, "mbar", "lowest pressure"},
    ReferenceValue{"gamma_P1", two_pi * 37e-3, two_pi * 9e-3, "rad/s", "ring-up damping at P1"},
    ReferenceValue{"gamma_P2", two_pi * 59e-6, two_pi * 2e-6, "rad/s", "ring-down damping at P2"},
    ReferenceValue{"gamma_P3", two_pi * 5.9e-6, two_pi * 0.2e-6, "rad/s", "ring-down damping at P3"},
    ReferenceValue{"gamma_P4", two_pi * 69e-9, two_pi * 22e-9, "rad/s", "ring-down damping at P4"},
    ReferenceValue{"T_fb_ringup", 1.0, 0.0, "K", "feedback temperature of the P1 ring-up"},
    ReferenceValue{"t_fb_ringup", 0.5, 0.0, "s", "feedback switch-off time of the P1 ring-up"},
    ReferenceValue{"a_fit", 0.9e3, 0.2e3, "Hz/mbar", "damping-pressure coefficient from the log-space fit"},
    ReferenceValue{"Q", 1.8e10, 0.6e10, "1", "quality factor at P4"},
    ReferenceValue{"Qf", 2.4e13, 0.7e13, "Hz", "Q-frequency product at P4"},
    ReferenceValue{"Gamma_gas", 2.1e3, 0.0, "1/s", "gas heating rate predicted from gamma_P4"},
    ReferenceValue{"Gamma_bright", 3.3e4, 0.2e4, "1/s", "heating rate with continuous illumination"},
    ReferenceValue{"Gamma_dark", 3.1e4, 0.8e4, "1/s", "heating rate with stroboscopic illumination"},
    ReferenceValue{"T_fb_heating", 0.8, 0.0, "K", "initial temperature of the heating runs"},
    ReferenceValue{"S_ff", 4e-42, 0.0, "N^2/Hz", "force noise from the dark heating rate"},
    ReferenceValue{"S_EE", 1.7e-9, 0.0, "(V/m)^2/Hz", "electric-field noise"},
    ReferenceValue{"S_v", 38e-9, 0.0, "V/sqrt(Hz)", "equivalent electrode voltage noise"},
    ReferenceValue{"S_zz", 9.5e-26, 0.0, "m^2/Hz", "equivalent displacement noise"},
    ReferenceValue{"S_zz_measured", 2e-25, 0.0, "m^2/Hz", "vibration PSD measured at the chamber"},
    ReferenceValue{"collision_rate", 1.1e3, 0.0, "1/s", "calculated gas collision rate at P4"},
    ReferenceValue{"sigma_opt", 2e-6, 0.0, "1", "measured Allan deviation minimum"},
    ReferenceValue{"tau_opt", 20.0, 0.0, "s", "optimum averaging time"},
    ReferenceValue{"sigma_thermal", 2e-8, 0.0, "1", "thermally limited Allan deviation at tau_opt"},
    ReferenceValue{"drift_rate", 8e-8, 0.0, "Hz/s", "linear frequency drift at P4"},
    ReferenceValue{"a_th_sphere", 107.0, 10.0, "Hz/mbar", "free-molecular damping of the equivalent sphere"},
    ReferenceValue{"a_th_dumbbell", 127.0, 12.0, "Hz/mbar", "free-molecular damping of the spherocylinder"},
    ReferenceValue{"S_EE_surface", 3.1e-19, 0.0, "(V/m)^2/Hz", "Johnson-noise field of the electrodes"},
    ReferenceValue{"Gamma_m", 163.0, 0.0, "1/s", "heating attributed to electrode Johnson noise"},
    ReferenceValue{"electrode_resistivity", 6.9e-7, 0.0, "Ohm m", "electrode resistivity"},
    ReferenceValue{"gas_mass", 3.34e-27, 0.0, "kg", "molecular hydrogen mass"},
    ReferenceValue{"accommodation", 0.9, 0.0, "1", "momentum accommodation factor"},
    ReferenceValue{"delta_a_P2", 3.9e-6, 0.0, "m", "camera amplitude uncertainty at P2"},
    ReferenceValue{"delta_a_P3", 3.2e-6, 0.0, "m", "camera amplitude uncertainty at P3"},
    ReferenceValue{"delta_a_P4", 1.9e-6, 0.0, "m", "camera amplitude uncertainty at P4"},
    ReferenceValue{"mean_variance_P2", 0.004, 0.0, "1", "residual table, P2 mean variance"},
    ReferenceValue{"mse_P2", 0.003, 0.0, "1", "residual table, P2 MSE"},
    ReferenceValue{"mean_variance_P3", 0.004, 0.0, "1", "residual table, P3 mean variance"},
    ReferenceValue{"mse_P3", 0.006, 0.0, "1", "residual table, P3 MSE"},
    ReferenceValue{"mean_variance_P4", 0.001, 0.0, "1", "residual table, P4 mean variance"},
    ReferenceValue{"mse_P4", 0.025, 0.0, "1", "residual table, P4 MSE"},
    ReferenceValue{"rescale_example", 30.1, 0.0, "1", "drive-tone rescaling factor from A' = 5.49"},
    ReferenceValue{"gamma_ringup_hv", two_pi * 311e-3, two_pi * 8e-3, "rad/s", "high-vacuum ring-up damping"},
    ReferenceValue{"T_fb_ringup_hv", 0.1, 0.0, "K", "high-vacuum ring-up feedback temperature"},
};

constexpr std::optional<ReferenceValue> find(std::string_view key) {
    for (const auto& v : values)
        if (v.key == key) return v;
    return std::nullopt;
}

/// Throws std::invalid_argument for an unknown key.
inline const ReferenceValue& get(std::string_view key) {
    for (const auto& v : values)
        if (v.key == key) return v;
    throw std::invalid_argument("unknown reference value");
}

}  // namespace reference
}  // namespace levitrap
