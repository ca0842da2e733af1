#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "levitrap/error.hpp"

namespace levitrap {

/// Physical unit attached to a sampled series.
enum class SeriesUnit {
    Metre,
    MetrePerSecond,
    MetreSquared,
    Volt,
    VoltSquared,
    Joule,
    ThermalEnergy,  // energy in units of k_B T0
    Hertz,
    Dimensionless,
};

/// Column-name suffix used in CSV headers ("z_m", "u_v", "e_kbt0", ...).
inline std::string_view unit_tag(SeriesUnit u) {
    switch (u) {
        case SeriesUnit::Metre: return "m";
        case SeriesUnit::MetrePerSecond: return "m_per_s";
        case SeriesUnit::MetreSquared: return "m2";
        case SeriesUnit::Volt: return "v";
        case SeriesUnit::VoltSquared: return "v2";
        case SeriesUnit::Joule: return "j";
        case SeriesUnit::ThermalEnergy: return "kbt0";
        case SeriesUnit::Hertz: return "hz";
        case SeriesUnit::Dimensionless: return "1";
    }
    return "1";
}

inline std::optional<SeriesUnit> unit_from_tag(std::string_view tag) {
    for (auto u : {SeriesUnit::Metre, SeriesUnit::MetrePerSecond, SeriesUnit::MetreSquared,
                   SeriesUnit::Volt, SeriesUnit::VoltSquared, SeriesUnit::Joule,
                   SeriesUnit::ThermalEnergy, SeriesUnit::Hertz, SeriesUnit::Dimensionless}) {
        if (unit_tag(u) == tag) return u;
    }
    return std::nullopt;
}

/// Uniformly sampled scalar series. Samples with lit[i] == 0 were taken while
/// the detection was dark and carry no measurement; an empty mask means every
/// sample is lit.
struct TimeTrace {
    double t0 = 0.0;
    double dt = 1.0;
    std::vector<double> values;
    SeriesUnit unit = SeriesUnit::Dimensionless;
    std::vector<std::uint8_t> lit;

    std::size_t size() const noexcept { return values.size(); }
    bool empty() const noexcept { return values.empty(); }
    double time(std::size_t i) const noexcept { return t0 + static_cast<double>(i) * dt; }
    double duration() const noexcept { return static_cast<double>(values.size()) * dt; }
    bool is_lit(std::size_t i) const noexcept { return lit.empty() || lit[i] != 0; }
    bool all_lit() const noexcept {
        for (auto l : lit)
            if (!l) return false;
        return true;
    }

    void check() const {
        if (!(dt > 0.0)) throw InvalidInput("time trace: dt must be positive");
        if (!lit.empty() && lit.size() != values.size())
            throw InvalidInput("time trace: illumination mask length mismatch");
    }
};

/// Irregularly sampled series (estimator outputs, decimated frequencies).
struct Series {
    std::vector<double> times;
    std::vector<double> values;
    std::size_t size() const noexcept { return times.size(); }
};

/// A value with its 1-sigma uncertainty.
struct Measured {
    double value = 0.0;
    double sigma = 0.0;

    double relative() const { return value != 0.0 ? sigma / std::abs(value) : 0.0; }
};

}  // namespace levitrap
