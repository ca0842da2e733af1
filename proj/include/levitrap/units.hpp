#pragma once

#include <cmath>
#include <compare>

namespace levitrap {

// Compile-time dimensional analysis over (mass, length, time, temperature,
// current). Exponents are stored doubled so that square roots of spectral
// densities (e.g. V/sqrt(Hz)) stay representable.
template <int M2, int L2, int T2, int K2, int A2>
struct Quantity {
    double value = 0.0;

    constexpr Quantity() = default;
    constexpr explicit Quantity(double v) : value(v) {}

    constexpr Quantity& operator+=(Quantity o) { value += o.value; return *this; }
    constexpr Quantity& operator-=(Quantity o) { value -= o.value; return *this; }
    constexpr Quantity& operator*=(double s) { value *= s; return *this; }
    constexpr Quantity& operator/=(double s) { value /= s; return *this; }

    friend constexpr Quantity operator+(Quantity a, Quantity b) { return Quantity{a.value + b.value}; }
    friend constexpr Quantity operator-(Quantity a, Quantity b) { return Quantity{a.value - b.value}; }
    friend constexpr Quantity operator-(Quantity a) { return Quantity{-a.value}; }
    friend constexpr Quantity operator*(double s, Quantity a) { return Quantity{s * a.value}; }
    friend constexpr Quantity operator*(Quantity a, double s) { return Quantity{s * a.value}; }
    friend constexpr Quantity operator/(Quantity a, double s) { return Quantity{a.value / s}; }
    friend constexpr auto operator<=>(Quantity, Quantity) = default;
};

template <int M1, int L1, int T1, int K1, int A1, int M2, int L2, int T2, int K2, int A2>
constexpr auto operator*(Quantity<M1, L1, T1, K1, A1> a, Quantity<M2, L2, T2, K2, A2> b) {
    return Quantity<M1 + M2, L1 + L2, T1 + T2, K1 + K2, A1 + A2>{a.value * b.value};
}

template <int M1, int L1, int T1, int K1, int A1, int M2, int L2, int T2, int K2, int A2>
constexpr auto operator/(Quantity<M1, L1, T1, K1, A1> a, Quantity<M2, L2, T2, K2, A2> b) {
    return Quantity<M1 - M2, L1 - L2, T1 - T2, K1 - K2, A1 - A2>{a.value / b.value};
}

template <int M, int L, int T, int K, int A>
constexpr auto operator/(double s, Quantity<M, L, T, K, A> a) {
    return Quantity<-M, -L, -T, -K, -A>{s / a.value};
}

template <int M, int L, int T, int K, int A>
    requires(M % 2 == 0 && L % 2 == 0 && T % 2 == 0 && K % 2 == 0 && A % 2 == 0)
inline auto sqrt(Quantity<M, L, T, K, A> q) {
    return Quantity<M / 2, L / 2, T / 2, K / 2, A / 2>{std::sqrt(q.value)};
}

// Dimensionless quantities collapse to double.
constexpr double value_of(Quantity<0, 0, 0, 0, 0> q) { return q.value; }

namespace units {
// Doubled exponents: Quantity<2*kg, 2*m, 2*s, 2*K, 2*A>.
using Dimensionless = Quantity<0, 0, 0, 0, 0>;
using Mass = Quantity<2, 0, 0, 0, 0>;
using Length = Quantity<0, 2, 0, 0, 0>;
using Area = Quantity<0, 4, 0, 0, 0>;
using Time = Quantity<0, 0, 2, 0, 0>;
using Temperature = Quantity<0, 0, 0, 2, 0>;
using Current = Quantity<0, 0, 0, 0, 2>;
using Charge = Quantity<0, 0, 2, 0, 2>;
using Rate = Quantity<0, 0, -2, 0, 0>;         // 1/s, also rad/s and Hz
using Speed = Quantity<0, 2, -2, 0, 0>;
using Force = Quantity<2, 2, -4, 0, 0>;
using Energy = Quantity<2, 4, -4, 0, 0>;
using Action = Quantity<2, 4, -2, 0, 0>;        // J s
using Pressure = Quantity<2, -2, -4, 0, 0>;
using Voltage = Quantity<2, 4, -6, 0, -2>;
using EField = Quantity<2, 2, -6, 0, -2>;
using Resistivity = Quantity<2, 6, -6, 0, -4>;  // Ohm m
using HeatCapacity = Quantity<2, 4, -4, -2, 0>; // J/K
// One-sided spectral densities (per Hz, i.e. multiplied by a time).
using ForcePsd = Quantity<4, 4, -6, 0, 0>;
using EFieldPsd = Quantity<4, 4, -10, 0, -4>;
using VoltageAsd = Quantity<2, 4, -5, 0, -2>;   // V/sqrt(Hz)
using DisplacementPsd = Quantity<0, 4, 2, 0, 0>;
}  // namespace units

namespace constants {
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double boltzmann = 1.380649e-23;        // J/K
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double pa_per_mbar = 100.0;

inline constexpr units::HeatCapacity k_B{boltzmann};
inline constexpr units::Action h_bar{hbar};
inline constexpr units::Charge e_charge{elementary_charge};
}  // namespace constants

}  // namespace levitrap
