#pragma once

#include <numbers>

namespace nvreg {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2 * std::numbers::pi;

// Physical constants, SI.
inline constexpr double hbar = 1.054571817e-34;   // J s
inline constexpr double mu0_over_4pi = 1e-7;      // T m / A

// Gyromagnetic ratios (angular, rad / s / T).
inline constexpr double gamma_c13 = two_pi * 10.705e6;
inline constexpr double gamma_e = two_pi * 28.024e9;

// Diamond lattice.
inline constexpr double lattice_constant_nm = 0.357;
inline constexpr double lattice_unit_nm = lattice_constant_nm / 4;  // 0.08925

// Unit conversions at the I/O boundary.
inline constexpr double kHz2pi(double v) { return two_pi * 1e3 * v; }   // 2pi x kHz -> rad/s
inline constexpr double MHz2pi(double v) { return two_pi * 1e6 * v; }
inline constexpr double to_kHz2pi(double w) { return w / (two_pi * 1e3); }
inline constexpr double us(double v) { return 1e-6 * v; }

}  // namespace nvreg
