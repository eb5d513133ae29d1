#pragma once

#include <numbers>

namespace penning::constants {

// CODATA 2018 exact / recommended values, SI units.
inline constexpr double elementary_charge = 1.602176634e-19;
inline constexpr double hbar = 1.054571817e-34;
inline constexpr double boltzmann = 1.380649e-23;
inline constexpr double vacuum_permittivity = 8.8541878128e-12;
inline constexpr double atomic_mass_unit = 1.66053906660e-27;
inline constexpr double electron_mass_u = 5.48579909065e-4;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// 1 / (4 pi eps0), in V m / C.
inline constexpr double coulomb = 1.0 / (4.0 * pi * vacuum_permittivity);

/// Natural linewidth of the 9Be+ 2s S1/2 -> 2p P3/2 cooling transition (rad/s).
inline constexpr double beryllium_linewidth = two_pi * 18.0e6;

/// Cooling wavelength for 9Be+ (m).
inline constexpr double beryllium_wavelength = 313.0e-9;

}  // namespace penning::constants
