#pragma once

#include <numbers>

// Physical constants (CODATA 2018). All project code takes h-bar and k_B
// from here; no other file may define its own copies.
namespace optomech::constants {

inline constexpr double pi = std::numbers::pi_v<double>;
inline constexpr double two_pi = 2.0 * pi;

// Planck constant [J s] (exact by SI definition).
inline constexpr double planck = 6.62607015e-34;

// Reduced Planck constant [J s].
inline constexpr double hbar = planck / two_pi;

// Boltzmann constant [J/K] (exact by SI definition).
inline constexpr double boltzmann = 1.380649e-23;

}  // namespace optomech::constants
