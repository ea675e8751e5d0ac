#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

#include "optomech/model.hpp"

// Frequency-domain linear response: complex susceptibilities and the
// input-noise -> dynamical-variable transduction coefficients for each pump
// regime. Two independent routes are provided: the regime-specific closed
// forms, and a generic solver that builds the 4x4 equations of motion and
// solves them per frequency with no regime shortcuts.
//
// Frame conventions (fixed project-wide):
//  - single-tone regimes: mechanics in the lab frame, cavity in the frame
//    rotating with the pump; spectra are two-sided with peaks at +/- omega_m.
//  - TwoToneBAE: everything in rotating quadrature frames; spectra peak at
//    zero frequency.
namespace optomech {

using Complex = std::complex<double>;

// 1/(rate/2 - i omega): first-order susceptibility (chi_m, chi_c).
Complex chi_first_order(double omega, double rate);

// 1/((rate/2 - i omega)^2 + omega_m^2): the oscillator kernel chi_m'
// (chi_e' when called with gamma_eff).
Complex chi_oscillator(double omega, double rate, double omega_m);

struct SusceptibilitySamples {
  std::vector<double> omega;       // rad/s
  std::vector<Complex> chi_m;      // mechanics, first order
  std::vector<Complex> chi_c;      // cavity, first order
  std::vector<Complex> chi_m_prime;  // oscillator kernel at intrinsic gamma
  std::vector<Complex> chi_e_prime;  // oscillator kernel at gamma_eff
};

SusceptibilitySamples susceptibilities(const SystemParams& p, double gamma_eff,
                                       std::span<const double> omega);

// Row (dynamical variable) and column (input noise channel) labels of a
// transduction set. Mech rows mean (x, p) in the lab frame for single-tone
// regimes and (X, P) quadratures for TwoToneBAE.
enum OutputVar : int {
  kMechPos = 0,
  kMechMom = 1,
  kCavX = 2,
  kCavP = 3,
  kCavPOut = 4,  // field leaving the external port
  kNumOutputs = 5,
};

enum InputChannel : int {
  kMechPosIn = 0,
  kMechMomIn = 1,
  kCavXExtIn = 2,
  kCavPExtIn = 3,
  kCavXIntIn = 4,
  kCavPIntIn = 5,
  kNumInputs = 6,
};

// White spectral density 1/2 + n_z^T of each input channel, in quanta.
// The cavity external bath is at zero temperature; the mechanical
// occupation can be overridden (cooling-tone operation replaces the bath
// occupation by the mode occupation).
struct NoiseDensities {
  std::array<double, kNumInputs> density{};

  static NoiseDensities from_baths(const BathState& baths);
  static NoiseDensities with_mech_occupation(double n_mech, const BathState& baths);
};

// Complex transduction coefficients at one frequency. Closed forms fill
// only the rows the appendix forms define (row_defined); the generic
// solver fills everything.
struct TransductionSet {
  Regime regime = Regime::BadCavitySingleTone;
  double omega = 0.0;
  std::array<std::array<Complex, kNumInputs>, kNumOutputs> coeff{};
  std::array<bool, kNumOutputs> row_defined{};

  Complex operator()(OutputVar o, InputChannel i) const { return coeff[o][i]; }
};

struct BaeOptions {
  // The closed form replaces chi_c by its on-resonance value 2/kappa.
  // Setting this keeps chi_c exact, which makes the closed form agree with
  // the generic solver to machine precision.
  bool exact_cavity_susceptibility = false;
};

// Resonant single-tone pumping of an unresolved-sideband cavity (Delta = 0).
TransductionSet transduction_bad_cavity(double omega, const SystemParams& p, double G);

// Red-sideband pumping of a resolved-sideband cavity (Delta = -omega_m).
// Mechanical susceptibilities carry gamma_eff = gamma + 4G^2/kappa. The
// momentum backaction row is reconstructed by the x<->p symmetry of the
// bad-cavity forms (omega <-> omega_m swap); only its magnitude is
// meaningful and it is validated against the generic solver.
TransductionSet transduction_good_cavity(double omega, const SystemParams& p, double G);

// Two-tone backaction-evading pumping; rotating quadrature frame.
// X couples to no cavity input: it is a constant of motion.
TransductionSet transduction_bae(double omega, const SystemParams& p, double G,
                                 BaeOptions opts = {});

// Dispatch by regime; throws std::invalid_argument for an unknown value.
TransductionSet transduction_closed_form(Regime regime, double omega,
                                         const SystemParams& p, double G,
                                         BaeOptions opts = {});

// Builds the full 4x4 frequency-domain system (cavity + mechanics
// quadratures) for the regime and solves it per frequency. No
// approximations: chi_c stays exact and no rotating-wave terms are
// dropped beyond those defining the regime's Hamiltonian.
// Throws std::runtime_error if the system matrix is singular.
TransductionSet solve_linear_response(Regime regime, double omega,
                                      const SystemParams& p, double G);

// Output-basis rotation by the BAE pump phase difference theta: the
// detected cavity quadrature becomes X_c^theta = X_c cos(theta) +
// P_c sin(theta). Mechanics rows are untouched.
TransductionSet rotate_cavity_quadratures(const TransductionSet& set, double theta,
                                          const SystemParams& p);

// S_v(omega) = sum over channels |T_(v,ch)|^2 * density(ch).
double assemble_spectrum(const TransductionSet& set, OutputVar v,
                         const NoiseDensities& noise);

}  // namespace optomech
