#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Device parameters, pump schemes, bath occupations and the scalar
// quantities derived from them. Everything downstream (response functions,
// spectra, synthetic data, calibration) consumes these types.
//
// Unit convention: every frequency or rate held in memory is angular
// (rad/s). Hz enters and leaves only at the I/O boundary (JSON configs,
// CSV traces), always via an explicit 2*pi conversion.
namespace optomech {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> failures);
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::vector<std::string> failures_;
};

// Static device rates and frequencies, all angular (rad/s) and strictly
// positive. g0 follows the dimensionless-displacement convention
// (frequency shift per zero-point unit of x).
struct SystemParams {
  double omega_c = 0.0;  // cavity resonance
  double omega_m = 0.0;  // mechanical resonance
  double kappa_e = 0.0;  // external cavity loss
  double kappa_i = 0.0;  // internal cavity loss
  double gamma = 0.0;    // intrinsic mechanical damping
  double g0 = 0.0;       // single-photon optomechanical coupling

  // Total cavity linewidth; derived, never stored.
  double kappa() const { return kappa_e + kappa_i; }

  // omega_m / kappa. Values >= 2 count as sideband-resolved here (the
  // reference device sits at about 2.35).
  double sideband_resolution() const { return omega_m / kappa(); }
};

enum class Regime {
  BadCavitySingleTone,    // single pump on resonance, kappa >> omega_m
  RedSidebandSingleTone,  // single pump at Delta = -omega_m, kappa << omega_m
  TwoToneBAE,             // equal tones at omega_c +/- omega_m
};

std::string to_string(Regime r);
Regime regime_from_string(const std::string& name);

// Auxiliary sideband-cooling tone applied alongside the BAE pair,
// detuned by `delta` from the red sideband so the two processes stay
// incommensurate.
struct CoolingTone {
  double G = 0.0;      // enhanced coupling of the cooling tone (rad/s)
  double delta = 0.0;  // detuning from the red sideband (rad/s), nonzero
};

// Which pump regime is active and with what strength. For TwoToneBAE the
// two tones are equal-power by construction, so a single G describes both.
struct DriveScheme {
  Regime regime = Regime::BadCavitySingleTone;
  double G = 0.0;      // enhanced coupling (rad/s), >= 0
  double delta = 0.0;  // pump detuning (rad/s); fixed per regime
  double theta = 0.0;  // BAE pump phase difference (rad)
  std::optional<CoolingTone> cooling;  // TwoToneBAE only
};

// Thermal occupations of the two dissipative baths. The cavity external
// bath is taken at zero temperature throughout.
struct BathState {
  double n_m_T = 0.0;  // mechanical bath occupation (quanta)
  double n_I_T = 0.0;  // cavity internal bath occupation (quanta)
  std::optional<double> temperature;  // kelvin; when set, n_m_T must match
                                      // bose_occupation at omega_m

  // Cavity thermal occupation n_c^T = n_I^T * kappa_i / kappa.
  double n_c_T(const SystemParams& p) const;
};

// Scalars that follow from (params, G).
struct DerivedRates {
  double C = 0.0;          // cooperativity 4 G^2 / (kappa gamma)
  double gamma_opt = 0.0;  // optical damping 4 G^2 / kappa (rad/s)
  double gamma_eff = 0.0;  // gamma + gamma_opt (rad/s)
  double n_c = 0.0;        // intracavity pump photon number (G/g0)^2
};

// G = g0 sqrt(n_c).
double enhanced_coupling(double g0, double n_c);

// C = 4 G^2 / (kappa gamma).
double cooperativity(double G, double kappa, double gamma);

// gamma_opt = 4 G^2 / kappa, gamma_eff = gamma + gamma_opt, plus C.
// n_c is left at zero (no g0 available); see derived_rates.
DerivedRates optical_damping(double G, double kappa, double gamma);

// optical_damping plus the pump photon number inferred from g0.
DerivedRates derived_rates(const SystemParams& p, double G);

// Bose-Einstein occupation 1/(exp(hbar omega / kB T) - 1).
double bose_occupation(double temperature_K, double omega);

// n_c^T = n_I^T * kappa_i / kappa.
double cavity_thermal_occupation(double n_I_T, double kappa_i, double kappa);

// Result of validate_params: the inputs with every invariant asserted,
// plus non-fatal warnings (e.g. a good-cavity regime requested on a
// device that does not resolve sidebands).
struct ValidatedConfig {
  SystemParams params;
  DriveScheme drive;
  bool good_cavity = false;  // omega_m / kappa >= 2
  std::vector<std::string> warnings;
};

// Checks every invariant of (p, d); throws ConfigError listing each
// failed check. Regimes that assume a resolved-sideband cavity
// (RedSidebandSingleTone, TwoToneBAE) get a warning when omega_m/kappa < 2.
ValidatedConfig validate_params(const SystemParams& p, const DriveScheme& d);

}  // namespace optomech
