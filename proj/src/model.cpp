#include "optomech/model.hpp"

#include <cmath>
#include <sstream>

#include "optomech/constants.hpp"

namespace optomech {

namespace {

std::string join_failures(const std::vector<std::string>& failures) {
  std::ostringstream out;
  out << "invalid configuration (" << failures.size() << " check"
      << (failures.size() == 1 ? "" : "s") << " failed):";
  for (const auto& f : failures) out << "\n  - " << f;
  return out.str();
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> failures)
    : std::runtime_error(join_failures(failures)), failures_(std::move(failures)) {}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::BadCavitySingleTone: return "BadCavitySingleTone";
    case Regime::RedSidebandSingleTone: return "RedSidebandSingleTone";
    case Regime::TwoToneBAE: return "TwoToneBAE";
  }
  throw std::logic_error("unknown regime");
}

Regime regime_from_string(const std::string& name) {
  if (name == "BadCavitySingleTone") return Regime::BadCavitySingleTone;
  if (name == "RedSidebandSingleTone") return Regime::RedSidebandSingleTone;
  if (name == "TwoToneBAE") return Regime::TwoToneBAE;
  throw ConfigError({"unknown regime \"" + name + "\""});
}

double BathState::n_c_T(const SystemParams& p) const {
  return cavity_thermal_occupation(n_I_T, p.kappa_i, p.kappa());
}

double enhanced_coupling(double g0, double n_c) {
  if (g0 <= 0.0) throw std::domain_error("enhanced_coupling: g0 must be > 0");
  if (n_c < 0.0) throw std::domain_error("enhanced_coupling: photon number must be >= 0");
  return g0 * std::sqrt(n_c);
}

double cooperativity(double G, double kappa, double gamma) {
  if (kappa <= 0.0 || gamma <= 0.0)
    throw std::domain_error("cooperativity: kappa and gamma must be > 0");
  return 4.0 * G * G / (kappa * gamma);
}

DerivedRates optical_damping(double G, double kappa, double gamma) {
  if (kappa <= 0.0) throw std::domain_error("optical_damping: kappa must be > 0");
  if (gamma < 0.0) throw std::domain_error("optical_damping: gamma must be >= 0");
  DerivedRates r;
  r.gamma_opt = 4.0 * G * G / kappa;
  r.gamma_eff = gamma + r.gamma_opt;
  r.C = gamma > 0.0 ? cooperativity(G, kappa, gamma) : 0.0;
  return r;
}

DerivedRates derived_rates(const SystemParams& p, double G) {
  DerivedRates r = optical_damping(G, p.kappa(), p.gamma);
  r.n_c = (G / p.g0) * (G / p.g0);
  return r;
}

double bose_occupation(double temperature_K, double omega) {
  if (temperature_K <= 0.0)
    throw std::domain_error("bose_occupation: temperature must be > 0");
  if (omega <= 0.0) throw std::domain_error("bose_occupation: omega must be > 0");
  const double x = constants::hbar * omega / (constants::boltzmann * temperature_K);
  // expm1 keeps the high-temperature (x -> 0) limit accurate.
  return 1.0 / std::expm1(x);
}

double cavity_thermal_occupation(double n_I_T, double kappa_i, double kappa) {
  if (kappa_i <= 0.0 || kappa <= 0.0)
    throw std::domain_error("cavity_thermal_occupation: rates must be > 0");
  if (kappa_i > kappa)
    throw std::domain_error("cavity_thermal_occupation: kappa_i exceeds kappa");
  if (n_I_T < 0.0)
    throw std::domain_error("cavity_thermal_occupation: occupation must be >= 0");
  return n_I_T * kappa_i / kappa;
}

ValidatedConfig validate_params(const SystemParams& p, const DriveScheme& d) {
  std::vector<std::string> failures;
  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) failures.push_back(msg);
  };

  require(p.omega_c > 0.0, "omega_c must be > 0");
  require(p.omega_m > 0.0, "omega_m must be > 0");
  require(p.kappa_e > 0.0, "kappa_e must be > 0");
  require(p.kappa_i > 0.0, "kappa_i must be > 0");
  require(p.gamma > 0.0, "gamma must be > 0");
  require(p.g0 > 0.0, "g0 must be > 0");

  require(d.G >= 0.0, "drive G must be >= 0");
  switch (d.regime) {
    case Regime::BadCavitySingleTone:
      require(d.delta == 0.0, "BadCavitySingleTone requires delta = 0");
      break;
    case Regime::RedSidebandSingleTone:
      if (p.omega_m > 0.0)
        require(d.delta == -p.omega_m,
                "RedSidebandSingleTone requires delta = -omega_m");
      break;
    case Regime::TwoToneBAE:
      break;
  }
  if (d.cooling) {
    require(d.regime == Regime::TwoToneBAE, "cooling tone is only valid with TwoToneBAE");
    require(d.cooling->G >= 0.0, "cooling G must be >= 0");
    require(d.cooling->delta != 0.0,
            "cooling tone detuning must be nonzero (incommensurate-tone assumption)");
  }

  if (!failures.empty()) throw ConfigError(std::move(failures));

  ValidatedConfig out{p, d, p.sideband_resolution() >= 2.0, {}};
  const bool wants_good_cavity = d.regime == Regime::RedSidebandSingleTone ||
                                 d.regime == Regime::TwoToneBAE;
  if (wants_good_cavity && !out.good_cavity) {
    std::ostringstream w;
    w << "regime " << to_string(d.regime)
      << " assumes a resolved-sideband cavity but omega_m/kappa = "
      << p.sideband_resolution() << " < 2";
    out.warnings.push_back(w.str());
  }
  if (d.regime == Regime::BadCavitySingleTone && out.good_cavity) {
    out.warnings.push_back(
        "BadCavitySingleTone assumes kappa >> omega_m but the device is sideband-resolved");
  }
  return out;
}

}  // namespace optomech
