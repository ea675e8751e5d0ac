#include "optomech/config_io.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "optomech/constants.hpp"

namespace optomech {

namespace {

using constants::two_pi;

double require_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw ConfigError({std::string("missing or non-numeric field \"") + key + "\""});
  return j.at(key).get<double>();
}

}  // namespace

nlohmann::json scenario_to_json(const ScenarioConfig& s) {
  nlohmann::json j;
  j["omega_c_hz"] = s.params.omega_c / two_pi;
  j["omega_m_hz"] = s.params.omega_m / two_pi;
  j["kappa_e_hz"] = s.params.kappa_e / two_pi;
  j["kappa_i_hz"] = s.params.kappa_i / two_pi;
  j["gamma_hz"] = s.params.gamma / two_pi;
  j["g0_hz"] = s.params.g0 / two_pi;
  j["regime"] = to_string(s.drive.regime);
  j["G_hz"] = s.drive.G / two_pi;
  j["delta_hz"] = s.drive.delta / two_pi;
  j["theta_rad"] = s.drive.theta;
  if (s.drive.cooling) {
    j["cooling_G_hz"] = s.drive.cooling->G / two_pi;
    j["cooling_delta_hz"] = s.drive.cooling->delta / two_pi;
  }
  j["n_m_T"] = s.baths.n_m_T;
  j["n_I_T"] = s.baths.n_I_T;
  if (s.baths.temperature) j["temperature_K"] = *s.baths.temperature;
  return j;
}

ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  ScenarioConfig s;
  s.params.omega_c = two_pi * require_number(j, "omega_c_hz");
  s.params.omega_m = two_pi * require_number(j, "omega_m_hz");
  s.params.kappa_e = two_pi * require_number(j, "kappa_e_hz");
  s.params.kappa_i = two_pi * require_number(j, "kappa_i_hz");
  s.params.gamma = two_pi * require_number(j, "gamma_hz");
  s.params.g0 = two_pi * require_number(j, "g0_hz");

  if (!j.contains("regime") || !j.at("regime").is_string())
    throw ConfigError({"missing or non-string field \"regime\""});
  s.drive.regime = regime_from_string(j.at("regime").get<std::string>());
  s.drive.G = two_pi * require_number(j, "G_hz");
  if (j.contains("delta_hz"))
    s.drive.delta = two_pi * j.at("delta_hz").get<double>();
  else if (s.drive.regime == Regime::RedSidebandSingleTone)
    s.drive.delta = -s.params.omega_m;
  s.drive.theta = j.value("theta_rad", 0.0);
  if (j.contains("cooling_G_hz") || j.contains("cooling_delta_hz")) {
    CoolingTone c;
    c.G = two_pi * require_number(j, "cooling_G_hz");
    c.delta = two_pi * require_number(j, "cooling_delta_hz");
    s.drive.cooling = c;
  }

  s.baths.n_m_T = require_number(j, "n_m_T");
  s.baths.n_I_T = require_number(j, "n_I_T");
  if (j.contains("temperature_K"))
    s.baths.temperature = j.at("temperature_K").get<double>();

  validate_params(s.params, s.drive);
  if (s.baths.n_m_T < 0.0 || s.baths.n_I_T < 0.0)
    throw ConfigError({"bath occupations must be >= 0"});
  return s;
}

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path});
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError({"malformed JSON in " + path + ": " + e.what()});
  }
  return scenario_from_json(j);
}

void save_scenario_file(const ScenarioConfig& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError({"cannot write config file " + path});
  out << scenario_to_json(s).dump(2) << "\n";
}

std::string scenario_hash(const ScenarioConfig& s) {
  const std::string bytes = scenario_to_json(s).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

}  // namespace optomech
