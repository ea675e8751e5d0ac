#pragma once

#include <string>

#include <json.hpp>

#include "optomech/model.hpp"

// JSON (de)serialization of the core configuration record. Frequencies and
// rates are written in Hz with fixed field names:
//   omega_c_hz, omega_m_hz, kappa_e_hz, kappa_i_hz, gamma_hz, g0_hz,
//   regime, G_hz, delta_hz, theta_rad, cooling_G_hz, cooling_delta_hz,
//   n_m_T, n_I_T, temperature_K
// cooling_* and temperature_K are optional; everything else is required.
namespace optomech {

struct ScenarioConfig {
  SystemParams params;
  DriveScheme drive;
  BathState baths;
};

nlohmann::json scenario_to_json(const ScenarioConfig& s);
ScenarioConfig scenario_from_json(const nlohmann::json& j);

ScenarioConfig load_scenario_file(const std::string& path);
void save_scenario_file(const ScenarioConfig& s, const std::string& path);

// FNV-1a hash of the serialized record, used to tag traces with the
// configuration that produced them.
std::string scenario_hash(const ScenarioConfig& s);

}  // namespace optomech
