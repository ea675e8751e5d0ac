#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "optomech/fitcal.hpp"
#include "optomech/synthlab.hpp"

// The full calibration chain on a scenario directory holding three sweep
// datasets:
//   <dir>/pump_sweep/         red-sideband power sweep  -> L, J, C(P)
//   <dir>/temperature_sweep/  BAE temperature sweep     -> H, n_m^T, n_m^T0
//   <dir>/bae_power_sweep/    BAE power sweep           -> N, <X^2>(C), verdict
// Only the blind view of each dataset is read.
namespace optomech {

struct PipelineConfig {
  // Cavity thermal occupation assumed when forming X2_ref; comes from the
  // single-tone analysis, not from this pipeline's own fits.
  double n_c_T_assumed = 0.0;
  TemperatureCalOptions temperature;
  BaeFluxOptions bae;
};

PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

struct SweepFitRow {
  double axis_value = 0.0;
  LorentzianFit fit;
};

struct PipelineReport {
  PumpCalibration pump;
  TemperatureCalibration temperature;
  BaeFluxCalibration bae;
  EvasionReport evasion;
  CalibrationResult constants;

  double gamma_eff_cool_hz = 0.0;  // fitted cooling-tone linewidth
  double C_cool = 0.0;
  double X2_ref = 0.0;
  LinearFit linewidth_trend;  // BAE linewidth vs C; slope ~ 0 is the benchmark

  std::vector<SweepFitRow> pump_fits;
  std::vector<SweepFitRow> temperature_fits;
  std::vector<SweepFitRow> bae_fits;
};

PipelineReport run_pipeline(const std::string& scenario_dir,
                            const PipelineConfig& cfg = {});

nlohmann::json pipeline_report_json(const PipelineReport& r);

// Writes report.json plus the plot-ready tables fig5.csv
// (C,linewidth_hz,flux,X2,model_bad,model_good,model_baeP) and
// temperature_calibration.csv.
void write_pipeline_outputs(const PipelineReport& r, const std::string& out_dir);

}  // namespace optomech
