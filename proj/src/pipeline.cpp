#include "optomech/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "optomech/constants.hpp"

namespace optomech {

namespace fs = std::filesystem;
using constants::two_pi;

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  cfg.n_c_T_assumed = j.value("n_c_T", 0.0);
  if (j.contains("band_K")) {
    const auto& band = j.at("band_K");
    cfg.temperature.band_lo_K = band.at(0).get<double>();
    cfg.temperature.band_hi_K = band.at(1).get<double>();
  }
  cfg.temperature.subtract_intercept = j.value("subtract_intercept", true);
  if (j.value("n_m_T0_estimator", std::string("base_point")) == "lowest_two_average")
    cfg.temperature.estimator = NmT0Estimator::LowestTwoAverage;
  cfg.temperature.decoupling_threshold = j.value("decoupling_threshold", 0.10);
  cfg.bae.max_reduced_residual = j.value("max_reduced_residual", 2.0);
  cfg.bae.min_window = j.value("min_window", std::size_t{3});
  return cfg;
}

namespace {

SweepDataset load_stage(const std::string& scenario_dir, const std::string& name,
                        const std::string& expected_type) {
  const fs::path dir = fs::path(scenario_dir) / name;
  if (!fs::exists(dir / "dataset.json"))
    throw std::runtime_error("calibration stage \"" + name + "\": missing dataset in " +
                             dir.string());
  SweepDataset ds = load_sweep_dataset(dir.string(), false);
  if (ds.type != expected_type)
    throw std::runtime_error("calibration stage \"" + name + "\": dataset type \"" +
                             ds.type + "\", expected \"" + expected_type + "\"");
  return ds;
}

std::vector<SweepFitRow> fit_all(const SweepDataset& ds) {
  std::vector<SweepFitRow> rows(ds.traces.size());
  for (std::size_t k = 0; k < ds.traces.size(); ++k) {
    rows[k].axis_value = ds.axis.at(k);
    rows[k].fit = fit_lorentzian(ds.traces[k]);
  }
  return rows;
}

}  // namespace

PipelineReport run_pipeline(const std::string& scenario_dir,
                            const PipelineConfig& cfg) {
  PipelineReport r;

  // Stage 1: pump calibration from the red-sideband power sweep.
  {
    const SweepDataset ds = load_stage(scenario_dir, "pump_sweep", "pump_sweep");
    r.pump_fits = fit_all(ds);
    std::vector<PumpPoint> pts;
    for (const auto& row : r.pump_fits)
      pts.push_back({row.axis_value, row.fit.linewidth_hz, row.fit.linewidth_err});
    r.pump = calibrate_pump(pts, ds.scenario.params);
  }

  // Stage 2: temperature calibration from the BAE temperature sweep.
  double omega_m = 0.0;
  {
    const SweepDataset ds =
        load_stage(scenario_dir, "temperature_sweep", "temperature_sweep");
    omega_m = ds.scenario.params.omega_m;
    r.temperature_fits = fit_all(ds);
    std::vector<TemperaturePoint> pts;
    for (const auto& row : r.temperature_fits)
      pts.push_back({row.axis_value, row.fit.area, row.fit.area_err});
    r.temperature = calibrate_temperature_sweep(pts, omega_m, cfg.temperature);
  }

  // Stage 3: BAE flux calibration and the evasion benchmark.
  {
    const SweepDataset ds =
        load_stage(scenario_dir, "bae_power_sweep", "bae_power_sweep");
    const double gamma_hz = ds.scenario.params.gamma / two_pi;
    r.bae_fits = fit_all(ds);

    // Cooling-tone linewidth: BAE pumping does not broaden the measured
    // quadrature, so the widths share one value; take the weighted mean.
    double wsum = 0.0, vsum = 0.0;
    for (const auto& row : r.bae_fits) {
      const double e = row.fit.linewidth_err;
      const double w = e > 0.0 && std::isfinite(e) ? 1.0 / (e * e) : 1.0;
      wsum += w;
      vsum += w * row.fit.linewidth_hz;
    }
    r.gamma_eff_cool_hz = vsum / wsum;
    r.C_cool = r.gamma_eff_cool_hz / gamma_hz - 1.0;
    if (r.C_cool <= 0.0)
      throw CalibrationError("pipeline: fitted cooling linewidth below gamma");

    // X2_ref from the sideband-cooling occupation at the cooling
    // cooperativity, with the calibrated base-temperature bath.
    r.X2_ref = 0.5 + r.temperature.n_m_T0 / (1.0 + r.C_cool) + cfg.n_c_T_assumed;

    std::vector<BaeFluxPoint> pts;
    for (std::size_t k = 0; k < r.bae_fits.size(); ++k) {
      BaeFluxPoint pt;
      pt.C = r.pump.L_hz_per_unit * ds.axis[k] / gamma_hz;
      pt.C_err = r.pump.L_err * ds.axis[k] / gamma_hz;
      pt.flux = r.bae_fits[k].fit.area;
      pt.flux_err = r.bae_fits[k].fit.area_err;
      pt.linewidth_hz = r.bae_fits[k].fit.linewidth_hz;
      pt.linewidth_err_hz = r.bae_fits[k].fit.linewidth_err;
      pts.push_back(pt);
    }
    r.bae = calibrate_bae_flux(pts, r.X2_ref, cfg.bae);

    std::vector<double> cs, widths, wws;
    for (const auto& pt : r.bae.points) {
      cs.push_back(pt.C);
      widths.push_back(pt.linewidth_hz);
      const double e = pt.linewidth_err_hz;
      wws.push_back(e > 0.0 && std::isfinite(e) ? 1.0 / (e * e) : 1.0);
    }
    r.linewidth_trend = fit_linear_free_intercept(cs, widths, wws);

    std::vector<double> c2;
    for (const auto& pt : r.bae.points) c2.push_back(pt.C);
    r.evasion = evaluate_bae_evasion(c2, r.bae.X2, r.bae.X2_err, r.X2_ref);
  }

  r.constants = {r.pump.L_hz_per_unit, r.pump.L_err, r.pump.J, r.pump.J_err,
                 r.temperature.H,      r.temperature.H_err,
                 r.bae.N,              r.bae.N_err,
                 r.X2_ref};
  return r;
}

namespace {

nlohmann::json linear_fit_json(const LinearFit& f) {
  return {{"slope", f.slope},
          {"slope_err", f.slope_err},
          {"intercept", f.intercept},
          {"intercept_err", f.intercept_err},
          {"through_origin", f.through_origin},
          {"reduced_residual", f.reduced_residual},
          {"dof_warning", f.dof_warning}};
}

}  // namespace

nlohmann::json pipeline_report_json(const PipelineReport& r) {
  nlohmann::json j;

  nlohmann::json pump;
  pump["L_hz_per_unit"] = r.pump.L_hz_per_unit;
  pump["L_err"] = r.pump.L_err;
  pump["J_rad2_s2_per_unit"] = r.pump.J;
  pump["J_err"] = r.pump.J_err;
  pump["excluded_points"] = r.pump.excluded;
  pump["fit"] = linear_fit_json(r.pump.fit);
  pump["points"] = nlohmann::json::array();
  for (std::size_t k = 0; k < r.pump_fits.size(); ++k) {
    pump["points"].push_back({{"power_au", r.pump_fits[k].axis_value},
                              {"gamma_eff_hz", r.pump_fits[k].fit.linewidth_hz},
                              {"gamma_eff_err_hz", r.pump_fits[k].fit.linewidth_err},
                              {"C", r.pump.C[k]},
                              {"C_err", r.pump.C_err[k]}});
  }
  j["pump_calibration"] = pump;

  nlohmann::json temp;
  temp["H_flux_per_K"] = r.temperature.H;
  temp["H_err"] = r.temperature.H_err;
  temp["intercept"] = r.temperature.intercept;
  temp["intercept_err"] = r.temperature.intercept_err;
  temp["n_m_T0"] = r.temperature.n_m_T0;
  temp["n_m_T0_err"] = r.temperature.n_m_T0_err;
  temp["fit"] = linear_fit_json(r.temperature.fit);
  temp["points"] = nlohmann::json::array();
  for (std::size_t k = 0; k < r.temperature_fits.size(); ++k) {
    temp["points"].push_back({{"temperature_K", r.temperature_fits[k].axis_value},
                              {"flux", r.temperature_fits[k].fit.area},
                              {"flux_err", r.temperature_fits[k].fit.area_err},
                              {"n_m_T", r.temperature.n_m_T[k]},
                              {"n_m_T_err", r.temperature.n_m_T_err[k]},
                              {"decoupled", static_cast<bool>(r.temperature.decoupled[k])}});
  }
  j["temperature_calibration"] = temp;

  nlohmann::json bae;
  bae["N_flux_per_C"] = r.bae.N;
  bae["N_err"] = r.bae.N_err;
  bae["window_size"] = r.bae.window_size;
  bae["gamma_eff_cool_hz"] = r.gamma_eff_cool_hz;
  bae["C_cool"] = r.C_cool;
  bae["X2_ref"] = r.X2_ref;
  bae["linewidth_trend"] = linear_fit_json(r.linewidth_trend);
  bae["fit"] = linear_fit_json(r.bae.fit);
  bae["points"] = nlohmann::json::array();
  for (std::size_t k = 0; k < r.bae.points.size(); ++k) {
    const auto& pt = r.bae.points[k];
    bae["points"].push_back({{"C", pt.C},
                             {"C_err", pt.C_err},
                             {"flux", pt.flux},
                             {"flux_err", pt.flux_err},
                             {"linewidth_hz", pt.linewidth_hz},
                             {"X2", r.bae.X2[k]},
                             {"X2_err", r.bae.X2_err[k]}});
  }
  j["bae_flux_calibration"] = bae;

  nlohmann::json ev;
  ev["evasion_demonstrated"] = r.evasion.evasion_demonstrated;
  ev["X2_ref"] = r.evasion.X2_ref;
  ev["points"] = nlohmann::json::array();
  for (const auto& p : r.evasion.points) {
    ev["points"].push_back({{"C", p.C},
                            {"X2", p.X2},
                            {"X2_err", p.X2_err},
                            {"model_flat", p.model_flat},
                            {"model_bad", p.model_bad},
                            {"model_good", p.model_good},
                            {"model_baeP", p.model_baeP},
                            {"below_bad", p.below_bad},
                            {"below_good", p.below_good},
                            {"below_baeP", p.below_baeP}});
  }
  j["evasion_report"] = ev;
  return j;
}

void write_pipeline_outputs(const PipelineReport& r, const std::string& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "report.json");
    if (!out) throw std::runtime_error("cannot write report.json in " + out_dir);
    out << pipeline_report_json(r).dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(out_dir) / "fig5.csv");
    if (!out) throw std::runtime_error("cannot write fig5.csv in " + out_dir);
    out << "C,linewidth_hz,flux,X2,model_bad,model_good,model_baeP\n";
    char buf[256];
    for (std::size_t k = 0; k < r.bae.points.size(); ++k) {
      const auto& pt = r.bae.points[k];
      const auto& ev = r.evasion.points[k];
      std::snprintf(buf, sizeof(buf),
                    "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", pt.C,
                    pt.linewidth_hz, pt.flux, r.bae.X2[k], ev.model_bad,
                    ev.model_good, ev.model_baeP);
      out << buf;
    }
  }
  {
    std::ofstream out(fs::path(out_dir) / "temperature_calibration.csv");
    if (!out)
      throw std::runtime_error("cannot write temperature_calibration.csv in " + out_dir);
    out << "temperature_K,flux,flux_err,n_m_T,n_m_T_err,decoupled\n";
    char buf[256];
    for (std::size_t k = 0; k < r.temperature_fits.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                    r.temperature_fits[k].axis_value, r.temperature_fits[k].fit.area,
                    r.temperature_fits[k].fit.area_err, r.temperature.n_m_T[k],
                    r.temperature.n_m_T_err[k],
                    static_cast<int>(r.temperature.decoupled[k]));
      out << buf;
    }
  }
}

}  // namespace optomech
