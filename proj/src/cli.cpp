#include "optomech/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "optomech/config_io.hpp"
#include "optomech/constants.hpp"
#include "optomech/pipeline.hpp"
#include "optomech/spectra.hpp"
#include "optomech/synthlab.hpp"

namespace optomech::cli {

namespace fs = std::filesystem;
using constants::two_pi;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitCalibration = 3;

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path});
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError({"malformed JSON in " + path + ": " + e.what()});
  }
  return j;
}

void prepare_out_dir(const std::string& out, bool force) {
  if (fs::exists(out) && !fs::is_directory(out))
    throw ConfigError({"output path " + out + " exists and is not a directory"});
  if (fs::exists(out) && !fs::is_empty(out) && !force)
    throw ConfigError({"output directory " + out +
                       " is not empty; pass --force to overwrite"});
  fs::create_directories(out);
}

MeasurementChain chain_from_json(const json& j) {
  MeasurementChain c;
  c.gain_A = j.value("gain_A", 1.0);
  c.n_add = j.value("n_add", 0.0);
  if (c.gain_A <= 0.0 || c.n_add < 0.0)
    throw ConfigError({"chain: gain_A must be > 0 and n_add >= 0"});
  return c;
}

NoiseSettings noise_from_json(const json& j) {
  NoiseSettings n;
  n.n_avg = j.value("n_avg", 100.0);
  n.noiseless = j.value("noiseless", false);
  n.bins = j.value("bins", 4096);
  n.span_linewidths = j.value("span_linewidths", 32.0);
  if (n.n_avg <= 0.0 || n.bins < 16 || n.span_linewidths <= 0.0)
    throw ConfigError({"noise: need n_avg > 0, bins >= 16, span_linewidths > 0"});
  return n;
}

HeatingModel heating_from_json(const json& j) {
  HeatingModel h;
  h.a_m = j.value("a_m", 0.0);
  h.b_m = j.value("b_m", 1.0);
  h.a_c = j.value("a_c", 0.0);
  h.b_c = j.value("b_c", 1.0);
  if (h.a_m < 0.0 || h.a_c < 0.0)
    throw ConfigError({"heating: coefficients must be >= 0"});
  return h;
}

// Cooling-tone bookkeeping shared by simulate.
struct CoolingView {
  double gamma_mech;  // rad/s linewidth in force
  double n_mech;      // occupation in force
  double C_cool = 0.0;
};

CoolingView cooling_view(const ScenarioConfig& s) {
  CoolingView v{s.params.gamma, s.baths.n_m_T, 0.0};
  if (s.drive.cooling && s.drive.cooling->G > 0.0) {
    const DerivedRates r =
        optical_damping(s.drive.cooling->G, s.params.kappa(), s.params.gamma);
    v.C_cool = r.C;
    v.gamma_mech = r.gamma_eff;
    v.n_mech = s.baths.n_m_T / (1.0 + r.C) + s.baths.n_c_T(s.params);
  }
  return v;
}

int cmd_simulate(const std::string& config_path, const std::string& out,
                 bool force, bool verbose) {
  const json cfg = load_json_file(config_path);
  if (!cfg.contains("scenario"))
    throw ConfigError({"simulate config: missing \"scenario\" block"});
  const ScenarioConfig s = scenario_from_json(cfg.at("scenario"));
  const ValidatedConfig vc = validate_params(s.params, s.drive);
  for (const auto& w : vc.warnings) std::cerr << "warning: " << w << "\n";
  prepare_out_dir(out, force);

  const json grid_cfg = cfg.value("grid", json::object());
  const int n = grid_cfg.value("n", 1 << 14);
  const double span = grid_cfg.value("span_linewidths", 64.0);

  const SystemParams& p = s.params;
  const double f_m = p.omega_m / two_pi;
  const double n_c_T = s.baths.n_c_T(p);
  const DerivedRates rates = derived_rates(p, s.drive.G);

  VarianceReport report;
  if (s.drive.regime == Regime::BadCavitySingleTone) {
    const auto grid = lab_grid(f_m, p.gamma / two_pi, n, span);
    SpectrumTrace t = spectrum_x_bad_cavity(grid, p, s.drive.G, s.baths);
    t.meta.params_hash = scenario_hash(s);
    save_trace_csv(t, (fs::path(out) / "trace_x.csv").string());
    report = variance_bad_cavity(rates.C, s.baths.n_m_T, n_c_T);
  } else if (s.drive.regime == Regime::RedSidebandSingleTone) {
    const auto grid = lab_grid(f_m, rates.gamma_eff / two_pi, n, span);
    SpectrumTrace t = spectrum_x_good_cavity(grid, p, s.drive.G, s.baths);
    t.meta.params_hash = scenario_hash(s);
    save_trace_csv(t, (fs::path(out) / "trace_x.csv").string());
    report = variance_good_cavity(rates.C, s.baths.n_m_T, n_c_T);
  } else {
    const CoolingView cool = cooling_view(s);
    const auto grid = peak_grid(0.0, cool.gamma_mech / two_pi, n, span);
    auto [sx, sp] = spectrum_quadratures_bae(grid, p, s.drive.G, s.baths,
                                             cool.gamma_mech, cool.n_mech);
    SpectrumTrace so = output_spectrum_bae(grid, p, s.drive.G, s.baths,
                                           cool.gamma_mech, cool.n_mech);
    const std::string hash = scenario_hash(s);
    sx.meta.params_hash = sp.meta.params_hash = so.meta.params_hash = hash;
    save_trace_csv(sx, (fs::path(out) / "trace_X.csv").string());
    save_trace_csv(sp, (fs::path(out) / "trace_P.csv").string());
    save_trace_csv(so, (fs::path(out) / "trace_out.csv").string());
    report = variance_bae(rates.C, cool.n_mech, n_c_T);
  }

  json vj;
  vj["regime"] = to_string(s.drive.regime);
  vj["scenario"] = scenario_to_json(s);
  vj["variance_x"] = report.variance_x;
  vj["variance_p"] = report.variance_p;
  vj["components"] = {{"vacuum", report.vacuum},
                      {"thermal", report.thermal},
                      {"qba", report.qba},
                      {"classical", report.classical}};
  vj["n_qba"] = report.n_qba;
  if (s.drive.regime == Regime::RedSidebandSingleTone) {
    vj["n_m"] = report.n_m;
    vj["qba_eff"] = report.qba_eff;
  }
  vj["derived"] = {{"C", rates.C},
                   {"gamma_opt_hz", rates.gamma_opt / two_pi},
                   {"gamma_eff_hz", rates.gamma_eff / two_pi},
                   {"n_c", rates.n_c}};
  vj["good_cavity"] = vc.good_cavity;
  vj["warnings"] = vc.warnings;
  std::ofstream vout(fs::path(out) / "variance.json");
  if (!vout) throw std::runtime_error("cannot write variance.json in " + out);
  vout << vj.dump(2) << "\n";
  if (verbose) std::cout << "simulate: wrote traces and variance.json to " << out << "\n";
  return kExitOk;
}

PumpSweepConfig pump_sweep_from_json(const json& j, const ScenarioConfig& scenario,
                                     const MeasurementChain& chain) {
  PumpSweepConfig cfg;
  cfg.scenario = scenario;
  cfg.chain = chain;
  cfg.noise = noise_from_json(j.value("noise", json::object()));
  cfg.powers = j.value("powers", std::vector<double>{});
  cfg.L_hz_per_unit = j.value("L_hz_per_unit", 1.0);
  if (cfg.powers.empty()) throw ConfigError({"pump_sweep: empty \"powers\" list"});
  return cfg;
}

TemperatureSweepConfig temperature_sweep_from_json(const json& j,
                                                   const ScenarioConfig& scenario,
                                                   const MeasurementChain& chain) {
  TemperatureSweepConfig cfg;
  cfg.scenario = scenario;
  cfg.chain = chain;
  cfg.noise = noise_from_json(j.value("noise", json::object()));
  cfg.temperatures_K = j.value("temperatures_K", std::vector<double>{});
  cfg.T_floor_K = j.value("T_floor_K", 0.0);
  if (cfg.temperatures_K.empty())
    throw ConfigError({"temperature_sweep: empty \"temperatures_K\" list"});
  return cfg;
}

BaePowerSweepConfig bae_sweep_from_json(const json& j, const ScenarioConfig& scenario,
                                        const MeasurementChain& chain) {
  BaePowerSweepConfig cfg;
  cfg.scenario = scenario;
  cfg.chain = chain;
  cfg.noise = noise_from_json(j.value("noise", json::object()));
  cfg.cooperativities = j.value("cooperativities", std::vector<double>{});
  cfg.L_hz_per_unit = j.value("L_hz_per_unit", 1.0);
  cfg.heating = heating_from_json(j.value("heating", json::object()));
  cfg.jitter.center_jitter_linewidths = j.value("jitter_linewidths", 0.0);
  if (cfg.cooperativities.empty())
    throw ConfigError({"bae_power_sweep: empty \"cooperativities\" list"});
  return cfg;
}

// The pump calibration runs single-tone on the same device.
ScenarioConfig as_red_sideband(ScenarioConfig s) {
  s.drive.regime = Regime::RedSidebandSingleTone;
  s.drive.G = 0.0;
  s.drive.delta = -s.params.omega_m;
  s.drive.cooling.reset();
  return s;
}

int cmd_synth(const std::string& config_path, const std::string& out,
              std::uint64_t seed_flag, bool seed_given, bool force, bool verbose) {
  const json cfg = load_json_file(config_path);
  const std::string type = cfg.value("type", "");
  if (!cfg.contains("scenario"))
    throw ConfigError({"synth config: missing \"scenario\" block"});
  const ScenarioConfig scenario = scenario_from_json(cfg.at("scenario"));
  const MeasurementChain chain = chain_from_json(cfg.value("chain", json::object()));
  const std::uint64_t seed = seed_given ? seed_flag : cfg.value("seed", std::uint64_t{1});
  const bool write_truth = cfg.value("write_truth", true);
  prepare_out_dir(out, force);

  if (type == "output_trace") {
    const NoiseSettings noise = noise_from_json(cfg.value("noise", json::object()));
    SpectrumTrace t = synth_output_trace(scenario, chain, noise, seed);
    save_trace_csv(t, (fs::path(out) / "point_0.csv").string());
  } else if (type == "pump_sweep") {
    save_sweep_dataset(synth_pump_sweep(pump_sweep_from_json(cfg, scenario, chain), seed),
                       out, write_truth);
  } else if (type == "temperature_sweep") {
    save_sweep_dataset(
        synth_temperature_sweep(temperature_sweep_from_json(cfg, scenario, chain), seed),
        out, write_truth);
  } else if (type == "bae_power_sweep") {
    save_sweep_dataset(synth_bae_power_sweep(bae_sweep_from_json(cfg, scenario, chain), seed),
                       out, write_truth);
  } else if (type == "reproduce_paper") {
    if (!cfg.contains("pump_sweep") || !cfg.contains("temperature_sweep") ||
        !cfg.contains("bae_power_sweep"))
      throw ConfigError({"reproduce_paper config: needs pump_sweep, "
                         "temperature_sweep and bae_power_sweep blocks"});
    save_sweep_dataset(
        synth_pump_sweep(pump_sweep_from_json(cfg.at("pump_sweep"),
                                              as_red_sideband(scenario), chain),
                         seed),
        (fs::path(out) / "pump_sweep").string(), write_truth);
    save_sweep_dataset(
        synth_temperature_sweep(
            temperature_sweep_from_json(cfg.at("temperature_sweep"), scenario, chain),
            seed + 1),
        (fs::path(out) / "temperature_sweep").string(), write_truth);
    save_sweep_dataset(
        synth_bae_power_sweep(
            bae_sweep_from_json(cfg.at("bae_power_sweep"), scenario, chain), seed + 2),
        (fs::path(out) / "bae_power_sweep").string(), write_truth);
    std::ofstream sout(fs::path(out) / "scenario.json");
    sout << scenario_to_json(scenario).dump(2) << "\n";
  } else {
    throw ConfigError({"synth config: unknown type \"" + type + "\""});
  }
  if (verbose) std::cout << "synth: wrote dataset to " << out << "\n";
  return kExitOk;
}

int cmd_calibrate(const std::string& dataset_dir, const std::string& config_path,
                  const std::string& out, bool force, bool verbose) {
  PipelineConfig cfg;
  if (!config_path.empty()) cfg = pipeline_config_from_json(load_json_file(config_path));
  prepare_out_dir(out, force);
  const PipelineReport report = run_pipeline(dataset_dir, cfg);
  write_pipeline_outputs(report, out);
  std::cout << "pump:        L = " << report.pump.L_hz_per_unit << " Hz/unit ("
            << report.pump.excluded.size() << " excluded)\n"
            << "temperature: H = " << report.temperature.H
            << " flux/K, n_m_T0 = " << report.temperature.n_m_T0 << "\n"
            << "bae:         N = " << report.bae.N << " flux/C, window "
            << report.bae.window_size << "/" << report.bae.points.size()
            << ", X2_ref = " << report.X2_ref << "\n"
            << "evasion:     "
            << (report.evasion.evasion_demonstrated ? "demonstrated" : "not demonstrated")
            << "\n";
  if (verbose) std::cout << "calibrate: wrote report to " << out << "\n";
  return kExitOk;
}

int cmd_selftest(const std::string& mutate) {
  if (!mutate.empty()) {
    const auto targets = selftest::mutation_targets();
    if (std::find(targets.begin(), targets.end(), mutate) == targets.end())
      throw ConfigError({"unknown mutation target \"" + mutate + "\""});
  }
  const auto results = selftest::run_all(mutate);
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("[%s] %-36s %11.3e (tol %.1e)  %s\n", r.pass ? "PASS" : "FAIL",
                r.name.c_str(), r.value, r.tolerance, r.note.c_str());
    all_pass = all_pass && r.pass;
  }
  std::printf("%zu checks, %s\n", results.size(), all_pass ? "all passed" : "FAILURES");
  return all_pass ? kExitOk : kExitRuntime;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Frequency-domain cavity-optomechanics simulator and calibration toolkit"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Chatty progress output");

  std::string sim_config, sim_out;
  bool sim_force = false;
  auto* sim = app.add_subcommand("simulate",
                                 "Closed-form spectra and variance report for a scenario");
  sim->add_option("--config", sim_config, "Scenario JSON")->required();
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_flag("--force", sim_force, "Overwrite a non-empty output directory");

  std::string synth_config, synth_out;
  std::uint64_t synth_seed = 0;
  bool synth_force = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic measured dataset");
  synth->add_option("--config", synth_config, "Sweep JSON")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  auto* seed_opt = synth->add_option("--seed", synth_seed, "Master RNG seed");
  synth->add_flag("--force", synth_force, "Overwrite a non-empty output directory");

  std::string cal_dir, cal_config, cal_out;
  bool cal_force = false;
  auto* cal = app.add_subcommand("calibrate", "Run the calibration pipeline on a dataset");
  cal->add_option("dataset_dir", cal_dir, "Scenario dataset directory")->required();
  cal->add_option("--config", cal_config, "Pipeline JSON");
  cal->add_option("--out", cal_out, "Report directory (default <dataset_dir>/report)");
  cal->add_flag("--force", cal_force, "Overwrite a non-empty report directory");

  std::string mutate;
  auto* self = app.add_subcommand("selftest", "Oracle-equivalence and identity checks");
  self->add_option("--mutate", mutate,
                   "Perturb one closed-form quantity to demonstrate check sensitivity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_config, sim_out, sim_force, verbose);
    if (synth->parsed())
      return cmd_synth(synth_config, synth_out, synth_seed, seed_opt->count() > 0,
                       synth_force, verbose);
    if (cal->parsed())
      return cmd_calibrate(cal_dir, cal_config,
                           cal_out.empty() ? cal_dir + "/report" : cal_out, cal_force,
                           verbose);
    if (self->parsed()) return cmd_selftest(mutate);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CalibrationError& e) {
    std::cerr << "calibration error: " << e.what() << "\n";
    return kExitCalibration;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace optomech::cli
