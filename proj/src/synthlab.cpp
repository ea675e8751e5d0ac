#include "optomech/synthlab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <thread>

#include <json.hpp>

#include "optomech/constants.hpp"
#include "optomech/spectra.hpp"

namespace optomech {

namespace fs = std::filesystem;
using constants::two_pi;

double HeatingModel::mech(double base, double power) const {
  return base + (a_m > 0.0 ? a_m * std::pow(power, b_m) : 0.0);
}

double HeatingModel::cavity(double base, double power) const {
  return base + (a_c > 0.0 ? a_c * std::pow(power, b_c) : 0.0);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t point_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 1));
}

void apply_periodogram_noise(std::vector<double>& values, const NoiseSettings& noise,
                             std::uint64_t seed) {
  if (noise.noiseless) return;
  if (noise.n_avg <= 0.0)
    throw std::domain_error("synthlab: n_avg must be > 0");
  std::mt19937_64 rng(seed);
  // Mean of n_avg averaged periodograms: Gamma(n, 1/n), mean 1, std 1/sqrt(n).
  std::gamma_distribution<double> dist(noise.n_avg, 1.0 / noise.n_avg);
  for (double& v : values) v *= dist(rng);
}

// Cooling-tone bookkeeping for TwoToneBAE scenarios.
struct CoolingState {
  double C_cool = 0.0;
  double gamma_eff = 0.0;  // rad/s
};

CoolingState cooling_state(const ScenarioConfig& s) {
  CoolingState c;
  c.gamma_eff = s.params.gamma;
  if (s.drive.cooling && s.drive.cooling->G > 0.0) {
    const DerivedRates r =
        optical_damping(s.drive.cooling->G, s.params.kappa(), s.params.gamma);
    c.C_cool = r.C;
    c.gamma_eff = r.gamma_eff;
  }
  return c;
}

double mode_occupation(double n_m_T, double n_c_T, double C_cool) {
  return n_m_T / (1.0 + C_cool) + n_c_T;
}

struct DetectedTrace {
  SpectrumTrace trace;
  double flux_device = 0.0;
};

// Detected BAE output spectrum: uniform record centered on the (jittered)
// peak frame, chain applied, periodogram noise on every bin.
DetectedTrace detected_bae_trace(const ScenarioConfig& s, double G_bae,
                                 double gamma_eff, double n_mech,
                                 const MeasurementChain& chain,
                                 const NoiseSettings& noise, std::uint64_t seed,
                                 double center_offset_hz) {
  const double fwhm_hz = gamma_eff / two_pi;
  const double half_span = noise.span_linewidths * fwhm_hz;
  std::vector<double> grid = uniform_grid(-half_span, half_span, noise.bins);

  std::vector<double> shifted(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k)
    shifted[k] = grid[k] - center_offset_hz;
  SpectrumTrace device =
      output_spectrum_bae(shifted, s.params, G_bae, s.baths, gamma_eff, n_mech);

  DetectedTrace out;
  out.trace = make_trace(std::move(grid));
  out.trace.meta.frame = Frame::Rotating;
  out.trace.meta.regime = to_string(Regime::TwoToneBAE);
  out.trace.meta.params_hash = scenario_hash(s);
  out.trace.meta.synthetic = true;
  out.trace.meta.seed = seed;
  out.trace.meta.n_avg = noise.noiseless ? 0.0 : noise.n_avg;
  for (std::size_t k = 0; k < out.trace.size(); ++k)
    out.trace.total[k] = chain.gain_A * device.total[k] + chain.n_add;
  apply_periodogram_noise(out.trace.total, noise, seed);

  const double C_bae = cooperativity(G_bae, s.params.kappa(), s.params.gamma);
  out.flux_device = output_flux_bae(C_bae, s.params.gamma, s.params.kappa_e,
                                    s.params.kappa(), 0.5 + n_mech);
  return out;
}

// Detected single-tone cooling spectrum: Lorentzian of width gamma_eff at
// +f_m carrying the anti-Stokes flux (kappa_e/kappa) gamma_opt n_m.
DetectedTrace detected_sideband_trace(const ScenarioConfig& s, double gamma_opt,
                                      const MeasurementChain& chain,
                                      const NoiseSettings& noise,
                                      std::uint64_t seed) {
  const SystemParams& p = s.params;
  const double gamma_eff = p.gamma + gamma_opt;
  const double C = gamma_opt / p.gamma;
  const double n_c_T = s.baths.n_c_T(p);
  const double n_m = mode_occupation(s.baths.n_m_T, n_c_T, C);
  const double flux_device = p.kappa_e / p.kappa() * gamma_opt * n_m;

  const double f_m = p.omega_m / two_pi;
  const double fwhm_hz = gamma_eff / two_pi;
  const double half_span = noise.span_linewidths * fwhm_hz;
  std::vector<double> grid = uniform_grid(f_m - half_span, f_m + half_span, noise.bins);

  DetectedTrace out;
  out.trace = make_trace(std::move(grid));
  out.trace.meta.frame = Frame::Lab;
  out.trace.meta.regime = to_string(Regime::RedSidebandSingleTone);
  out.trace.meta.params_hash = scenario_hash(s);
  out.trace.meta.synthetic = true;
  out.trace.meta.seed = seed;
  out.trace.meta.n_avg = noise.noiseless ? 0.0 : noise.n_avg;

  const double h = fwhm_hz / 2.0;
  const double floor_device = 0.5 + 4.0 * p.kappa_e / p.kappa() * n_c_T;
  for (std::size_t k = 0; k < out.trace.size(); ++k) {
    const double d = out.trace.freq_hz[k] - f_m;
    const double peak = flux_device / constants::pi * h / (d * d + h * h);
    out.trace.total[k] = chain.gain_A * (floor_device + peak) + chain.n_add;
  }
  apply_periodogram_noise(out.trace.total, noise, seed);
  out.flux_device = flux_device;
  return out;
}

void run_over_points(int n, const std::function<void(int)>& fn) {
  const int threads = effective_thread_count(n);
  if (threads <= 1) {
    for (int k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (int k = t; k < n; k += threads) fn(k);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

int effective_thread_count(int work_items) {
  int limit = static_cast<int>(std::thread::hardware_concurrency());
  if (limit <= 0) limit = 1;
  if (const char* env = std::getenv("OPTOMECH_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) limit = std::min(limit, cap);
  }
  return std::clamp(limit, 1, std::max(work_items, 1));
}

SpectrumTrace synth_output_trace(const ScenarioConfig& scenario,
                                 const MeasurementChain& chain,
                                 const NoiseSettings& noise, std::uint64_t seed) {
  if (scenario.drive.regime != Regime::TwoToneBAE)
    throw std::invalid_argument("synth_output_trace: scenario must be TwoToneBAE");
  validate_params(scenario.params, scenario.drive);
  const CoolingState cool = cooling_state(scenario);
  const double n_c_T = scenario.baths.n_c_T(scenario.params);
  const double n_mech = mode_occupation(scenario.baths.n_m_T, n_c_T, cool.C_cool);
  return detected_bae_trace(scenario, scenario.drive.G, cool.gamma_eff, n_mech,
                            chain, noise, seed, 0.0)
      .trace;
}

SweepDataset synth_temperature_sweep(const TemperatureSweepConfig& cfg,
                                     std::uint64_t seed) {
  if (cfg.scenario.drive.regime != Regime::TwoToneBAE)
    throw std::invalid_argument("synth_temperature_sweep: scenario must be TwoToneBAE");
  validate_params(cfg.scenario.params, cfg.scenario.drive);
  const SystemParams& p = cfg.scenario.params;
  const CoolingState cool = cooling_state(cfg.scenario);
  const double C_bae = cooperativity(cfg.scenario.drive.G, p.kappa(), p.gamma);
  const double n_c_T = cfg.scenario.baths.n_c_T(p);

  SweepDataset ds;
  ds.type = "temperature_sweep";
  ds.seed = seed;
  ds.axis_name = "temperature_K";
  ds.axis = cfg.temperatures_K;
  ds.scenario = cfg.scenario;
  ds.noise = cfg.noise;
  ds.traces.resize(cfg.temperatures_K.size());
  ds.truth.chain = cfg.chain;
  ds.truth.T_floor_K = cfg.T_floor_K;
  ds.truth.points.resize(cfg.temperatures_K.size());
  // Asymptotic detected-flux slope in the thermalized linear regime.
  ds.truth.H = cfg.chain.gain_A * 4.0 * C_bae * p.gamma * p.kappa_e / p.kappa() *
               (p.gamma / cool.gamma_eff) * constants::boltzmann /
               (constants::hbar * p.omega_m);
  ds.has_truth = true;

  run_over_points(static_cast<int>(cfg.temperatures_K.size()), [&](int k) {
    const double T = cfg.temperatures_K[k];
    const double T_mode = std::max(T, cfg.T_floor_K);
    const double n_m_T = bose_occupation(T_mode, p.omega_m);
    const double n_mech = mode_occupation(n_m_T, n_c_T, cool.C_cool);
    const std::uint64_t ps = point_seed(seed, static_cast<std::uint64_t>(k));
    DetectedTrace d = detected_bae_trace(cfg.scenario, cfg.scenario.drive.G,
                                         cool.gamma_eff, n_mech, cfg.chain,
                                         cfg.noise, ps, 0.0);
    d.trace.meta.axis_name = "temperature_K";
    d.trace.meta.axis_value = T;
    ds.traces[k] = std::move(d.trace);
    auto& t = ds.truth.points[k];
    t.axis_value = T;
    t.C = C_bae;
    t.gamma_eff_hz = cool.gamma_eff / two_pi;
    t.n_m_T = n_m_T;
    t.n_c_T = n_c_T;
    t.n_mech = n_mech;
    t.X2 = 0.5 + n_mech;
    t.flux_device = d.flux_device;
    t.flux_detected = cfg.chain.gain_A * d.flux_device;
  });
  return ds;
}

SweepDataset synth_pump_sweep(const PumpSweepConfig& cfg, std::uint64_t seed) {
  if (cfg.scenario.drive.regime != Regime::RedSidebandSingleTone)
    throw std::invalid_argument("synth_pump_sweep: scenario must be RedSidebandSingleTone");
  validate_params(cfg.scenario.params, cfg.scenario.drive);
  if (cfg.L_hz_per_unit <= 0.0)
    throw std::invalid_argument("synth_pump_sweep: L must be > 0");
  const SystemParams& p = cfg.scenario.params;

  SweepDataset ds;
  ds.type = "pump_sweep";
  ds.seed = seed;
  ds.axis_name = "power_au";
  ds.axis = cfg.powers;
  ds.scenario = cfg.scenario;
  ds.noise = cfg.noise;
  ds.traces.resize(cfg.powers.size());
  ds.truth.chain = cfg.chain;
  ds.truth.L_hz_per_unit = cfg.L_hz_per_unit;
  ds.truth.points.resize(cfg.powers.size());
  ds.has_truth = true;

  run_over_points(static_cast<int>(cfg.powers.size()), [&](int k) {
    const double P = cfg.powers[k];
    const double gamma_opt = two_pi * cfg.L_hz_per_unit * P;
    const std::uint64_t ps = point_seed(seed, static_cast<std::uint64_t>(k));
    DetectedTrace d = detected_sideband_trace(cfg.scenario, gamma_opt, cfg.chain,
                                              cfg.noise, ps);
    d.trace.meta.axis_name = "power_au";
    d.trace.meta.axis_value = P;
    ds.traces[k] = std::move(d.trace);
    auto& t = ds.truth.points[k];
    t.axis_value = P;
    t.power = P;
    t.C = gamma_opt / p.gamma;
    t.gamma_eff_hz = (p.gamma + gamma_opt) / two_pi;
    t.n_m_T = cfg.scenario.baths.n_m_T;
    t.n_c_T = cfg.scenario.baths.n_c_T(p);
    t.n_mech = mode_occupation(t.n_m_T, t.n_c_T, t.C);
    t.flux_device = d.flux_device;
    t.flux_detected = cfg.chain.gain_A * d.flux_device;
  });
  return ds;
}

SweepDataset synth_bae_power_sweep(const BaePowerSweepConfig& cfg,
                                   std::uint64_t seed) {
  if (cfg.scenario.drive.regime != Regime::TwoToneBAE)
    throw std::invalid_argument("synth_bae_power_sweep: scenario must be TwoToneBAE");
  validate_params(cfg.scenario.params, cfg.scenario.drive);
  if (cfg.L_hz_per_unit <= 0.0)
    throw std::invalid_argument("synth_bae_power_sweep: L must be > 0");
  const SystemParams& p = cfg.scenario.params;
  const CoolingState cool = cooling_state(cfg.scenario);
  const double gamma_hz = p.gamma / two_pi;
  const double n_m_T0 = cfg.scenario.baths.n_m_T;
  const double n_c_T0 = cfg.scenario.baths.n_c_T(p);

  SweepDataset ds;
  ds.type = "bae_power_sweep";
  ds.seed = seed;
  ds.axis_name = "power_au";
  ds.axis.resize(cfg.cooperativities.size());
  ds.scenario = cfg.scenario;
  ds.noise = cfg.noise;
  ds.traces.resize(cfg.cooperativities.size());
  ds.truth.chain = cfg.chain;
  ds.truth.heating = cfg.heating;
  ds.truth.L_hz_per_unit = cfg.L_hz_per_unit;
  ds.truth.X2_ref = 0.5 + mode_occupation(n_m_T0, n_c_T0, cool.C_cool);
  ds.truth.N = cfg.chain.gain_A * 4.0 * p.gamma * p.kappa_e / p.kappa() *
               ds.truth.X2_ref;
  ds.truth.points.resize(cfg.cooperativities.size());
  ds.has_truth = true;

  for (std::size_t k = 0; k < cfg.cooperativities.size(); ++k)
    ds.axis[k] = cfg.cooperativities[k] * gamma_hz / cfg.L_hz_per_unit;

  run_over_points(static_cast<int>(cfg.cooperativities.size()), [&](int k) {
    const double C_bae = cfg.cooperativities[k];
    const double P = ds.axis[k];
    const double G_bae = 0.5 * std::sqrt(C_bae * p.kappa() * p.gamma);
    const double n_m_T = cfg.heating.mech(n_m_T0, P);
    const double n_c_T = cfg.heating.cavity(n_c_T0, P);
    const double n_mech = mode_occupation(n_m_T, n_c_T, cool.C_cool);
    const std::uint64_t ps = point_seed(seed, static_cast<std::uint64_t>(k));

    double center_offset = 0.0;
    if (cfg.jitter.center_jitter_linewidths > 0.0) {
      std::mt19937_64 jrng(splitmix64(ps ^ 0x6a09e667f3bcc909ull));
      std::normal_distribution<double> nd(0.0, 1.0);
      center_offset = cfg.jitter.center_jitter_linewidths *
                      (cool.gamma_eff / two_pi) * nd(jrng);
    }

    // The heated cavity bath enters through the trace's noise floor.
    ScenarioConfig point_scenario = cfg.scenario;
    point_scenario.baths.n_m_T = n_m_T;
    point_scenario.baths.n_I_T =
        n_c_T * p.kappa() / p.kappa_i;  // invert n_c^T = n_I^T kappa_i/kappa
    DetectedTrace d = detected_bae_trace(point_scenario, G_bae, cool.gamma_eff,
                                         n_mech, cfg.chain, cfg.noise, ps,
                                         center_offset);
    d.trace.meta.axis_name = "power_au";
    d.trace.meta.axis_value = P;
    ds.traces[k] = std::move(d.trace);
    auto& t = ds.truth.points[k];
    t.axis_value = P;
    t.power = P;
    t.C = C_bae;
    t.gamma_eff_hz = cool.gamma_eff / two_pi;
    t.n_m_T = n_m_T;
    t.n_c_T = n_c_T;
    t.n_mech = n_mech;
    t.X2 = 0.5 + n_mech;
    t.flux_device = d.flux_device;
    t.flux_detected = cfg.chain.gain_A * d.flux_device;
    t.center_offset_hz = center_offset;
  });
  return ds;
}

namespace {

nlohmann::json noise_to_json(const NoiseSettings& n) {
  return {{"n_avg", n.n_avg},
          {"noiseless", n.noiseless},
          {"bins", n.bins},
          {"span_linewidths", n.span_linewidths}};
}

NoiseSettings noise_from_json(const nlohmann::json& j) {
  NoiseSettings n;
  n.n_avg = j.value("n_avg", 100.0);
  n.noiseless = j.value("noiseless", false);
  n.bins = j.value("bins", 4096);
  n.span_linewidths = j.value("span_linewidths", 32.0);
  return n;
}

}  // namespace

void save_sweep_dataset(const SweepDataset& ds, const std::string& dir,
                        bool write_truth) {
  fs::create_directories(dir);
  nlohmann::json j;
  j["type"] = ds.type;
  j["seed"] = ds.seed;
  j["axis_name"] = ds.axis_name;
  j["axis"] = ds.axis;
  j["scenario"] = scenario_to_json(ds.scenario);
  j["noise"] = noise_to_json(ds.noise);
  j["points"] = ds.traces.size();
  std::ofstream out(fs::path(dir) / "dataset.json");
  if (!out) throw std::runtime_error("cannot write dataset.json in " + dir);
  out << j.dump(2) << "\n";

  for (std::size_t k = 0; k < ds.traces.size(); ++k)
    save_trace_csv(ds.traces[k],
                   (fs::path(dir) / ("point_" + std::to_string(k) + ".csv")).string());

  if (!write_truth || !ds.has_truth) return;
  nlohmann::json t;
  t["chain"] = {{"gain_A", ds.truth.chain.gain_A}, {"n_add", ds.truth.chain.n_add}};
  t["heating"] = {{"a_m", ds.truth.heating.a_m},
                  {"b_m", ds.truth.heating.b_m},
                  {"a_c", ds.truth.heating.a_c},
                  {"b_c", ds.truth.heating.b_c}};
  t["L_hz_per_unit"] = ds.truth.L_hz_per_unit;
  t["H"] = ds.truth.H;
  t["N"] = ds.truth.N;
  t["X2_ref"] = ds.truth.X2_ref;
  t["T_floor_K"] = ds.truth.T_floor_K;
  t["points"] = nlohmann::json::array();
  for (const auto& pt : ds.truth.points) {
    t["points"].push_back({{"axis_value", pt.axis_value},
                           {"power", pt.power},
                           {"C", pt.C},
                           {"gamma_eff_hz", pt.gamma_eff_hz},
                           {"n_m_T", pt.n_m_T},
                           {"n_c_T", pt.n_c_T},
                           {"n_mech", pt.n_mech},
                           {"X2", pt.X2},
                           {"flux_device", pt.flux_device},
                           {"flux_detected", pt.flux_detected},
                           {"center_offset_hz", pt.center_offset_hz}});
  }
  std::ofstream tout(fs::path(dir) / "truth.json");
  if (!tout) throw std::runtime_error("cannot write truth.json in " + dir);
  tout << t.dump(2) << "\n";
}

SweepDataset load_sweep_dataset(const std::string& dir, bool load_truth) {
  std::ifstream in(fs::path(dir) / "dataset.json");
  if (!in) throw std::runtime_error("missing dataset.json in " + dir);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed dataset.json in " + dir + ": " + e.what());
  }

  SweepDataset ds;
  ds.type = j.value("type", "");
  ds.seed = j.value("seed", std::uint64_t{0});
  ds.axis_name = j.value("axis_name", "");
  ds.axis = j.value("axis", std::vector<double>{});
  ds.scenario = scenario_from_json(j.at("scenario"));
  ds.noise = noise_from_json(j.value("noise", nlohmann::json::object()));
  const std::size_t n = j.value("points", std::size_t{0});
  ds.traces.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto path = fs::path(dir) / ("point_" + std::to_string(k) + ".csv");
    if (!fs::exists(path))
      throw std::runtime_error("missing trace file " + path.string());
    ds.traces.push_back(load_trace_csv(path.string()));
  }

  if (!load_truth) return ds;
  std::ifstream tin(fs::path(dir) / "truth.json");
  if (!tin) throw std::runtime_error("truth.json requested but missing in " + dir);
  nlohmann::json t;
  tin >> t;
  ds.truth.chain.gain_A = t.at("chain").value("gain_A", 1.0);
  ds.truth.chain.n_add = t.at("chain").value("n_add", 0.0);
  ds.truth.heating.a_m = t.at("heating").value("a_m", 0.0);
  ds.truth.heating.b_m = t.at("heating").value("b_m", 1.0);
  ds.truth.heating.a_c = t.at("heating").value("a_c", 0.0);
  ds.truth.heating.b_c = t.at("heating").value("b_c", 1.0);
  ds.truth.L_hz_per_unit = t.value("L_hz_per_unit", 0.0);
  ds.truth.H = t.value("H", 0.0);
  ds.truth.N = t.value("N", 0.0);
  ds.truth.X2_ref = t.value("X2_ref", 0.0);
  ds.truth.T_floor_K = t.value("T_floor_K", 0.0);
  for (const auto& pj : t.value("points", nlohmann::json::array())) {
    SweepPointTruth pt;
    pt.axis_value = pj.value("axis_value", 0.0);
    pt.power = pj.value("power", 0.0);
    pt.C = pj.value("C", 0.0);
    pt.gamma_eff_hz = pj.value("gamma_eff_hz", 0.0);
    pt.n_m_T = pj.value("n_m_T", 0.0);
    pt.n_c_T = pj.value("n_c_T", 0.0);
    pt.n_mech = pj.value("n_mech", 0.0);
    pt.X2 = pj.value("X2", 0.0);
    pt.flux_device = pj.value("flux_device", 0.0);
    pt.flux_detected = pj.value("flux_detected", 0.0);
    pt.center_offset_hz = pj.value("center_offset_hz", 0.0);
    ds.truth.points.push_back(pt);
  }
  ds.has_truth = true;
  return ds;
}

}  // namespace optomech
