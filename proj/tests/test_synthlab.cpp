#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "optomech/fitcal.hpp"
#include "optomech/spectra.hpp"
#include "optomech/synthlab.hpp"
#include "test_support.hpp"

using namespace optomech;
using namespace optomech::testing;

namespace {

// TwoToneBAE scenario with a cooling tone broadening the line to ~2.9 Hz.
ScenarioConfig bae_scenario(double C_bae = 2.0, double n_c_T = 0.2) {
  ScenarioConfig s;
  s.params = paper_device();
  s.drive.regime = Regime::TwoToneBAE;
  s.drive.G = coupling_for_C(s.params, C_bae);
  const double gamma_opt_cool = two_pi * 2.9 - s.params.gamma;
  s.drive.cooling =
      CoolingTone{0.5 * std::sqrt(gamma_opt_cool * s.params.kappa()), two_pi * 400.0};
  s.baths = baths_with(bose_occupation(0.037, s.params.omega_m), n_c_T, s.params);
  s.baths.temperature = 0.025;
  return s;
}

}  // namespace

TEST_CASE("synth_output_trace") {
  const ScenarioConfig s = bae_scenario();
  const MeasurementChain chain{2000.0, 10.0};
  SUBCASE("noiseless flag reproduces the scaled model exactly") {
    NoiseSettings noise;
    noise.noiseless = true;
    noise.bins = 1024;
    const SpectrumTrace t = synth_output_trace(s, chain, noise, 5);
    const DerivedRates cool =
        optical_damping(s.drive.cooling->G, s.params.kappa(), s.params.gamma);
    const double n_mech = s.baths.n_m_T / (1.0 + cool.C) + s.baths.n_c_T(s.params);
    const SpectrumTrace model = output_spectrum_bae(
        t.freq_hz, s.params, s.drive.G, s.baths, cool.gamma_eff, n_mech);
    for (std::size_t k = 0; k < t.size(); ++k)
      CHECK(t.total[k] ==
            doctest::Approx(chain.gain_A * model.total[k] + chain.n_add).epsilon(1e-12));
  }
  SUBCASE("deterministic under a fixed seed, different across seeds") {
    NoiseSettings noise;
    noise.bins = 512;
    const SpectrumTrace a = synth_output_trace(s, chain, noise, 42);
    const SpectrumTrace b = synth_output_trace(s, chain, noise, 42);
    const SpectrumTrace c = synth_output_trace(s, chain, noise, 43);
    REQUIRE(a.size() == b.size());
    bool identical = true, differs = false;
    for (std::size_t k = 0; k < a.size(); ++k) {
      identical = identical && a.total[k] == b.total[k];
      differs = differs || a.total[k] != c.total[k];
    }
    CHECK(identical);
    CHECK(differs);
  }
  SUBCASE("Monte-Carlo mean converges to the noiseless trace") {
    NoiseSettings noise;
    noise.bins = 256;
    noise.n_avg = 100.0;
    NoiseSettings off = noise;
    off.noiseless = true;
    const SpectrumTrace ideal = synth_output_trace(s, chain, off, 0);
    std::vector<double> mean(ideal.size(), 0.0);
    const int n_seeds = 1000;
    for (int seed = 0; seed < n_seeds; ++seed) {
      const SpectrumTrace t = synth_output_trace(s, chain, noise, 1000 + seed);
      for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += t.total[k];
    }
    const double sigma_rel = 1.0 / std::sqrt(noise.n_avg);
    for (std::size_t k = 0; k < mean.size(); ++k) {
      mean[k] /= n_seeds;
      CHECK(std::abs(mean[k] - ideal.total[k]) <
            4.0 * sigma_rel / std::sqrt(n_seeds) * ideal.total[k]);
    }
  }
  SUBCASE("per-bin scatter is 1/sqrt(N)") {
    NoiseSettings noise;
    noise.bins = 64;
    noise.n_avg = 100.0;
    NoiseSettings off = noise;
    off.noiseless = true;
    const SpectrumTrace ideal = synth_output_trace(s, chain, off, 0);
    double sum2 = 0.0;
    std::size_t count = 0;
    for (int seed = 0; seed < 400; ++seed) {
      const SpectrumTrace t = synth_output_trace(s, chain, noise, 77 + seed);
      for (std::size_t k = 0; k < t.size(); ++k) {
        const double r = t.total[k] / ideal.total[k] - 1.0;
        sum2 += r * r;
        ++count;
      }
    }
    const double sigma = std::sqrt(sum2 / count);
    CHECK(sigma == doctest::Approx(0.1).epsilon(0.02));
  }
  SUBCASE("zero coupling leaves a flat floor") {
    ScenarioConfig flat = s;
    flat.drive.G = 0.0;
    NoiseSettings noise;
    noise.noiseless = true;
    noise.bins = 256;
    const SpectrumTrace t = synth_output_trace(flat, chain, noise, 0);
    const double expected =
        chain.gain_A * (0.5 + 4.0 * flat.params.kappa_e / flat.params.kappa() *
                                  flat.baths.n_c_T(flat.params)) +
        chain.n_add;
    for (std::size_t k = 0; k < t.size(); ++k)
      CHECK(t.total[k] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("temperature sweep") {
  TemperatureSweepConfig cfg;
  cfg.scenario = bae_scenario();
  cfg.chain = {1500.0, 5.0};
  cfg.noise.bins = 512;
  cfg.temperatures_K = {0.025, 0.05, 0.1, 0.2, 0.3, 0.4};
  SUBCASE("thermal floor bends only the coldest points") {
    cfg.T_floor_K = 0.03;
    const SweepDataset ds = synth_temperature_sweep(cfg, 9);
    REQUIRE(ds.truth.points.size() == 6);
    CHECK(ds.truth.points[0].n_m_T ==
          doctest::Approx(bose_occupation(0.03, cfg.scenario.params.omega_m)));
    for (std::size_t k = 1; k < 6; ++k)
      CHECK(ds.truth.points[k].n_m_T ==
            doctest::Approx(bose_occupation(cfg.temperatures_K[k],
                                            cfg.scenario.params.omega_m)));
  }
  SUBCASE("noiseless peak area tracks the mode energy") {
    cfg.noise.noiseless = true;
    cfg.noise.bins = 8192;
    cfg.noise.span_linewidths = 16.0;
    const SweepDataset ds = synth_temperature_sweep(cfg, 1);
    for (std::size_t k = 0; k < ds.traces.size(); ++k) {
      const LorentzianFit fit = fit_lorentzian(ds.traces[k]);
      CHECK(rel_err(fit.area, ds.truth.points[k].flux_detected) < 1e-4);
      CHECK(rel_err(fit.linewidth_hz, ds.truth.points[k].gamma_eff_hz) < 1e-6);
    }
  }
  SUBCASE("same config, different seeds: same truths, different noise") {
    const SweepDataset a = synth_temperature_sweep(cfg, 5);
    const SweepDataset b = synth_temperature_sweep(cfg, 6);
    for (std::size_t k = 0; k < a.truth.points.size(); ++k)
      CHECK(a.truth.points[k].n_mech == b.truth.points[k].n_mech);
    CHECK(a.traces[0].total != b.traces[0].total);
  }
}

TEST_CASE("pump sweep") {
  PumpSweepConfig cfg;
  cfg.scenario = bae_scenario();
  cfg.scenario.drive.regime = Regime::RedSidebandSingleTone;
  cfg.scenario.drive.G = 0.0;
  cfg.scenario.drive.delta = -cfg.scenario.params.omega_m;
  cfg.scenario.drive.cooling.reset();
  cfg.chain = {2000.0, 10.0};
  cfg.noise.bins = 2048;
  cfg.powers = {50.0, 100.0, 200.0, 400.0};
  cfg.L_hz_per_unit = 1e-3;
  const SweepDataset ds = synth_pump_sweep(cfg, 3);
  SUBCASE("true widths follow gamma + L P") {
    const double gamma_hz = cfg.scenario.params.gamma / two_pi;
    for (std::size_t k = 0; k < ds.truth.points.size(); ++k)
      CHECK(ds.truth.points[k].gamma_eff_hz ==
            doctest::Approx(gamma_hz + 1e-3 * cfg.powers[k]).epsilon(1e-12));
  }
  SUBCASE("fitted widths recover the truth at the percent level") {
    for (std::size_t k = 0; k < ds.traces.size(); ++k) {
      const LorentzianFit fit = fit_lorentzian(ds.traces[k]);
      CHECK(rel_err(fit.linewidth_hz, ds.truth.points[k].gamma_eff_hz) < 0.02);
    }
  }
}

TEST_CASE("BAE power sweep") {
  BaePowerSweepConfig cfg;
  cfg.scenario = bae_scenario();
  cfg.chain = {2000.0, 10.0};
  cfg.noise.bins = 1024;
  cfg.cooperativities = {0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0};
  cfg.L_hz_per_unit = 1e-3;
  SUBCASE("zero heating: flux exactly linear in C") {
    const SweepDataset ds = synth_bae_power_sweep(cfg, 11);
    for (std::size_t k = 0; k < ds.truth.points.size(); ++k)
      CHECK(ds.truth.points[k].flux_detected ==
            doctest::Approx(ds.truth.N * ds.truth.points[k].C).epsilon(1e-12));
  }
  SUBCASE("heating overshoots the linear trend above C ~ 10") {
    cfg.heating.a_m = 6.8e-3;
    cfg.heating.b_m = 2.0;
    const SweepDataset ds = synth_bae_power_sweep(cfg, 11);
    const auto& pts = ds.truth.points;
    CHECK(pts[0].flux_detected / (ds.truth.N * pts[0].C) < 1.02);
    CHECK(pts.back().flux_detected / (ds.truth.N * pts.back().C) > 1.3);
    // X2 rises above the unheated reference only at high C.
    CHECK(rel_err(pts[1].X2, ds.truth.X2_ref) < 0.05);
    CHECK(pts.back().X2 > 1.5 * ds.truth.X2_ref);
  }
  SUBCASE("every trace keeps the cooling-tone linewidth") {
    cfg.cooperativities = {2.0, 5.0, 10.0, 20.0, 50.0};
    cfg.noise.bins = 8192;
    cfg.noise.n_avg = 1000.0;
    const SweepDataset ds = synth_bae_power_sweep(cfg, 13);
    for (std::size_t k = 0; k < ds.traces.size(); ++k) {
      CHECK(ds.truth.points[k].gamma_eff_hz == doctest::Approx(2.9).epsilon(1e-9));
      const LorentzianFit fit = fit_lorentzian(ds.traces[k]);
      CHECK(rel_err(fit.linewidth_hz, 2.9) < 0.05);
    }
  }
}

TEST_CASE("dataset directory round trip") {
  namespace fs = std::filesystem;
  TemperatureSweepConfig cfg;
  cfg.scenario = bae_scenario();
  cfg.chain = {1000.0, 2.0};
  cfg.noise.bins = 256;
  cfg.temperatures_K = {0.1, 0.2, 0.3};
  const SweepDataset ds = synth_temperature_sweep(cfg, 21);

  const auto dir = fs::temp_directory_path() / "optomech_ds_test";
  fs::remove_all(dir);
  SUBCASE("blind view carries no truth") {
    save_sweep_dataset(ds, dir.string(), false);
    CHECK_FALSE(fs::exists(dir / "truth.json"));
    const SweepDataset blind = load_sweep_dataset(dir.string(), false);
    CHECK_FALSE(blind.has_truth);
    CHECK(blind.truth.points.empty());
    REQUIRE(blind.traces.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(blind.traces[k].total == ds.traces[k].total);      // bit-exact
      CHECK(blind.traces[k].freq_hz == ds.traces[k].freq_hz);  // bit-exact
    }
    CHECK(blind.axis == ds.axis);
    CHECK(blind.scenario.params.omega_m ==
          doctest::Approx(ds.scenario.params.omega_m).epsilon(1e-15));
    CHECK_THROWS(load_sweep_dataset(dir.string(), true));
  }
  SUBCASE("truth round-trips when requested") {
    save_sweep_dataset(ds, dir.string(), true);
    const SweepDataset back = load_sweep_dataset(dir.string(), true);
    REQUIRE(back.has_truth);
    CHECK(back.truth.chain.gain_A == ds.truth.chain.gain_A);
    CHECK(back.truth.H == doctest::Approx(ds.truth.H).epsilon(1e-15));
    REQUIRE(back.truth.points.size() == 3);
    CHECK(back.truth.points[2].n_m_T ==
          doctest::Approx(ds.truth.points[2].n_m_T).epsilon(1e-15));
  }
  SUBCASE("missing trace file is reported by name") {
    save_sweep_dataset(ds, dir.string(), false);
    fs::remove(dir / "point_1.csv");
    try {
      load_sweep_dataset(dir.string(), false);
      FAIL("expected an error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("point_1.csv") != std::string::npos);
    }
  }
}

TEST_CASE("thread cap honors OPTOMECH_THREADS") {
  setenv("OPTOMECH_THREADS", "1", 1);
  CHECK(effective_thread_count(8) == 1);
  setenv("OPTOMECH_THREADS", "4", 1);
  CHECK(effective_thread_count(2) <= 2);
  CHECK(effective_thread_count(100) <= 4);
  unsetenv("OPTOMECH_THREADS");

  // Parallel and serial generation agree bit-exactly (per-point streams).
  TemperatureSweepConfig cfg;
  cfg.scenario = bae_scenario();
  cfg.noise.bins = 128;
  cfg.temperatures_K = {0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45};
  setenv("OPTOMECH_THREADS", "1", 1);
  const SweepDataset serial = synth_temperature_sweep(cfg, 33);
  setenv("OPTOMECH_THREADS", "8", 1);
  const SweepDataset parallel = synth_temperature_sweep(cfg, 33);
  unsetenv("OPTOMECH_THREADS");
  for (std::size_t k = 0; k < serial.traces.size(); ++k)
    CHECK(serial.traces[k].total == parallel.traces[k].total);
}
