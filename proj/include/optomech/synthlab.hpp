#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "optomech/config_io.hpp"
#include "optomech/model.hpp"
#include "optomech/trace.hpp"

// Reproducible synthetic "measured" datasets: noisy output spectra,
// temperature sweeps and power sweeps through a lumped amplifier chain.
// Everything an experimenter could not know (chain gain, heating law,
// power-to-coupling constant, per-point occupations) lives in the hidden
// truth record, kept separate from the blind view the calibration consumes.
//
// Determinism contract: identical (config, seed) gives bit-identical
// datasets; per-point RNG streams are split from the master seed, so
// parallel and serial generation agree exactly.
namespace optomech {

// Output cabling, amplification and attenuation lumped into one power
// gain, plus the amplifier's added white noise in detected units.
struct MeasurementChain {
  double gain_A = 1.0;
  double n_add = 0.0;
};

// Phenomenological pump-induced bath heating, as a function of generator
// power: n^T(P) = n^T(0) + a P^b. Lives only here, never in the physics
// core; zero coefficients recover constant baths.
struct HeatingModel {
  double a_m = 0.0;
  double b_m = 1.0;
  double a_c = 0.0;
  double b_c = 1.0;

  double mech(double base, double power) const;
  double cavity(double base, double power) const;
};

// Spectrum-analyzer emulation: per-bin noise follows an N-average
// periodogram (Gamma-distributed with relative std 1/sqrt(n_avg)).
struct NoiseSettings {
  double n_avg = 100.0;
  bool noiseless = false;  // the N -> infinity flag
  int bins = 4096;
  double span_linewidths = 32.0;  // half-span of the record in FWHMs
};

// Optional mechanical-frequency jitter: shifts each point's peak center
// by a normal draw of this many linewidths. Off by default.
struct JitterSettings {
  double center_jitter_linewidths = 0.0;
};

struct SweepPointTruth {
  double axis_value = 0.0;
  double power = 0.0;        // generator power (arbitrary units)
  double C = 0.0;            // regime cooperativity at this point
  double gamma_eff_hz = 0.0;  // true FWHM of the peak
  double n_m_T = 0.0;        // mechanical bath occupation
  double n_c_T = 0.0;        // cavity thermal occupation
  double n_mech = 0.0;       // mode occupation entering the spectrum
  double X2 = 0.0;           // <X^2> (BAE sweeps)
  double flux_device = 0.0;  // peak flux at the device output
  double flux_detected = 0.0;  // gain_A * flux_device
  double center_offset_hz = 0.0;  // jitter draw
};

struct SweepTruth {
  MeasurementChain chain;
  HeatingModel heating;
  double L_hz_per_unit = 0.0;  // gamma_opt/2pi per unit power
  double H = 0.0;              // detected flux per kelvin (asymptotic slope)
  double N = 0.0;              // detected flux per unit BAE cooperativity
  double X2_ref = 0.0;         // unheated <X^2> under the cooling tone
  double T_floor_K = 0.0;
  std::vector<SweepPointTruth> points;
};

struct SweepDataset {
  std::string type;  // pump_sweep | temperature_sweep | bae_power_sweep
  std::uint64_t seed = 0;
  std::string axis_name;
  std::vector<double> axis;
  ScenarioConfig scenario;
  NoiseSettings noise;
  std::vector<SpectrumTrace> traces;
  SweepTruth truth;
  bool has_truth = false;
};

// Single noisy BAE output trace for the given scenario: the ideal output
// spectrum scaled by the chain gain, offset by the amplifier floor, with
// per-bin periodogram noise.
SpectrumTrace synth_output_trace(const ScenarioConfig& scenario,
                                 const MeasurementChain& chain,
                                 const NoiseSettings& noise, std::uint64_t seed);

struct TemperatureSweepConfig {
  ScenarioConfig scenario;  // TwoToneBAE with a cooling tone
  MeasurementChain chain;
  NoiseSettings noise;
  std::vector<double> temperatures_K;
  double T_floor_K = 0.0;  // mode temperature = max(T, T_floor); 0 disables
};

// One noisy trace per cryostat temperature, with n_m^T from the Bose
// occupation at the (possibly floored) mode temperature. Pump-frequency
// tracking is assumed perfect: peaks stay centered.
SweepDataset synth_temperature_sweep(const TemperatureSweepConfig& cfg,
                                     std::uint64_t seed);

struct PumpSweepConfig {
  ScenarioConfig scenario;  // RedSidebandSingleTone
  MeasurementChain chain;
  NoiseSettings noise;
  std::vector<double> powers;
  double L_hz_per_unit = 1.0;  // hidden power-to-damping constant
};

// Red-sideband cooling sweep: per-point linewidth gamma + L P, peak area
// from the sideband-cooled occupation. Feeds the pump calibration.
SweepDataset synth_pump_sweep(const PumpSweepConfig& cfg, std::uint64_t seed);

struct BaePowerSweepConfig {
  ScenarioConfig scenario;  // TwoToneBAE with a fixed cooling tone
  MeasurementChain chain;
  NoiseSettings noise;
  std::vector<double> cooperativities;  // per-tone BAE cooperativities
  double L_hz_per_unit = 1.0;  // hidden: converts C to generator power
  HeatingModel heating;
  JitterSettings jitter;
};

// BAE power sweep at fixed cooling tone: <X^2> from the BAE variance under
// the (possibly heated) baths; every trace keeps the cooling-tone
// linewidth regardless of C.
SweepDataset synth_bae_power_sweep(const BaePowerSweepConfig& cfg,
                                   std::uint64_t seed);

// Directory layout: dataset.json (blind config + seed + axis),
// point_<k>.csv/.json traces, truth.json only when write_truth is set.
void save_sweep_dataset(const SweepDataset& ds, const std::string& dir,
                        bool write_truth);
SweepDataset load_sweep_dataset(const std::string& dir, bool load_truth);

// Worker count honoring the OPTOMECH_THREADS cap (>=1).
int effective_thread_count(int work_items);

}  // namespace optomech
