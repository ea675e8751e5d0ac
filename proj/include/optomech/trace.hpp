#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Sampled spectral densities. Values are the dimensionless S[omega] of the
// model (quanta x seconds for mechanical spectra, quanta for photon-flux
// spectra), sampled at omega = 2 pi f on a grid stored in Hz, so plain
// integration over the Hz grid implements (1/2pi) int S d omega.
namespace optomech {

enum class Frame {
  Lab,       // two-sided, double Lorentzian at +/- f_m
  Rotating,  // quadrature frame, single peak at zero frequency
};

std::string to_string(Frame f);
Frame frame_from_string(const std::string& name);

struct TraceMeta {
  Frame frame = Frame::Lab;
  std::string regime;       // empty when not tied to a pump regime
  std::string params_hash;  // scenario hash; empty for ad-hoc traces
  bool synthetic = false;   // true: noisy measured trace, components unused
  std::uint64_t seed = 0;   // RNG seed for synthetic traces
  double n_avg = 0.0;       // periodogram averaging count (0 = model trace)
  std::string axis_name;    // sweep axis, e.g. "temperature_K"
  double axis_value = 0.0;
};

// Component-decomposed PSD on a strictly increasing frequency grid.
// Model traces satisfy total = vacuum + thermal + qba + classical + floor;
// synthetic traces carry noise in `total` and leave components zero.
struct SpectrumTrace {
  std::vector<double> freq_hz;
  std::vector<double> total;
  std::vector<double> vacuum;
  std::vector<double> thermal;
  std::vector<double> qba;        // quantum backaction
  std::vector<double> classical;  // cavity-noise backaction
  std::vector<double> floor;      // flat noise floor (input + amplifier)
  TraceMeta meta;

  std::size_t size() const { return freq_hz.size(); }
};

// Names a component column for integration and export.
enum class TraceComponent { Total, Vacuum, Thermal, Qba, Classical, Floor };

const std::vector<double>& component(const SpectrumTrace& t, TraceComponent c);

// Allocates all component vectors at the grid's size, zero-filled.
SpectrumTrace make_trace(std::vector<double> freq_hz, TraceMeta meta = {});

// Recomputes total as the component sum (model traces only).
void rebuild_total(SpectrumTrace& t);

// Checks grid monotonicity, non-negative totals, and (for model traces)
// that components sum to the total within 1e-12 relative.
// Throws std::runtime_error on violation.
void validate_trace(const SpectrumTrace& t);

// CSV with header `freq_hz,total,vacuum,thermal,qba,classical,floor` at
// 17 significant digits (bit-exact round trip), plus a JSON sidecar
// `<base>.json` holding the metadata.
void save_trace_csv(const SpectrumTrace& t, const std::string& csv_path);
SpectrumTrace load_trace_csv(const std::string& csv_path);

}  // namespace optomech
