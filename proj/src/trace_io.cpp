#include "optomech/trace.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace optomech {

namespace {

std::string sidecar_path(const std::string& csv_path) {
  const auto dot = csv_path.rfind('.');
  const std::string base =
      dot == std::string::npos ? csv_path : csv_path.substr(0, dot);
  return base + ".json";
}

void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

std::string to_string(Frame f) {
  return f == Frame::Lab ? "lab" : "rotating";
}

Frame frame_from_string(const std::string& name) {
  if (name == "lab") return Frame::Lab;
  if (name == "rotating") return Frame::Rotating;
  throw std::runtime_error("unknown frame \"" + name + "\"");
}

const std::vector<double>& component(const SpectrumTrace& t, TraceComponent c) {
  switch (c) {
    case TraceComponent::Total: return t.total;
    case TraceComponent::Vacuum: return t.vacuum;
    case TraceComponent::Thermal: return t.thermal;
    case TraceComponent::Qba: return t.qba;
    case TraceComponent::Classical: return t.classical;
    case TraceComponent::Floor: return t.floor;
  }
  throw std::logic_error("unknown trace component");
}

SpectrumTrace make_trace(std::vector<double> freq_hz, TraceMeta meta) {
  SpectrumTrace t;
  const std::size_t n = freq_hz.size();
  t.freq_hz = std::move(freq_hz);
  t.total.assign(n, 0.0);
  t.vacuum.assign(n, 0.0);
  t.thermal.assign(n, 0.0);
  t.qba.assign(n, 0.0);
  t.classical.assign(n, 0.0);
  t.floor.assign(n, 0.0);
  t.meta = std::move(meta);
  return t;
}

void rebuild_total(SpectrumTrace& t) {
  for (std::size_t k = 0; k < t.size(); ++k)
    t.total[k] = t.vacuum[k] + t.thermal[k] + t.qba[k] + t.classical[k] + t.floor[k];
}

void validate_trace(const SpectrumTrace& t) {
  const std::size_t n = t.size();
  for (const auto* v : {&t.total, &t.vacuum, &t.thermal, &t.qba, &t.classical, &t.floor})
    if (v->size() != n) throw std::runtime_error("trace: component length mismatch");
  for (std::size_t k = 1; k < n; ++k)
    if (!(t.freq_hz[k] > t.freq_hz[k - 1]))
      throw std::runtime_error("trace: frequency grid not strictly increasing");
  for (std::size_t k = 0; k < n; ++k)
    if (t.total[k] < 0.0) throw std::runtime_error("trace: negative total PSD");
  if (t.meta.synthetic) return;
  for (std::size_t k = 0; k < n; ++k) {
    const double sum =
        t.vacuum[k] + t.thermal[k] + t.qba[k] + t.classical[k] + t.floor[k];
    const double scale = std::max(std::abs(t.total[k]), 1e-300);
    if (std::abs(sum - t.total[k]) > 1e-12 * scale)
      throw std::runtime_error("trace: components do not sum to total");
  }
}

void save_trace_csv(const SpectrumTrace& t, const std::string& csv_path) {
  std::string body = "freq_hz,total,vacuum,thermal,qba,classical,floor\n";
  body.reserve(body.size() + t.size() * 140);
  for (std::size_t k = 0; k < t.size(); ++k) {
    append_double(body, t.freq_hz[k]);
    for (const auto* v : {&t.total, &t.vacuum, &t.thermal, &t.qba, &t.classical, &t.floor}) {
      body += ',';
      append_double(body, (*v)[k]);
    }
    body += '\n';
  }
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("cannot write " + csv_path);
  out << body;

  nlohmann::json j;
  j["frame"] = to_string(t.meta.frame);
  j["regime"] = t.meta.regime;
  j["params_hash"] = t.meta.params_hash;
  j["synthetic"] = t.meta.synthetic;
  j["seed"] = t.meta.seed;
  j["n_avg"] = t.meta.n_avg;
  j["axis_name"] = t.meta.axis_name;
  j["axis_value"] = t.meta.axis_value;
  std::ofstream side(sidecar_path(csv_path));
  if (!side) throw std::runtime_error("cannot write " + sidecar_path(csv_path));
  side << j.dump(2) << "\n";
}

SpectrumTrace load_trace_csv(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "freq_hz,total,vacuum,thermal,qba,classical,floor")
    throw std::runtime_error("bad trace header in " + csv_path);

  SpectrumTrace t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    double v[7];
    const char* s = line.c_str();
    for (int i = 0; i < 7; ++i) {
      char* end = nullptr;
      v[i] = std::strtod(s, &end);
      if (end == s)
        throw std::runtime_error("corrupted trace row " + std::to_string(lineno) +
                                 " in " + csv_path);
      s = end;
      if (i < 6) {
        if (*s != ',')
          throw std::runtime_error("corrupted trace row " + std::to_string(lineno) +
                                   " in " + csv_path);
        ++s;
      }
    }
    t.freq_hz.push_back(v[0]);
    t.total.push_back(v[1]);
    t.vacuum.push_back(v[2]);
    t.thermal.push_back(v[3]);
    t.qba.push_back(v[4]);
    t.classical.push_back(v[5]);
    t.floor.push_back(v[6]);
  }

  std::ifstream side(sidecar_path(csv_path));
  if (side) {
    nlohmann::json j;
    try {
      side >> j;
      t.meta.frame = frame_from_string(j.value("frame", "lab"));
      t.meta.regime = j.value("regime", "");
      t.meta.params_hash = j.value("params_hash", "");
      t.meta.synthetic = j.value("synthetic", false);
      t.meta.seed = j.value("seed", std::uint64_t{0});
      t.meta.n_avg = j.value("n_avg", 0.0);
      t.meta.axis_name = j.value("axis_name", "");
      t.meta.axis_value = j.value("axis_value", 0.0);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("corrupted trace sidecar for " + csv_path + ": " +
                               e.what());
    }
  }
  return t;
}

}  // namespace optomech
