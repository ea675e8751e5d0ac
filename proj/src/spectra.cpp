#include "optomech/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "optomech/constants.hpp"

namespace optomech {

using constants::two_pi;

LorentzianPair lorentzian_pair(double omega, double gamma, double omega_m) {
  if (gamma <= 0.0) throw std::domain_error("lorentzian_pair: gamma must be > 0");
  const double hw = gamma / 2.0;
  LorentzianPair lp;
  lp.l_plus = 1.0 / ((omega - omega_m) * (omega - omega_m) + hw * hw);
  lp.l_minus = 1.0 / ((omega + omega_m) * (omega + omega_m) + hw * hw);
  lp.s0 = hw * (lp.l_plus + lp.l_minus);
  return lp;
}

std::vector<double> peak_grid(double center_hz, double fwhm_hz, int n,
                              double span_linewidths) {
  if (n < 2 || fwhm_hz <= 0.0 || span_linewidths <= 0.0)
    throw std::invalid_argument("peak_grid: bad arguments");
  const double h = fwhm_hz / 2.0;
  const double t_max = std::asinh(2.0 * span_linewidths);
  std::vector<double> f(n);
  for (int k = 0; k < n; ++k) {
    const double t = -t_max + 2.0 * t_max * k / (n - 1);
    f[k] = center_hz + h * std::sinh(t);
  }
  return f;
}

std::vector<double> lab_grid(double f_m_hz, double fwhm_hz, int n,
                             double span_linewidths) {
  if (f_m_hz <= 0.0 || fwhm_hz <= 0.0 || n < 16)
    throw std::invalid_argument("lab_grid: bad arguments");
  const double edge = span_linewidths * fwhm_hz;  // core half-span

  // Geometric bridge from the core edge down to zero frequency; without it
  // the trapezoid rule would see one giant interval between the peaks.
  // ratio 1.01 keeps the bridge's trapezoid error below ~5e-5 of the wing
  // mass, i.e. a few 1e-7 of the peak.
  std::vector<double> wing;
  const double ratio = 1.01;
  for (double off = edge * ratio; off < f_m_hz; off *= ratio)
    wing.push_back(f_m_hz - off);

  const int n_core = std::max(16, n / 2 - static_cast<int>(wing.size()) - 1);
  std::vector<double> pos = peak_grid(f_m_hz, fwhm_hz, n_core, span_linewidths);
  pos.insert(pos.end(), wing.begin(), wing.end());
  std::erase_if(pos, [](double f) { return f <= 0.0; });

  std::vector<double> grid;
  grid.reserve(2 * pos.size() + 1);
  for (double f : pos) grid.push_back(-f);
  grid.push_back(0.0);
  grid.insert(grid.end(), pos.begin(), pos.end());
  std::sort(grid.begin(), grid.end());
  // Merged clusters can collide when the peaks are broad; drop duplicates.
  const double min_step = 1e-12 * (f_m_hz + edge);
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [&](double a, double b) { return b - a < min_step; }),
             grid.end());
  return grid;
}

std::vector<double> uniform_grid(double lo_hz, double hi_hz, int bins) {
  if (bins < 2 || hi_hz <= lo_hz)
    throw std::invalid_argument("uniform_grid: bad arguments");
  std::vector<double> f(bins);
  for (int k = 0; k < bins; ++k)
    f[k] = lo_hz + (hi_hz - lo_hz) * k / (bins - 1);
  return f;
}

namespace {

TraceMeta model_meta(Frame frame, Regime regime) {
  TraceMeta m;
  m.frame = frame;
  m.regime = to_string(regime);
  return m;
}

}  // namespace

SpectrumTrace spectrum_x_bad_cavity(std::span<const double> freq_hz,
                                    const SystemParams& p, double G,
                                    const BathState& baths) {
  const double C = cooperativity(G, p.kappa(), p.gamma);
  const double n_c_T = baths.n_c_T(p);
  SpectrumTrace t = make_trace({freq_hz.begin(), freq_hz.end()},
                               model_meta(Frame::Lab, Regime::BadCavitySingleTone));
  for (std::size_t k = 0; k < t.size(); ++k) {
    const auto lp = lorentzian_pair(two_pi * t.freq_hz[k], p.gamma, p.omega_m);
    t.vacuum[k] = 0.5 * p.gamma * lp.l_plus;  // positive-frequency peak only
    t.thermal[k] = lp.s0 * baths.n_m_T;
    t.qba[k] = C * lp.s0;
    t.classical[k] = 2.0 * C * n_c_T * lp.s0;
  }
  rebuild_total(t);
  return t;
}

SpectrumTrace spectrum_x_good_cavity(std::span<const double> freq_hz,
                                     const SystemParams& p, double G,
                                     const BathState& baths) {
  const double C = cooperativity(G, p.kappa(), p.gamma);
  const double n_c_T = baths.n_c_T(p);
  const double gamma_eff = p.gamma * (1.0 + C);
  const double cool = 1.0 / (1.0 + C);  // gamma / gamma_eff
  SpectrumTrace t = make_trace({freq_hz.begin(), freq_hz.end()},
                               model_meta(Frame::Lab, Regime::RedSidebandSingleTone));
  for (std::size_t k = 0; k < t.size(); ++k) {
    const auto lp = lorentzian_pair(two_pi * t.freq_hz[k], gamma_eff, p.omega_m);
    t.vacuum[k] = 0.5 * p.gamma * lp.l_plus;
    t.thermal[k] = cool * lp.s0 * baths.n_m_T;
    t.qba[k] = C * cool * 0.5 * lp.s0;
    t.classical[k] = C * cool * n_c_T * lp.s0;
  }
  rebuild_total(t);
  return t;
}

std::pair<SpectrumTrace, SpectrumTrace> spectrum_quadratures_bae(
    std::span<const double> freq_hz, const SystemParams& p, double G,
    const BathState& baths, double gamma_mech, double n_mech) {
  if (gamma_mech <= 0.0)
    throw std::domain_error("spectrum_quadratures_bae: gamma_mech must be > 0");
  const double n_c_T = baths.n_c_T(p);
  const double ba = 16.0 * G * G / p.kappa();
  SpectrumTrace sx = make_trace({freq_hz.begin(), freq_hz.end()},
                                model_meta(Frame::Rotating, Regime::TwoToneBAE));
  SpectrumTrace sp = sx;
  for (std::size_t k = 0; k < sx.size(); ++k) {
    const double w = two_pi * sx.freq_hz[k];
    const double l0 = 1.0 / (w * w + gamma_mech * gamma_mech / 4.0);
    sx.vacuum[k] = gamma_mech * l0 * 0.5;
    sx.thermal[k] = gamma_mech * l0 * n_mech;
    sp.vacuum[k] = sx.vacuum[k];
    sp.thermal[k] = sx.thermal[k];
    sp.qba[k] = ba * l0 * 0.5;
    sp.classical[k] = ba * l0 * n_c_T;
  }
  rebuild_total(sx);
  rebuild_total(sp);
  return {std::move(sx), std::move(sp)};
}

SpectrumTrace output_spectrum_bae(std::span<const double> freq_hz,
                                  const SystemParams& p, double G,
                                  const BathState& baths, double gamma_mech,
                                  double n_mech) {
  if (gamma_mech <= 0.0)
    throw std::domain_error("output_spectrum_bae: gamma_mech must be > 0");
  const double kappa = p.kappa();
  const double n_c_T = baths.n_c_T(p);
  // 4 C gamma kappa_e / kappa = 16 G^2 kappa_e / kappa^2, independent of
  // which mechanical linewidth is in force.
  const double pref = 16.0 * G * G * p.kappa_e / (kappa * kappa);
  SpectrumTrace t = make_trace({freq_hz.begin(), freq_hz.end()},
                               model_meta(Frame::Rotating, Regime::TwoToneBAE));
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double w = two_pi * t.freq_hz[k];
    const double l0 = 1.0 / (w * w + gamma_mech * gamma_mech / 4.0);
    t.vacuum[k] = pref * gamma_mech * l0 * 0.5;
    t.thermal[k] = pref * gamma_mech * l0 * n_mech;
    t.classical[k] = 4.0 * p.kappa_e / kappa * n_c_T;
    t.floor[k] = 0.5;  // incoming vacuum
  }
  rebuild_total(t);
  return t;
}

SpectrumTrace transduction_spectrum(std::span<const double> freq_hz, Regime regime,
                                    const SystemParams& p, double G,
                                    const BathState& baths, OutputVar v,
                                    AssemblyOptions opts) {
  const double n_mech = opts.n_mech_override.value_or(baths.n_m_T);
  if (n_mech < 0.0 || baths.n_I_T < 0.0)
    throw std::domain_error("transduction_spectrum: occupations must be >= 0");
  const Frame frame = regime == Regime::TwoToneBAE ? Frame::Rotating : Frame::Lab;
  SpectrumTrace t = make_trace({freq_hz.begin(), freq_hz.end()}, model_meta(frame, regime));
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double w = two_pi * t.freq_hz[k];
    const TransductionSet set =
        opts.use_solver ? solve_linear_response(regime, w, p, G)
                        : transduction_closed_form(regime, w, p, G, opts.bae);
    if (!set.row_defined[v])
      throw std::invalid_argument("transduction_spectrum: row not defined by closed form");
    const auto& row = set.coeff[v];
    const double mech = std::norm(row[kMechPosIn]) + std::norm(row[kMechMomIn]);
    const double cav_ext = std::norm(row[kCavXExtIn]) + std::norm(row[kCavPExtIn]);
    const double cav_int = std::norm(row[kCavXIntIn]) + std::norm(row[kCavPIntIn]);
    t.vacuum[k] = 0.5 * mech;
    t.thermal[k] = n_mech * mech;
    t.qba[k] = 0.5 * (cav_ext + cav_int);
    t.classical[k] = baths.n_I_T * cav_int;
  }
  rebuild_total(t);
  return t;
}

namespace {

void check_variance_inputs(double C, double n_m_T, double n_c_T) {
  if (C < 0.0) throw std::domain_error("variance: cooperativity must be >= 0");
  if (n_m_T < 0.0 || n_c_T < 0.0)
    throw std::domain_error("variance: occupations must be >= 0");
}

}  // namespace

VarianceReport variance_bad_cavity(double C, double n_m_T, double n_c_T) {
  check_variance_inputs(C, n_m_T, n_c_T);
  VarianceReport r;
  r.regime = Regime::BadCavitySingleTone;
  r.vacuum = 0.5;
  r.thermal = n_m_T;
  r.qba = C;
  r.classical = 2.0 * C * n_c_T;
  r.variance_x = r.vacuum + r.thermal + r.qba + r.classical;
  r.variance_p = r.variance_x;
  r.n_qba = C;
  return r;
}

VarianceReport variance_good_cavity(double C, double n_m_T, double n_c_T) {
  check_variance_inputs(C, n_m_T, n_c_T);
  const double cool = 1.0 / (1.0 + C);
  VarianceReport r;
  r.regime = Regime::RedSidebandSingleTone;
  r.vacuum = 0.5 * cool;
  r.thermal = n_m_T * cool;
  r.qba = 0.5 * C * cool;
  r.classical = C * n_c_T * cool;
  r.variance_x = r.vacuum + r.thermal + r.qba + r.classical;
  r.variance_p = r.variance_x;
  r.n_m = n_m_T * cool + n_c_T;
  r.n_qba = C / 2.0;
  r.qba_eff = r.qba;
  return r;
}

VarianceReport variance_bae(double C, double n_m_T, double n_c_T) {
  check_variance_inputs(C, n_m_T, n_c_T);
  VarianceReport r;
  r.regime = Regime::TwoToneBAE;
  r.variance_x = 0.5 + n_m_T;  // X carries no backaction
  r.vacuum = 0.5;
  r.thermal = n_m_T;
  r.qba = 2.0 * C;
  r.classical = 4.0 * C * n_c_T;
  r.variance_p = r.vacuum + r.thermal + r.qba + r.classical;
  r.n_qba = C;
  return r;
}

BackactionOccupancy backaction_occupancy(Regime regime, double C) {
  if (C < 0.0) throw std::domain_error("backaction_occupancy: C must be >= 0");
  switch (regime) {
    case Regime::BadCavitySingleTone: return {C, C, C};
    case Regime::RedSidebandSingleTone: return {C / 2.0, C / 2.0, C / 2.0};
    case Regime::TwoToneBAE: return {C, 0.0, 2.0 * C};
  }
  throw std::invalid_argument("backaction_occupancy: unknown regime");
}

double output_flux_bae(double C, double gamma, double kappa_e, double kappa,
                       double X2) {
  if (gamma <= 0.0 || kappa_e <= 0.0 || kappa <= 0.0)
    throw std::domain_error("output_flux_bae: rates must be > 0");
  if (C < 0.0 || X2 < 0.0)
    throw std::domain_error("output_flux_bae: C and <X^2> must be >= 0");
  return 4.0 * C * gamma * kappa_e / kappa * X2;
}

namespace {

double interpolate(std::span<const double> x, std::span<const double> y, double at,
                   std::size_t hint) {
  // hint indexes the first grid point >= at.
  if (hint == 0) return y.front();
  const double x0 = x[hint - 1], x1 = x[hint];
  const double u = (at - x0) / (x1 - x0);
  return y[hint - 1] * (1.0 - u) + y[hint] * u;
}

struct TailEstimate {
  double mass = 0.0;
  bool from_fit = false;
};

// Integral of the spectrum beyond `edge`, away from the band. Fits
// 1/S(f) as a quadratic in edge-relative coordinates; for a Lorentzian
// wing the fit is exact and the tail integrates to an arctan form.
TailEstimate tail_beyond(std::span<const double> f, std::span<const double> s,
                         std::size_t lo, std::size_t hi, double edge, bool right) {
  TailEstimate est;
  constexpr std::size_t kFitPoints = 8;
  if (hi - lo + 1 < kFitPoints) return est;

  const std::size_t first = right ? hi - kFitPoints + 1 : lo;
  const std::size_t edge_k = right ? hi : lo;
  const double span = std::abs(f[first + kFitPoints - 1] - f[first]);
  if (!(span > 0.0)) return est;

  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  for (std::size_t k = first; k < first + kFitPoints; ++k) {
    if (!(s[k] > 0.0)) return est;  // flat/zero wing: no tail mass
    const double x = (f[k] - edge) / span;
    const Eigen::Vector3d row{1.0, x, x * x};
    ata += row * row.transpose();
    atb += row * (1.0 / s[k]);
  }
  const Eigen::Vector3d q = ata.ldlt().solve(atb);
  const double q2 = q[2] / (span * span);
  const double q1 = q[1] / span;
  const double q0 = q[0];
  if (q2 > 0.0) {
    const double c = edge - q1 / (2.0 * q2);  // wing vertex (peak position)
    const double d = q0 - q1 * q1 / (4.0 * q2);
    const bool decaying = right ? edge >= c : edge <= c;
    if (d > 0.0 && decaying) {
      const double z = std::abs(edge - c) * std::sqrt(q2 / d);
      est.mass = (constants::pi / 2.0 - std::atan(z)) / std::sqrt(q2 * d);
      est.from_fit = true;
      return est;
    }
  }
  // Fallback: local decay length from the outermost step; exact for a
  // 1/x^2 wing.
  const std::size_t prev = right ? edge_k - 1 : edge_k + 1;
  const double ds = s[prev] - s[edge_k];
  if (s[edge_k] > 0.0 && ds > 0.0) {
    const double step = std::abs(f[edge_k] - f[prev]);
    est.mass = 2.0 * s[edge_k] * s[edge_k] * step / ds;
  }
  return est;
}

}  // namespace

IntegrationResult integrate_sampled(std::span<const double> freq_hz,
                                    std::span<const double> values,
                                    double band_lo_hz, double band_hi_hz,
                                    TailModel tail) {
  const std::size_t n = freq_hz.size();
  if (n < 2 || values.size() != n)
    throw std::invalid_argument("integrate_sampled: need matching grids of >= 2 points");
  if (!(band_lo_hz < band_hi_hz))
    throw std::invalid_argument("integrate_sampled: empty band");
  if (band_lo_hz < freq_hz.front() || band_hi_hz > freq_hz.back())
    throw std::invalid_argument("integrate_sampled: band outside the sampled grid");

  const auto lo_it = std::lower_bound(freq_hz.begin(), freq_hz.end(), band_lo_hz);
  const auto hi_it = std::upper_bound(freq_hz.begin(), freq_hz.end(), band_hi_hz);
  std::size_t lo = static_cast<std::size_t>(lo_it - freq_hz.begin());
  std::size_t hi = static_cast<std::size_t>(hi_it - freq_hz.begin());  // one past

  double sum = 0.0;
  for (std::size_t k = lo + 1; k < hi; ++k)
    sum += 0.5 * (values[k] + values[k - 1]) * (freq_hz[k] - freq_hz[k - 1]);
  // Partial cells at the band edges.
  if (lo > 0 && freq_hz[lo] > band_lo_hz) {
    const double v = interpolate(freq_hz, values, band_lo_hz, lo);
    sum += 0.5 * (v + values[lo]) * (freq_hz[lo] - band_lo_hz);
  }
  if (hi > 0 && hi <= n && freq_hz[hi - 1] < band_hi_hz) {
    const double v = interpolate(freq_hz, values, band_hi_hz, hi);
    sum += 0.5 * (values[hi - 1] + v) * (band_hi_hz - freq_hz[hi - 1]);
  }

  const TailEstimate left = tail_beyond(freq_hz, values, lo, hi - 1, band_lo_hz, false);
  const TailEstimate right = tail_beyond(freq_hz, values, lo, hi - 1, band_hi_hz, true);
  IntegrationResult r;
  if (tail == TailModel::LorentzianAnalytic) {
    r.value = sum + left.mass + right.mass;
    // Allow a tenth of the correction for tail-model error.
    r.truncation_error = 0.1 * (left.mass + right.mass);
  } else {
    r.value = sum;
    r.truncation_error = left.mass + right.mass;
  }
  return r;
}

IntegrationResult integrate_spectrum(const SpectrumTrace& t, TraceComponent c,
                                     double band_lo_hz, double band_hi_hz,
                                     TailModel tail) {
  return integrate_sampled(t.freq_hz, component(t, c), band_lo_hz, band_hi_hz, tail);
}

IntegrationResult integrate_spectrum(const SpectrumTrace& t, TraceComponent c,
                                     TailModel tail) {
  if (t.size() < 2) throw std::invalid_argument("integrate_spectrum: empty trace");
  return integrate_sampled(t.freq_hz, component(t, c), t.freq_hz.front(),
                           t.freq_hz.back(), tail);
}

}  // namespace optomech
