#include "optomech/fitcal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "optomech/constants.hpp"

namespace optomech {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  return v[n / 2];
}

// theta = (floor, area, center, fwhm) in normalized coordinates.
struct PeakModel {
  static double eval(const Eigen::Vector4d& th, double u) {
    return lorentzian_peak_model(u, th[0], th[1], th[2], th[3]);
  }
  static Eigen::Vector4d jacobian_row(const Eigen::Vector4d& th, double u) {
    const auto g = lorentzian_peak_gradient(u, th[0], th[1], th[2], th[3]);
    return Eigen::Vector4d{g[0], g[1], g[2], g[3]};
  }
};

struct GnResult {
  Eigen::Vector4d theta;
  double rss = kInf;
  int iterations = 0;
  bool converged = false;
};

// Weighted damped Gauss-Newton; empty weights mean equal weights.
GnResult gauss_newton_peak(std::span<const double> u, std::span<const double> y,
                           Eigen::Vector4d theta,
                           std::span<const double> w = {}) {
  const std::size_t n = u.size();
  GnResult best;
  double lambda = 1e-3;
  auto wt = [&](std::size_t k) { return w.empty() ? 1.0 : w[k]; };
  auto rss_of = [&](const Eigen::Vector4d& th) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double r = y[k] - PeakModel::eval(th, u[k]);
      s += wt(k) * r * r;
    }
    return s;
  };
  double rss = rss_of(theta);
  int stalled = 0;
  for (int it = 0; it < 300; ++it) {
    Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
    Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
    for (std::size_t k = 0; k < n; ++k) {
      const Eigen::Vector4d j = PeakModel::jacobian_row(theta, u[k]);
      const double r = y[k] - PeakModel::eval(theta, u[k]);
      jtj += wt(k) * j * j.transpose();
      jtr += wt(k) * j * r;
    }
    bool stepped = false;
    for (int tries = 0; tries < 12 && !stepped; ++tries) {
      Eigen::Matrix4d damped = jtj;
      for (int i = 0; i < 4; ++i)
        damped(i, i) += lambda * std::max(jtj(i, i), 1e-12);
      const Eigen::Vector4d delta = damped.ldlt().solve(jtr);
      Eigen::Vector4d cand = theta + delta;
      cand[3] = std::max(cand[3], 1e-12);  // keep the width positive
      const double cand_rss = rss_of(cand);
      if (cand_rss <= rss) {
        const double step = delta.cwiseAbs().maxCoeff();
        const double scale = theta.cwiseAbs().maxCoeff() + 1e-30;
        const double gain = rss - cand_rss;
        theta = cand;
        rss = cand_rss;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        // Converged once steps or objective improvements become noise.
        stalled = gain <= 1e-12 * (rss + 1e-300) ? stalled + 1 : 0;
        if (step < 1e-10 * scale || stalled >= 3) {
          best.theta = theta;
          best.rss = rss;
          best.iterations = it + 1;
          best.converged = true;
          return best;
        }
      } else {
        lambda *= 10.0;
      }
    }
    best.theta = theta;
    best.rss = rss;
    best.iterations = it + 1;
    if (!stepped) {  // stuck: no downhill direction at any damping
      best.converged = true;
      return best;
    }
  }
  // Iteration budget exhausted; report the best point, unconverged.
  return best;
}

// Moving average used only to build starting guesses; the fit itself runs
// on the raw samples.
std::vector<double> boxcar(std::span<const double> y, std::size_t half) {
  const std::size_t n = y.size();
  std::vector<double> out(n);
  double acc = 0.0;
  std::size_t lo = 0, hi = 0;  // window [lo, hi)
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t want_lo = k > half ? k - half : 0;
    const std::size_t want_hi = std::min(n, k + half + 1);
    while (hi < want_hi) acc += y[hi++];
    while (lo < want_lo) acc -= y[lo++];
    out[k] = acc / static_cast<double>(hi - lo);
  }
  return out;
}

}  // namespace

double lorentzian_peak_model(double f, double floor, double area, double center,
                             double fwhm) {
  const double h = fwhm / 2.0;
  const double d = f - center;
  return floor + area / constants::pi * h / (d * d + h * h);
}

std::array<double, 4> lorentzian_peak_gradient(double f, double /*floor*/,
                                               double area, double center,
                                               double fwhm) {
  const double h = fwhm / 2.0;
  const double d = f - center;
  const double den = d * d + h * h;
  return {1.0, h / (constants::pi * den),
          area / constants::pi * h * 2.0 * d / (den * den),
          area / constants::pi * 0.5 * (d * d - h * h) / (den * den)};
}

LorentzianFit fit_lorentzian(std::span<const double> freq_hz,
                             std::span<const double> values) {
  const std::size_t n = freq_hz.size();
  if (n < 8 || values.size() != n)
    throw FitError("fit_lorentzian: need at least 8 samples");

  // Normalize both axes: fits become invariant under overall gain and
  // frequency offset, and the normal equations stay well conditioned.
  const double f_lo = freq_hz.front(), f_hi = freq_hz.back();
  const double f_span = f_hi - f_lo;
  if (!(f_span > 0.0)) throw FitError("fit_lorentzian: degenerate grid");
  const double y_scale = std::max(
      std::abs(*std::max_element(values.begin(), values.end())),
      std::abs(*std::min_element(values.begin(), values.end())));

  std::vector<double> u(n), y(n);
  for (std::size_t k = 0; k < n; ++k) {
    u[k] = (freq_hz[k] - f_lo) / f_span;
    y[k] = y_scale > 0.0 ? values[k] / y_scale : 0.0;
  }

  // Seeds from smoothed moments; smoothing keeps single-bin noise spikes
  // from hijacking the peak estimates when the line is buried.
  const double floor0 = median(y);
  const std::vector<double> ys = boxcar(y, std::max<std::size_t>(2, n / 512));
  const std::size_t k_max = static_cast<std::size_t>(
      std::max_element(ys.begin(), ys.end()) - ys.begin());
  const double height0 = std::max(ys[k_max] - floor0, 1e-9);
  double above = 0.0;  // u-extent of the smoothed half-max region
  for (std::size_t k = 1; k < n; ++k)
    if (0.5 * (ys[k] + ys[k - 1]) - floor0 > height0 / 2.0) above += u[k] - u[k - 1];
  const double width0 = std::clamp(above, 4.0 / static_cast<double>(n), 1.0);
  // Moments restricted to the peak neighborhood.
  double num = 0.0, den = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double mid = 0.5 * (u[k] + u[k - 1]);
    if (std::abs(mid - u[k_max]) > 6.0 * width0) continue;
    const double yc = std::max(0.5 * (ys[k] + ys[k - 1]) - floor0, 0.0);
    const double du = u[k] - u[k - 1];
    num += mid * yc * du;
    den += yc * du;
  }
  const double center0 = den > 0.0 ? num / den : u[k_max];
  const double area0 = std::max(std::max(den, height0 * width0), 1e-12);

  GnResult best;
  const double starts[][2] = {{1.0, center0},  {0.3, center0}, {3.0, center0},
                              {1.0, u[k_max]}, {8.0, u[k_max]}};
  for (const auto& s : starts) {
    Eigen::Vector4d seed{floor0, area0 * std::sqrt(s[0]), s[1], width0 * s[0]};
    const GnResult r = gauss_newton_peak(u, y, seed);
    if (r.converged && (!best.converged || r.rss < best.rss)) best = r;
    if (!best.converged && r.rss < best.rss) best = r;
    if (best.converged && best.rss < 1e-20 * n) break;  // exact-model fit
  }
  if (!best.converged) {
    std::ostringstream msg;
    msg << "fit_lorentzian: no start converged within budget (best rss "
        << best.rss * y_scale * y_scale << ")";
    throw FitError(msg.str());
  }

  // Averaged-periodogram noise scales with the spectrum itself, so refine
  // with 1/model^2 weights (IRLS). This is the efficient estimator for
  // that noise and makes the reported errors consistent near the peak,
  // where the absolute scatter is largest.
  std::vector<double> w(n);
  for (int cycle = 0; cycle < 2; ++cycle) {
    double mscale = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      mscale = std::max(mscale, std::abs(PeakModel::eval(best.theta, u[k])));
    if (!(mscale > 0.0)) break;
    for (std::size_t k = 0; k < n; ++k) {
      const double m = std::max(std::abs(PeakModel::eval(best.theta, u[k])),
                                1e-3 * mscale);
      w[k] = 1.0 / (m * m);
    }
    const GnResult refined = gauss_newton_peak(u, y, best.theta, w);
    if (!refined.converged) break;
    best = refined;
  }

  const Eigen::Vector4d th = best.theta;
  // Covariance from the weighted Jacobian at the solution.
  Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
  double wrss = 0.0, urss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::Vector4d j = PeakModel::jacobian_row(th, u[k]);
    const double wk = w[k] > 0.0 ? w[k] : 1.0;
    jtj += wk * j * j.transpose();
    const double r = y[k] - PeakModel::eval(th, u[k]);
    wrss += wk * r * r;
    urss += r * r;
  }
  const double dof = static_cast<double>(n) - 4.0;
  const double sigma2 = dof > 0.0 ? wrss / dof : kInf;
  const Eigen::Matrix4d cov =
      sigma2 * jtj.ldlt().solve(Eigen::Matrix4d::Identity());

  LorentzianFit out;
  out.floor = th[0] * y_scale;
  out.area = th[1] * y_scale * f_span;
  out.center_hz = f_lo + th[2] * f_span;
  out.linewidth_hz = th[3] * f_span;
  auto err = [&](int i) { return cov(i, i) > 0.0 ? std::sqrt(cov(i, i)) : kInf; };
  out.floor_err = err(0) * y_scale;
  out.area_err = err(1) * y_scale * f_span;
  out.center_err = err(2) * f_span;
  out.linewidth_err = err(3) * f_span;
  out.residual_rms = std::sqrt(urss / n) * y_scale;
  const double height = th[1] / constants::pi / (th[3] / 2.0);
  out.snr = out.residual_rms > 0.0 ? height * y_scale / out.residual_rms : kInf;
  const double median_step = f_span / static_cast<double>(n - 1);
  out.converged = true;
  out.low_confidence =
      !(out.snr >= 5.0) || out.area <= 0.0 || out.linewidth_hz < 2.0 * median_step;
  out.iterations = best.iterations;
  return out;
}

LorentzianFit fit_lorentzian(const SpectrumTrace& trace) {
  return fit_lorentzian(trace.freq_hz, trace.total);
}

namespace {

LinearFit weighted_line(std::span<const double> xs, std::span<const double> ys,
                        std::span<const double> weights, bool origin) {
  const std::size_t n = xs.size();
  if (n < 2 || ys.size() != n)
    throw FitError("linear fit: need at least 2 points");
  if (!weights.empty() && weights.size() != n)
    throw FitError("linear fit: weight length mismatch");
  auto w = [&](std::size_t k) { return weights.empty() ? 1.0 : weights[k]; };

  double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0, swxy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sw += w(k);
    swx += w(k) * xs[k];
    swy += w(k) * ys[k];
    swxx += w(k) * xs[k] * xs[k];
    swxy += w(k) * xs[k] * ys[k];
  }
  if (swxx <= 0.0) throw FitError("linear fit: all x are zero (singular)");

  LinearFit out;
  out.through_origin = origin;
  double dof;
  if (origin) {
    out.slope = swxy / swxx;
    dof = static_cast<double>(n) - 1.0;
  } else {
    const double det = sw * swxx - swx * swx;
    if (det <= 0.0) throw FitError("linear fit: singular design (identical x)");
    out.slope = (sw * swxy - swx * swy) / det;
    out.intercept = (swxx * swy - swx * swxy) / det;
    dof = static_cast<double>(n) - 2.0;
  }

  double rss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = ys[k] - (out.slope * xs[k] + out.intercept);
    rss += w(k) * r * r;
  }
  out.dof_warning = dof <= 0.0;
  const double s2 = dof > 0.0 ? rss / dof : kInf;
  out.reduced_residual = dof > 0.0 ? rss / dof : 0.0;
  if (origin) {
    out.slope_err = dof > 0.0 ? std::sqrt(s2 / swxx) : kInf;
  } else {
    const double det = sw * swxx - swx * swx;
    out.slope_err = dof > 0.0 ? std::sqrt(s2 * sw / det) : kInf;
    out.intercept_err = dof > 0.0 ? std::sqrt(s2 * swxx / det) : kInf;
  }
  return out;
}

}  // namespace

LinearFit fit_linear_through_origin(std::span<const double> xs,
                                    std::span<const double> ys,
                                    std::span<const double> weights) {
  return weighted_line(xs, ys, weights, true);
}

LinearFit fit_linear_free_intercept(std::span<const double> xs,
                                    std::span<const double> ys,
                                    std::span<const double> weights) {
  return weighted_line(xs, ys, weights, false);
}

PumpCalibration calibrate_pump(std::span<const PumpPoint> points,
                               const SystemParams& params) {
  if (points.size() < 2)
    throw CalibrationError("calibrate_pump: need at least 2 points");
  const double gamma_hz = params.gamma / constants::two_pi;

  PumpCalibration out;
  std::vector<double> xs, ys, ws;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double gamma_opt = points[k].gamma_eff_hz - gamma_hz;
    if (gamma_opt <= 0.0) {
      out.excluded.push_back(k);
      continue;
    }
    xs.push_back(points[k].power);
    ys.push_back(gamma_opt);
    const double e = points[k].gamma_eff_err_hz;
    ws.push_back(e > 0.0 ? 1.0 / (e * e) : 1.0);
  }
  if (xs.size() < 2)
    throw CalibrationError("calibrate_pump: fewer than 2 usable points");

  out.fit = fit_linear_through_origin(xs, ys, ws);
  out.L_hz_per_unit = out.fit.slope;
  out.L_err = out.fit.slope_err;
  if (out.L_hz_per_unit <= 0.0)
    throw CalibrationError("calibrate_pump: non-positive L");
  out.J = constants::two_pi * out.L_hz_per_unit * params.kappa() / 4.0;
  out.J_err = constants::two_pi * out.L_err * params.kappa() / 4.0;
  out.C.reserve(points.size());
  for (const auto& pt : points) {
    out.C.push_back(out.L_hz_per_unit * pt.power / gamma_hz);
    out.C_err.push_back(out.L_err * pt.power / gamma_hz);
  }
  return out;
}

TemperatureCalibration calibrate_temperature_sweep(
    std::span<const TemperaturePoint> points, double omega_m,
    TemperatureCalOptions opts) {
  if (omega_m <= 0.0)
    throw CalibrationError("calibrate_temperature_sweep: omega_m must be > 0");
  std::vector<double> xs, ys, ws;
  for (const auto& pt : points) {
    if (pt.temperature_K < opts.band_lo_K || pt.temperature_K > opts.band_hi_K)
      continue;
    xs.push_back(pt.temperature_K);
    ys.push_back(pt.flux);
    ws.push_back(pt.flux_err > 0.0 ? 1.0 / (pt.flux_err * pt.flux_err) : 1.0);
  }
  if (xs.size() < 2)
    throw CalibrationError(
        "calibrate_temperature_sweep: fewer than 2 points in the fit band");

  TemperatureCalibration out;
  out.fit = opts.subtract_intercept ? fit_linear_free_intercept(xs, ys, ws)
                                    : fit_linear_through_origin(xs, ys, ws);
  out.H = out.fit.slope;
  out.H_err = out.fit.slope_err;
  out.intercept = out.fit.intercept;
  out.intercept_err = out.fit.intercept_err;
  if (out.H <= 0.0)
    throw CalibrationError("calibrate_temperature_sweep: non-positive H");

  const double quanta_per_kelvin =
      constants::boltzmann / (constants::hbar * omega_m);
  out.n_m_T.reserve(points.size());
  for (const auto& pt : points) {
    const double n = (pt.flux - out.intercept) / out.H * quanta_per_kelvin;
    double var = 0.0;
    if (pt.flux_err > 0.0) var += pt.flux_err * pt.flux_err;
    if (std::isfinite(out.intercept_err)) var += out.intercept_err * out.intercept_err;
    double n_err = std::sqrt(var) / out.H * quanta_per_kelvin;
    if (std::isfinite(out.H_err) && out.H > 0.0)
      n_err = std::hypot(n_err, n * out.H_err / out.H);
    out.n_m_T.push_back(n);
    out.n_m_T_err.push_back(n_err);
    const double bose = bose_occupation(pt.temperature_K, omega_m);
    out.decoupled.push_back(n > bose * (1.0 + opts.decoupling_threshold));
  }

  // Base-temperature calibration value.
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return points[a].temperature_K < points[b].temperature_K;
  });
  if (opts.estimator == NmT0Estimator::LowestTwoAverage && points.size() >= 2) {
    out.n_m_T0 = 0.5 * (out.n_m_T[order[0]] + out.n_m_T[order[1]]);
    out.n_m_T0_err =
        0.5 * std::hypot(out.n_m_T_err[order[0]], out.n_m_T_err[order[1]]);
  } else {
    out.n_m_T0 = out.n_m_T[order[0]];
    out.n_m_T0_err = out.n_m_T_err[order[0]];
  }
  return out;
}

BaeFluxCalibration calibrate_bae_flux(std::span<const BaeFluxPoint> points,
                                      double X2_ref, BaeFluxOptions opts) {
  if (points.size() < opts.min_window)
    throw CalibrationError("calibrate_bae_flux: too few points");
  if (X2_ref <= 0.0)
    throw CalibrationError("calibrate_bae_flux: X2_ref must be > 0");

  BaeFluxCalibration out;
  out.points.assign(points.begin(), points.end());
  std::sort(out.points.begin(), out.points.end(),
            [](const BaeFluxPoint& a, const BaeFluxPoint& b) { return a.C < b.C; });

  std::vector<double> xs, ys, ws;
  for (const auto& pt : out.points) {
    xs.push_back(pt.C);
    ys.push_back(pt.flux);
    ws.push_back(pt.flux_err > 0.0 ? 1.0 / (pt.flux_err * pt.flux_err) : 1.0);
  }

  // Largest low-C prefix that still fits a line through the origin.
  std::size_t window = 0;
  LinearFit window_fit;
  for (std::size_t k = opts.min_window; k <= out.points.size(); ++k) {
    const LinearFit f = fit_linear_through_origin(
        std::span(xs).first(k), std::span(ys).first(k), std::span(ws).first(k));
    if (f.reduced_residual <= opts.max_reduced_residual) {
      window = k;
      window_fit = f;
    }
  }
  if (window == 0)
    throw CalibrationError(
        "calibrate_bae_flux: no linear regime found at the lowest cooperativities");

  out.window_size = window;
  out.fit = window_fit;
  out.N = window_fit.slope;
  out.N_err = window_fit.slope_err;
  if (out.N <= 0.0) throw CalibrationError("calibrate_bae_flux: non-positive N");

  for (const auto& pt : out.points) {
    const double x2 = pt.flux * X2_ref / (out.N * pt.C);
    double rel2 = 0.0;
    if (pt.flux > 0.0 && pt.flux_err > 0.0)
      rel2 += (pt.flux_err / pt.flux) * (pt.flux_err / pt.flux);
    if (std::isfinite(out.N_err)) rel2 += (out.N_err / out.N) * (out.N_err / out.N);
    if (pt.C > 0.0 && pt.C_err > 0.0) rel2 += (pt.C_err / pt.C) * (pt.C_err / pt.C);
    out.X2.push_back(x2);
    out.X2_err.push_back(std::abs(x2) * std::sqrt(rel2));
  }
  return out;
}

EvasionReport evaluate_bae_evasion(std::span<const double> C,
                                   std::span<const double> X2,
                                   std::span<const double> X2_err, double X2_ref) {
  const std::size_t n = C.size();
  if (X2.size() != n || X2_err.size() != n)
    throw CalibrationError("evaluate_bae_evasion: length mismatch");
  EvasionReport out;
  out.X2_ref = X2_ref;
  out.evasion_demonstrated = n > 0;
  for (std::size_t k = 0; k < n; ++k) {
    EvasionPoint p;
    p.C = C[k];
    p.X2 = X2[k];
    p.X2_err = X2_err[k];
    p.model_flat = X2_ref;
    p.model_bad = X2_ref + C[k];
    p.model_good = X2_ref + C[k] / 2.0;
    p.model_baeP = X2_ref + 2.0 * C[k];
    p.below_bad = p.X2 + p.X2_err < p.model_bad;
    p.below_good = p.X2 + p.X2_err < p.model_good;
    p.below_baeP = p.X2 + p.X2_err < p.model_baeP;
    if (!p.below_good) out.evasion_demonstrated = false;
    out.points.push_back(p);
  }
  return out;
}

}  // namespace optomech
