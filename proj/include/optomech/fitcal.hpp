#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "optomech/model.hpp"
#include "optomech/trace.hpp"

// Fitting primitives (Lorentzian peak, weighted lines) and the calibration
// chain that turns fitted linewidths and peak areas into the constants
// L, J, H, N and per-point physical quantities (C, n_m^T, <X^2>).
namespace optomech {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Peak model: floor + (area/pi) (G/2) / ((f-f0)^2 + (G/2)^2), so `area`
// is the full-line integral of the peak above the floor and linewidth_hz
// is the FWHM.
struct LorentzianFit {
  double area = 0.0;
  double linewidth_hz = 0.0;
  double center_hz = 0.0;
  double floor = 0.0;
  double area_err = 0.0;
  double linewidth_err = 0.0;
  double center_err = 0.0;
  double floor_err = 0.0;
  double residual_rms = 0.0;  // rms residual of the converged fit
  double snr = 0.0;           // peak height over residual rms
  bool converged = false;
  bool low_confidence = false;  // snr below threshold; treat params as weak
  int iterations = 0;
};

// Damped Gauss-Newton with multi-start seeds taken from the sample
// moments. Throws FitError (with the best residual reached) if no start
// converges within the iteration budget.
LorentzianFit fit_lorentzian(std::span<const double> freq_hz,
                             std::span<const double> values);
LorentzianFit fit_lorentzian(const SpectrumTrace& trace);

// The model the fitter minimizes against, and its parameter gradient
// (d m / d {floor, area, center, fwhm}); exposed so the solver's Jacobian
// can be validated against finite differences.
double lorentzian_peak_model(double f, double floor, double area, double center,
                             double fwhm);
std::array<double, 4> lorentzian_peak_gradient(double f, double floor, double area,
                                               double center, double fwhm);

struct LinearFit {
  double slope = 0.0;
  double slope_err = 0.0;
  double intercept = 0.0;
  double intercept_err = 0.0;
  bool through_origin = true;
  bool dof_warning = false;     // no degrees of freedom left for the error
  double reduced_residual = 0.0;  // weighted RSS / dof
};

// Weighted least squares with zero intercept (the pipeline default).
// Empty `weights` means equal weights. Throws FitError when all xs are 0.
LinearFit fit_linear_through_origin(std::span<const double> xs,
                                    std::span<const double> ys,
                                    std::span<const double> weights = {});

// Free-intercept variant, used where the data has a physical offset.
LinearFit fit_linear_free_intercept(std::span<const double> xs,
                                    std::span<const double> ys,
                                    std::span<const double> weights = {});

// --- pump-power calibration ---------------------------------------------

struct PumpPoint {
  double power = 0.0;           // generator power, arbitrary units
  double gamma_eff_hz = 0.0;    // fitted FWHM of the cooled peak
  double gamma_eff_err_hz = 0.0;
};

struct PumpCalibration {
  double L_hz_per_unit = 0.0;  // gamma_opt/2pi = L * P
  double L_err = 0.0;
  double J = 0.0;              // G^2 = J * P, rad^2/s^2 per power unit
  double J_err = 0.0;
  std::vector<double> C;       // cooperativity of every input point, L P / gamma
  std::vector<double> C_err;
  std::vector<std::size_t> excluded;  // points with non-positive gamma_opt
  LinearFit fit;
};

// gamma_opt = gamma_eff - gamma per point, then a through-origin fit of
// gamma_opt vs power. J = (2 pi L) kappa / 4 by construction.
PumpCalibration calibrate_pump(std::span<const PumpPoint> points,
                               const SystemParams& params);

// --- temperature-sweep calibration ---------------------------------------

struct TemperaturePoint {
  double temperature_K = 0.0;
  double flux = 0.0;  // integrated mechanical peak, detected units
  double flux_err = 0.0;
};

enum class NmT0Estimator {
  BasePoint,         // invert the lowest-temperature point (BAE-sweep style)
  LowestTwoAverage,  // average the two lowest points (single-tone style)
};

struct TemperatureCalOptions {
  double band_lo_K = 0.2;  // "several hundred mK" thermalized band
  double band_hi_K = 0.5;
  // The detected flux has a temperature-independent offset (zero-point
  // motion plus cavity noise). The default fits it as a free intercept and
  // removes it before inverting; `false` reproduces the strict
  // through-origin reading.
  bool subtract_intercept = true;
  NmT0Estimator estimator = NmT0Estimator::BasePoint;
  // Flag a point as thermally decoupled when the inferred occupation
  // exceeds the Bose value at the cryostat temperature by this fraction.
  double decoupling_threshold = 0.10;
};

struct TemperatureCalibration {
  double H = 0.0;  // flux per kelvin
  double H_err = 0.0;
  double intercept = 0.0;
  double intercept_err = 0.0;
  std::vector<double> n_m_T;  // inferred bath occupation per input point
  std::vector<double> n_m_T_err;
  std::vector<bool> decoupled;
  double n_m_T0 = 0.0;  // base-temperature calibration value
  double n_m_T0_err = 0.0;
  LinearFit fit;
};

// Fits the points inside the band (needs >= 2) and inverts every point:
// n_m^T = ((flux - intercept)/H) k_B / (hbar omega_m).
TemperatureCalibration calibrate_temperature_sweep(
    std::span<const TemperaturePoint> points, double omega_m,
    TemperatureCalOptions opts = {});

// --- BAE flux calibration and the evasion benchmark ----------------------

struct BaeFluxPoint {
  double C = 0.0;  // cooperativity from the pump calibration
  double C_err = 0.0;
  double flux = 0.0;
  double flux_err = 0.0;
  double linewidth_hz = 0.0;  // carried through for the linewidth benchmark
  double linewidth_err_hz = 0.0;
};

struct BaeFluxOptions {
  double max_reduced_residual = 2.0;  // linear-window acceptance
  std::size_t min_window = 3;
};

struct BaeFluxCalibration {
  double N = 0.0;  // flux per unit cooperativity in the linear window
  double N_err = 0.0;
  std::size_t window_size = 0;  // lowest-C points accepted as linear
  std::vector<double> X2;       // <X^2>(C) = flux X2_ref / (N C), sorted by C
  std::vector<double> X2_err;
  std::vector<BaeFluxPoint> points;  // sorted by C
  LinearFit fit;
};

// Finds the largest low-C window whose through-origin fit has reduced
// residual within bounds, fits N there, and converts every point's flux
// into <X^2>. Throws CalibrationError when no linear regime exists.
BaeFluxCalibration calibrate_bae_flux(std::span<const BaeFluxPoint> points,
                                      double X2_ref, BaeFluxOptions opts = {});

struct EvasionPoint {
  double C = 0.0;
  double X2 = 0.0;
  double X2_err = 0.0;
  double model_flat = 0.0;  // ideal BAE: X2_ref
  double model_bad = 0.0;   // + C   (single-tone, bad cavity)
  double model_good = 0.0;  // + C/2 (single-tone, good cavity)
  double model_baeP = 0.0;  // + 2C  (BAE P quadrature)
  bool below_bad = false;
  bool below_good = false;
  bool below_baeP = false;
};

struct EvasionReport {
  double X2_ref = 0.0;
  std::vector<EvasionPoint> points;
  // True iff every point sits below the lowest QBA curve (+C/2) by more
  // than its uncertainty.
  bool evasion_demonstrated = false;
};

EvasionReport evaluate_bae_evasion(std::span<const double> C,
                                   std::span<const double> X2,
                                   std::span<const double> X2_err, double X2_ref);

// Bundle of the fitted constants for reporting.
struct CalibrationResult {
  double L = 0.0, L_err = 0.0;
  double J = 0.0, J_err = 0.0;
  double H = 0.0, H_err = 0.0;
  double N = 0.0, N_err = 0.0;
  double X2_ref = 0.0;
};

}  // namespace optomech
