#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "optomech/model.hpp"
#include "optomech/response.hpp"
#include "optomech/trace.hpp"

// Spectral densities, integrated variances and backaction occupancies for
// the three pump regimes, as closed forms and as numerically integrated
// traces. The closed forms follow the appendix decompositions exactly; the
// numeric route assembles spectra from transduction coefficients. Agreement
// between the two is the core consistency check of the whole model.
namespace optomech {

struct LorentzianPair {
  double l_plus;   // 1/((omega - omega_m)^2 + (gamma/2)^2)
  double l_minus;  // 1/((omega + omega_m)^2 + (gamma/2)^2)
  double s0;       // (gamma/2)(l_plus + l_minus); unit area in (1/2pi) d omega
};

LorentzianPair lorentzian_pair(double omega, double gamma, double omega_m);

// --- frequency grids ----------------------------------------------------
//
// Model grids use sinh-stretched sampling: dense and uniform across each
// peak core (out to `span_linewidths`), geometric further out. Lab grids
// additionally bridge the two peaks so trapezoidal integration sees the
// whole two-sided spectrum.

// Single peak at `center_hz` with FWHM `fwhm_hz`; n points.
std::vector<double> peak_grid(double center_hz, double fwhm_hz, int n = 1 << 14,
                              double span_linewidths = 64.0);

// Two-sided lab grid with peaks at +/- f_m, total ~n points.
std::vector<double> lab_grid(double f_m_hz, double fwhm_hz, int n = 1 << 14,
                             double span_linewidths = 64.0);

// Uniform grid (synthetic measured traces), bins centered on [lo, hi].
std::vector<double> uniform_grid(double lo_hz, double hi_hz, int bins);

// --- closed-form spectra --------------------------------------------------

// Position spectrum for resonant single-tone pumping, kappa >> omega_m:
// vacuum (gamma/2) L+, thermal S0 n_m^T, backaction C(1+2 n_c^T) S0 split
// into its quantum (C S0) and cavity-noise (2 C n_c^T S0) parts.
// The vacuum component peaks at +omega_m only; totals stay physical.
SpectrumTrace spectrum_x_bad_cavity(std::span<const double> freq_hz,
                                    const SystemParams& p, double G,
                                    const BathState& baths);

// Position spectrum under red-sideband pumping, kappa << omega_m; all
// mechanical susceptibilities carry gamma_eff. Integrates to the
// sideband-cooled variance.
SpectrumTrace spectrum_x_good_cavity(std::span<const double> freq_hz,
                                     const SystemParams& p, double G,
                                     const BathState& baths);

// Quadrature spectra S_X, S_P in the BAE rotating frame: single
// Lorentzians at zero frequency. gamma_mech/n_mech are the mechanical
// linewidth and occupation actually in force: (gamma, n_m^T) without a
// cooling tone, (gamma_eff, n_m) with one. S_X does not depend on G.
std::pair<SpectrumTrace, SpectrumTrace> spectrum_quadratures_bae(
    std::span<const double> freq_hz, const SystemParams& p, double G,
    const BathState& baths, double gamma_mech, double n_mech);

// Cavity output spectrum right after the device (no amplifier chain):
// (4 C gamma kappa_e / kappa) S_X + (4 kappa_e/kappa) n_c^T + 1/2.
SpectrumTrace output_spectrum_bae(std::span<const double> freq_hz,
                                  const SystemParams& p, double G,
                                  const BathState& baths, double gamma_mech,
                                  double n_mech);

// Spectrum assembled channel-by-channel from transduction coefficients
// (closed form or generic solver), with components keyed by noise origin:
// mechanical vacuum -> vacuum, mechanical thermal -> thermal, cavity
// vacuum -> qba, cavity internal thermal -> classical.
struct AssemblyOptions {
  bool use_solver = false;                // closed forms by default
  std::optional<double> n_mech_override;  // cooling-tone n_m replacement
  BaeOptions bae;
};

SpectrumTrace transduction_spectrum(std::span<const double> freq_hz, Regime regime,
                                    const SystemParams& p, double G,
                                    const BathState& baths, OutputVar v,
                                    AssemblyOptions opts = {});

// --- integrated variances ---------------------------------------------

struct VarianceReport {
  Regime regime = Regime::BadCavitySingleTone;
  double variance_x = 0.0;  // <x^2> (lab) or <X^2> (BAE), quanta
  double variance_p = 0.0;  // <p^2> or <P^2>
  // Decomposition of the backaction-carrying variance (x for single-tone
  // regimes, P for BAE). Components sum to that variance.
  double vacuum = 0.0;
  double thermal = 0.0;
  double qba = 0.0;
  double classical = 0.0;
  double n_qba = 0.0;  // quantum backaction occupancy ledger value
  // RedSidebandSingleTone extras.
  double n_m = 0.0;      // sideband-cooled occupation gamma/gamma_eff n_m^T + n_c^T
  double qba_eff = 0.0;  // C / (2 (1+C)), the effective-phonon reading
};

VarianceReport variance_bad_cavity(double C, double n_m_T, double n_c_T);
VarianceReport variance_good_cavity(double C, double n_m_T, double n_c_T);
VarianceReport variance_bae(double C, double n_m_T, double n_c_T);

struct BackactionOccupancy {
  double n_qba = 0.0;
  double pos_qba = 0.0;  // backaction in <x^2> / <X^2>
  double mom_qba = 0.0;  // backaction in <p^2> / <P^2>
};

// {C, C/2, C} for the three regimes; the BAE split is {X: 0, P: 2C}.
BackactionOccupancy backaction_occupancy(Regime regime, double C);

// Photon flux of the mechanical peak in the BAE output spectrum:
// n_out = (4 C gamma kappa_e / kappa) <X^2>, photons/s.
double output_flux_bae(double C, double gamma, double kappa_e, double kappa,
                       double X2);

// --- numerical integration ----------------------------------------------

enum class TailModel { None, LorentzianAnalytic };

struct IntegrationResult {
  double value = 0.0;
  double truncation_error = 0.0;  // estimate of the out-of-band residual
};

// Trapezoidal quadrature of a trace component over [band_lo, band_hi]
// (Hz; must lie within the grid), plus analytic Lorentzian tail corrections
// beyond the band edges when requested. Tail parameters come from an
// inverse-quadratic fit to the edge samples, which is exact for a
// Lorentzian wing.
IntegrationResult integrate_spectrum(const SpectrumTrace& t, TraceComponent c,
                                     double band_lo_hz, double band_hi_hz,
                                     TailModel tail = TailModel::LorentzianAnalytic);

// Same, over the full grid.
IntegrationResult integrate_spectrum(const SpectrumTrace& t, TraceComponent c,
                                     TailModel tail = TailModel::LorentzianAnalytic);

// Raw-array core used by the trace overloads.
IntegrationResult integrate_sampled(std::span<const double> freq_hz,
                                    std::span<const double> values,
                                    double band_lo_hz, double band_hi_hz,
                                    TailModel tail);

}  // namespace optomech
