#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "optomech/cli.hpp"
#include "optomech/constants.hpp"
#include "optomech/model.hpp"
#include "optomech/response.hpp"
#include "optomech/spectra.hpp"

// Oracle-equivalence and integration-identity suite behind `optomech
// selftest`. Every check compares two independent routes to the same
// quantity; the mutation hooks perturb one closed-form side so a check's
// sensitivity can be demonstrated.
namespace optomech::selftest {

namespace {

using constants::two_pi;

SystemParams paper_device() {
  SystemParams p;
  p.omega_c = two_pi * 4.517e9;
  p.omega_m = two_pi * 707.4e3;
  p.kappa_e = two_pi * 145e3;
  p.kappa_i = two_pi * 156e3;
  p.gamma = two_pi * 8.8e-3;
  p.g0 = two_pi * 10.0;
  return p;
}

double coupling_for_C(const SystemParams& p, double C) {
  return 0.5 * std::sqrt(C * p.kappa() * p.gamma);
}

BathState baths_with(double n_m_T, double n_c_T, const SystemParams& p) {
  BathState b;
  b.n_m_T = n_m_T;
  b.n_I_T = n_c_T * p.kappa() / p.kappa_i;
  return b;
}

double row_normalized_deviation(const std::vector<TransductionSet>& a,
                                const std::vector<TransductionSet>& b,
                                OutputVar row, bool magnitudes_only) {
  double scale = 0.0;
  for (const auto& set : b)
    for (int i = 0; i < kNumInputs; ++i)
      scale = std::max(scale, std::abs(set.coeff[row][i]));
  if (scale <= 0.0) return 0.0;
  double dev = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (int i = 0; i < kNumInputs; ++i) {
      const double d = magnitudes_only
                           ? std::abs(std::abs(a[k].coeff[row][i]) -
                                      std::abs(b[k].coeff[row][i]))
                           : std::abs(a[k].coeff[row][i] - b[k].coeff[row][i]);
      dev = std::max(dev, d);
    }
  return dev / scale;
}

}  // namespace

std::vector<std::string> mutation_targets() {
  return {"bae-pba", "bad-cavity-xba", "good-cavity-xbap", "s0-norm"};
}

std::vector<CheckResult> run_all(const std::string& mutate) {
  std::vector<CheckResult> results;
  auto add = [&](const std::string& name, double value, double tol,
                 const std::string& note) {
    results.push_back({name, value, tol, value <= tol, note});
  };

  // 1. Generic solver vs BAE closed form with chi_c kept exact: the two
  //    routes are algebraically identical, so they must agree to rounding.
  {
    const SystemParams p = paper_device();
    const double G = coupling_for_C(p, 2.0);
    std::vector<TransductionSet> closed, solved;
    for (int k = 0; k <= 400; ++k) {
      const double w = -200.0 * p.gamma + k * p.gamma;
      TransductionSet c = transduction_bae(w, p, G, {.exact_cavity_susceptibility = true});
      if (mutate == "bae-pba") c.coeff[kMechMom][kCavXExtIn] *= 1.0 + 1e-6;
      closed.push_back(c);
      solved.push_back(solve_linear_response(Regime::TwoToneBAE, w, p, G));
    }
    double dev = 0.0;
    for (int row = 0; row < kNumOutputs; ++row)
      dev = std::max(dev, row_normalized_deviation(closed, solved,
                                                   static_cast<OutputVar>(row), false));
    add("bae-solver-vs-closed-form", dev, 1e-9,
        "complex coefficients, exact chi_c");
  }

  // 2. Bad-cavity closed form vs solver at kappa/omega_m = 1e3.
  {
    SystemParams p;
    p.omega_c = two_pi * 1e9;
    p.omega_m = two_pi * 1e3;
    p.kappa_e = two_pi * 5e5;
    p.kappa_i = two_pi * 5e5;
    p.gamma = two_pi * 0.01;
    p.g0 = two_pi * 10.0;
    const double G = coupling_for_C(p, 10.0);
    std::vector<TransductionSet> closed, solved;
    for (int k = 0; k <= 2000; ++k) {
      const double w = 2.0 * p.omega_m * k / 2000.0;
      TransductionSet c = transduction_bad_cavity(w, p, G);
      if (mutate == "bad-cavity-xba") c.coeff[kMechPos][kCavXExtIn] *= 1.001;
      closed.push_back(c);
      solved.push_back(solve_linear_response(Regime::BadCavitySingleTone, w, p, G));
    }
    const double dev =
        std::max(row_normalized_deviation(closed, solved, kMechPos, true),
                 row_normalized_deviation(closed, solved, kMechMom, true));
    add("bad-cavity-solver-vs-closed-form", dev, 1e-4,
        "|coefficients| over [0, 2 omega_m], kappa/omega_m = 1e3");
  }

  // 3. Good-cavity closed form (including the reconstructed momentum row)
  //    vs solver at omega_m/kappa = 1e3; corrections are O(kappa/omega_m).
  {
    SystemParams p;
    p.omega_c = two_pi * 1e9;
    p.omega_m = two_pi * 1e6;
    p.kappa_e = two_pi * 550.0;
    p.kappa_i = two_pi * 450.0;
    p.gamma = two_pi * 0.01;
    p.g0 = two_pi * 10.0;
    // Keep gamma_eff << kappa so the adiabatic closed form applies.
    const double G = coupling_for_C(p, 100.0);
    const double gamma_eff = p.gamma + 4.0 * G * G / p.kappa();
    std::vector<TransductionSet> closed, solved;
    for (int sign : {-1, 1})
      for (int k = 0; k <= 1000; ++k) {
        const double w =
            sign * (p.omega_m + (-50.0 + 100.0 * k / 1000.0) * gamma_eff);
        TransductionSet c = transduction_good_cavity(w, p, G);
        if (mutate == "good-cavity-xbap") c.coeff[kMechPos][kCavPExtIn] *= 1.01;
        closed.push_back(c);
        solved.push_back(
            solve_linear_response(Regime::RedSidebandSingleTone, w, p, G));
      }
    const double dev =
        std::max(row_normalized_deviation(closed, solved, kMechPos, true),
                 row_normalized_deviation(closed, solved, kMechMom, true));
    add("good-cavity-solver-vs-closed-form", dev, 5e-3,
        "|coefficients| near +/- omega_m, omega_m/kappa = 1e3");
  }

  // 4. Integrated bad-cavity position spectrum vs the closed-form variance.
  {
    const SystemParams p = paper_device();
    const double G = coupling_for_C(p, 1.0);
    const BathState b = baths_with(100.0, 0.3, p);
    const auto grid = lab_grid(p.omega_m / two_pi, p.gamma / two_pi);
    SpectrumTrace t = spectrum_x_bad_cavity(grid, p, G, b);
    const double expected = variance_bad_cavity(1.0, b.n_m_T, 0.3).variance_x;
    const double got = integrate_spectrum(t, TraceComponent::Total).value;
    add("variance-bad-cavity-integral", std::abs(got / expected - 1.0), 1e-5,
        "quadrature with Lorentzian tails vs closed form");
  }

  // 5. Good-cavity spectrum assembled from transduction coefficients vs the
  //    sideband-cooling variance.
  {
    const SystemParams p = paper_device();
    const double C = 100.0;
    const double G = coupling_for_C(p, C);
    const BathState b = baths_with(1089.0, 0.2, p);
    const double gamma_eff_hz = p.gamma * (1.0 + C) / two_pi;
    const auto grid = lab_grid(p.omega_m / two_pi, gamma_eff_hz);
    SpectrumTrace t = transduction_spectrum(grid, Regime::RedSidebandSingleTone, p,
                                            G, b, kMechPos);
    const double expected = variance_good_cavity(C, b.n_m_T, 0.2).variance_x;
    const double got = integrate_spectrum(t, TraceComponent::Total).value;
    add("variance-good-cavity-assembled", std::abs(got / expected - 1.0), 1e-6,
        "coefficient-assembled spectrum vs closed form");
  }

  // 6. BAE quadrature spectra integrate to the quadrature energies.
  {
    const SystemParams p = paper_device();
    const double C = 2.0;
    const double G = coupling_for_C(p, C);
    const BathState b = baths_with(1089.0, 0.2, p);
    const auto grid = peak_grid(0.0, p.gamma / two_pi);
    const auto [sx, sp] = spectrum_quadratures_bae(grid, p, G, b, p.gamma, b.n_m_T);
    const VarianceReport vr = variance_bae(C, b.n_m_T, 0.2);
    const double ix = integrate_spectrum(sx, TraceComponent::Total).value;
    const double ip = integrate_spectrum(sp, TraceComponent::Total).value;
    const double dev = std::max(std::abs(ix / vr.variance_x - 1.0),
                                std::abs(ip / vr.variance_p - 1.0));
    add("variance-bae-integrals", dev, 1e-5, "S_X and S_P vs quadrature energies");
  }

  // 7. S0 carries unit area: (1/2pi) int S0 d omega = 1.
  {
    const SystemParams p = paper_device();
    const auto grid = lab_grid(p.omega_m / two_pi, p.gamma / two_pi, 1 << 14, 50.0);
    std::vector<double> values(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
      values[k] = lorentzian_pair(two_pi * grid[k], p.gamma, p.omega_m).s0;
      if (mutate == "s0-norm") values[k] *= 1.0 + 1e-5;
    }
    const double got = integrate_sampled(grid, values, grid.front(), grid.back(),
                                         TailModel::LorentzianAnalytic)
                           .value;
    add("s0-unit-area", std::abs(got - 1.0), 1e-6, "+/-50 linewidths plus tails");
  }

  // 8. Output prefactor identity 4 C gamma kappa_e / kappa = 16 G^2 kappa_e / kappa^2.
  {
    const SystemParams p = paper_device();
    double dev = 0.0;
    for (const double C : {0.1, 1.0, 33.0, 1e4}) {
      const double G = coupling_for_C(p, C);
      const double lhs = 4.0 * cooperativity(G, p.kappa(), p.gamma) * p.gamma *
                         p.kappa_e / p.kappa();
      const double rhs = 16.0 * G * G * p.kappa_e / (p.kappa() * p.kappa());
      dev = std::max(dev, std::abs(lhs / rhs - 1.0));
    }
    add("output-prefactor-identity", dev, 1e-12, "Eq. identity, four couplings");
  }

  // 9. Backaction ledger is exact: {C, C/2, C} and the BAE split {0, 2C}.
  {
    double dev = 0.0;
    for (const double C : {0.0, 1.0, 10.0, 4096.0}) {
      dev = std::max(dev, std::abs(backaction_occupancy(Regime::BadCavitySingleTone, C).n_qba - C));
      dev = std::max(dev, std::abs(backaction_occupancy(Regime::RedSidebandSingleTone, C).n_qba - C / 2.0));
      const auto bae = backaction_occupancy(Regime::TwoToneBAE, C);
      dev = std::max(dev, std::abs(bae.n_qba - C));
      dev = std::max(dev, std::abs(bae.pos_qba));
      dev = std::max(dev, std::abs(bae.mom_qba - 2.0 * C));
    }
    add("backaction-ledger", dev, 0.0, "exact rational values");
  }

  // 10. Loss partition: alpha^2 + beta^2 = 1.
  {
    const SystemParams p = paper_device();
    const double s = p.kappa_e / p.kappa() + p.kappa_i / p.kappa();
    add("loss-partition", std::abs(s - 1.0), 1e-15, "alpha^2 + beta^2");
  }

  // 11. |chi_m'|^2 = (L+ + L-)/(4 omega_m^2) across the peak band (the
  //     appendix identity; exact up to O((gamma/omega_m)^2) there).
  {
    const SystemParams p = paper_device();
    double dev = 0.0;
    for (int k = 0; k <= 4000; ++k) {
      const double w = p.omega_m + (-50.0 + 100.0 * k / 4000.0) * p.gamma;
      const auto lp = lorentzian_pair(w, p.gamma, p.omega_m);
      const double lhs = std::norm(chi_oscillator(w, p.gamma, p.omega_m));
      const double rhs = (lp.l_plus + lp.l_minus) / (4.0 * p.omega_m * p.omega_m);
      dev = std::max(dev, std::abs(lhs / rhs - 1.0));
    }
    add("chi-prime-identity", dev, 1e-5, "within +/-50 gamma of the peak");
  }

  // 12. Thermal anchor: n(37 mK, 2 pi 707.4 kHz) = 1089 +/- 1.
  {
    const double n = bose_occupation(0.037, two_pi * 707.4e3);
    add("bose-anchor-37mK", std::abs(n - 1089.0), 1.0, "expected 1089.34");
  }

  // 13. S_X is pointwise independent of the BAE pump strength.
  {
    const SystemParams p = paper_device();
    const BathState b = baths_with(1089.0, 0.2, p);
    const auto grid = peak_grid(0.0, p.gamma / two_pi, 4096);
    const auto weak = spectrum_quadratures_bae(grid, p, coupling_for_C(p, 0.5), b,
                                               p.gamma, b.n_m_T);
    const auto strong = spectrum_quadratures_bae(grid, p, coupling_for_C(p, 50.0), b,
                                                 p.gamma, b.n_m_T);
    double dev = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k)
      dev = std::max(dev, std::abs(weak.first.total[k] - strong.first.total[k]));
    add("sx-pump-invariance", dev, 0.0, "C = 0.5 vs C = 50, exact");
  }

  // 14. chi_c = 2/kappa substitution error stays within its (2 omega/kappa)^2
  //     budget near zero frequency.
  {
    const SystemParams p = paper_device();
    const double G = coupling_for_C(p, 2.0);
    double worst = 0.0;
    for (int k = 1; k <= 200; ++k) {
      const double w = p.kappa() / 20.0 * k / 200.0;
      const auto approx = transduction_bae(w, p, G);
      const auto exact = transduction_bae(w, p, G, {.exact_cavity_susceptibility = true});
      const double dev = std::abs(std::abs(approx.coeff[kMechMom][kCavXExtIn]) /
                                      std::abs(exact.coeff[kMechMom][kCavXExtIn]) -
                                  1.0);
      const double budget = std::pow(2.0 * w / p.kappa(), 2);
      worst = std::max(worst, dev / budget);
    }
    add("chi-c-substitution-budget", worst, 1.0, "dev / (2 omega/kappa)^2 <= 1");
  }

  return results;
}

}  // namespace optomech::selftest
