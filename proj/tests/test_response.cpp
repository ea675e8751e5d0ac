#include <doctest.h>

#include <random>

#include "optomech/response.hpp"
#include "optomech/spectra.hpp"
#include "test_support.hpp"

using namespace optomech;
using namespace optomech::testing;

namespace {

double row_dev(const std::vector<TransductionSet>& a,
               const std::vector<TransductionSet>& b, OutputVar row,
               bool magnitudes_only) {
  double scale = 0.0, dev = 0.0;
  for (const auto& set : b)
    for (int i = 0; i < kNumInputs; ++i)
      scale = std::max(scale, std::abs(set.coeff[row][i]));
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

TEST_CASE("susceptibilities") {
  const SystemParams p = paper_device();
  CHECK(chi_first_order(0.0, p.gamma) == Complex{2.0 / p.gamma, 0.0});
  // chi_m'(omega_m) -> i/(gamma omega_m) in the high-Q limit.
  const Complex at_peak = chi_oscillator(p.omega_m, p.gamma, p.omega_m);
  const Complex limit = Complex{0.0, 1.0} / (p.gamma * p.omega_m);
  CHECK(std::abs(at_peak - limit) / std::abs(limit) < p.gamma / p.omega_m);
  // chi_e' at gamma_eff = gamma is chi_m' exactly.
  const auto s = susceptibilities(p, p.gamma, std::vector<double>{0.0, p.omega_m, -3.0 * p.omega_m});
  for (std::size_t k = 0; k < s.omega.size(); ++k)
    CHECK(s.chi_e_prime[k] == s.chi_m_prime[k]);
}

TEST_CASE("bad-cavity closed form") {
  const SystemParams p = paper_device();
  const double G = coupling_for_C(p, 4.0);
  SUBCASE("zero coupling leaves bare oscillator rows") {
    const auto off = transduction_bad_cavity(0.7 * p.omega_m, p, 0.0);
    const auto on = transduction_bad_cavity(0.7 * p.omega_m, p, G);
    CHECK(off.coeff[kMechPos][kCavXExtIn] == Complex{0.0, 0.0});
    CHECK(off.coeff[kMechMom][kCavXIntIn] == Complex{0.0, 0.0});
    CHECK(on.coeff[kMechPos][kMechPosIn] == off.coeff[kMechPos][kMechPosIn]);
    CHECK(on.coeff[kMechPos][kMechMomIn] == off.coeff[kMechPos][kMechMomIn]);
  }
  SUBCASE("sparsity: P-quadrature inputs never reach the mechanics") {
    for (const double w : {0.0, 0.3 * p.omega_m, p.omega_m, 1.9 * p.omega_m}) {
      const auto t = transduction_bad_cavity(w, p, G);
      CHECK(t.coeff[kMechPos][kCavPExtIn] == Complex{0.0, 0.0});
      CHECK(t.coeff[kMechPos][kCavPIntIn] == Complex{0.0, 0.0});
      CHECK(t.coeff[kMechMom][kCavPExtIn] == Complex{0.0, 0.0});
      CHECK(t.coeff[kMechMom][kCavPIntIn] == Complex{0.0, 0.0});
      CHECK_FALSE(t.row_defined[kCavX]);
    }
  }
  SUBCASE("loss partition identity") {
    const double alpha2 = p.kappa_i / p.kappa();
    const double beta2 = p.kappa_e / p.kappa();
    CHECK(alpha2 + beta2 == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("integrated backaction reproduces C(1 + 2 n_c^T)") {
    // Quadrature oracle: integrate each cavity channel's |coefficient|^2
    // times its noise density over the double Lorentzian.
    SystemParams sym = p;  // symmetric split makes each channel carry C/2
    sym.kappa_e = sym.kappa_i = p.kappa() / 2.0;
    const double C = 4.0;
    const double Gs = coupling_for_C(sym, C);
    const double n_I_T = 0.8;  // n_c^T = 0.4 at the symmetric split
    const auto grid = lab_grid(sym.omega_m / two_pi, sym.gamma / two_pi);
    std::vector<double> ext(grid.size()), tot(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const auto t = transduction_bad_cavity(two_pi * grid[k], sym, Gs);
      ext[k] = std::norm(t.coeff[kMechPos][kCavXExtIn]) * 0.5;
      tot[k] = ext[k] + std::norm(t.coeff[kMechPos][kCavXIntIn]) * (0.5 + n_I_T);
    }
    const double per_channel =
        integrate_sampled(grid, ext, grid.front(), grid.back(),
                          TailModel::LorentzianAnalytic).value;
    CHECK(per_channel == doctest::Approx(C / 2.0).epsilon(1e-5));
    const double n_c_T = n_I_T * sym.kappa_i / sym.kappa();
    const double full =
        integrate_sampled(grid, tot, grid.front(), grid.back(),
                          TailModel::LorentzianAnalytic).value;
    CHECK(full == doctest::Approx(C * (1.0 + 2.0 * n_c_T)).epsilon(1e-5));
  }
}

TEST_CASE("good-cavity closed form") {
  const SystemParams p = paper_device();
  SUBCASE("zero coupling reduces to the intrinsic linewidth") {
    const auto t = transduction_good_cavity(p.omega_m, p, 0.0);
    const auto bare = transduction_bad_cavity(p.omega_m, p, 0.0);
    CHECK(t.coeff[kMechPos][kMechPosIn] == bare.coeff[kMechPos][kMechPosIn]);
    CHECK(t.coeff[kMechPos][kCavXExtIn] == Complex{0.0, 0.0});
  }
  SUBCASE("internal/external backaction ratio is alpha/beta") {
    const double G = coupling_for_C(p, 50.0);
    const auto t = transduction_good_cavity(p.omega_m, p, G);
    const double ratio = std::abs(t.coeff[kMechPos][kCavXIntIn]) /
                         std::abs(t.coeff[kMechPos][kCavXExtIn]);
    CHECK(ratio == doctest::Approx(std::sqrt(p.kappa_i / p.kappa_e)).epsilon(1e-12));
    CHECK(ratio == doctest::Approx(1.037).epsilon(1e-3));
  }
  SUBCASE("assembled variance matches the sideband-cooling closed form") {
    const double C = 100.0;
    const double G = coupling_for_C(p, C);
    const BathState b = baths_with(1089.0, 0.2, p);
    const double gamma_eff_hz = p.gamma * (1.0 + C) / two_pi;
    const auto grid = lab_grid(p.omega_m / two_pi, gamma_eff_hz);
    const SpectrumTrace t =
        transduction_spectrum(grid, Regime::RedSidebandSingleTone, p, G, b, kMechPos);
    const double got = integrate_spectrum(t, TraceComponent::Total).value;
    const double expected = variance_good_cavity(C, 1089.0, 0.2).variance_x;
    CHECK(rel_err(got, expected) < 1e-6);
    // Momentum row integrates to the same energy.
    const SpectrumTrace tp =
        transduction_spectrum(grid, Regime::RedSidebandSingleTone, p, G, b, kMechMom);
    CHECK(rel_err(integrate_spectrum(tp, TraceComponent::Total).value, expected) < 1e-6);
  }
}

TEST_CASE("BAE closed form") {
  const SystemParams p = paper_device();
  const double G = coupling_for_C(p, 2.0);
  SUBCASE("X is a constant of motion: no cavity channel reaches it") {
    for (const double w : {0.0, 0.5 * p.gamma, 40.0 * p.gamma, p.kappa()})
      for (const double g : {0.0, G, 5.0 * G}) {
        const auto t = transduction_bae(w, p, g);
        CHECK(t.coeff[kMechPos][kCavXExtIn] == Complex{0.0, 0.0});
        CHECK(t.coeff[kMechPos][kCavPExtIn] == Complex{0.0, 0.0});
        CHECK(t.coeff[kMechPos][kCavXIntIn] == Complex{0.0, 0.0});
        CHECK(t.coeff[kMechPos][kCavPIntIn] == Complex{0.0, 0.0});
        CHECK(t.coeff[kMechPos][kMechMomIn] == Complex{0.0, 0.0});
      }
  }
  SUBCASE("zero coupling kills the momentum backaction") {
    const auto t = transduction_bae(0.3 * p.gamma, p, 0.0);
    CHECK(t.coeff[kMechMom][kCavXExtIn] == Complex{0.0, 0.0});
    CHECK(t.coeff[kMechMom][kCavXIntIn] == Complex{0.0, 0.0});
  }
  SUBCASE("backaction channels assemble to the S_P - S_X closed form at zero") {
    const double n_I_T = 0.7;
    const double n_c_T = n_I_T * p.kappa_i / p.kappa();
    const auto t = transduction_bae(0.0, p, G);
    const double got = std::norm(t.coeff[kMechMom][kCavXExtIn]) * 0.5 +
                       std::norm(t.coeff[kMechMom][kCavXIntIn]) * (0.5 + n_I_T);
    const double expected =
        64.0 * G * G / (p.gamma * p.gamma * p.kappa()) * (0.5 + n_c_T);
    CHECK(rel_err(got, expected) < 1e-12);
  }
}

TEST_CASE("generic solver") {
  const SystemParams p = paper_device();
  SUBCASE("zero coupling reproduces bare susceptibilities to rounding") {
    for (const double w : {0.0, 0.4 * p.omega_m, p.omega_m, 3.0 * p.omega_m}) {
      const auto t = solve_linear_response(Regime::RedSidebandSingleTone, w, p, 0.0);
      // Cavity row: chi_c with the red-sideband detuning folded in.
      const Complex dc{p.kappa() / 2.0, -w};
      const Complex expected_xc =
          std::sqrt(p.kappa_e) * dc / (dc * dc + p.omega_m * p.omega_m);
      CHECK(std::abs(t.coeff[kCavX][kCavXExtIn] - expected_xc) <
            1e-14 * std::abs(expected_xc));
      // Mechanics row: chi_m' kernel. Near the pole the system's condition
      // number is omega_m/gamma ~ 1e8, so "machine precision" carries that
      // amplification.
      const Complex dm{p.gamma / 2.0, -w};
      const Complex expected_x =
          std::sqrt(p.gamma) * dm / (dm * dm + p.omega_m * p.omega_m);
      CHECK(std::abs(t.coeff[kMechPos][kMechPosIn] - expected_x) <
            1e-7 * std::abs(expected_x) + 1e-300);
    }
  }
  SUBCASE("BAE with exact chi_c agrees to machine precision") {
    const double G = coupling_for_C(p, 2.0);
    std::vector<TransductionSet> closed, solved;
    for (int k = -150; k <= 150; ++k) {
      const double w = k * p.gamma;
      closed.push_back(transduction_bae(w, p, G, {.exact_cavity_susceptibility = true}));
      solved.push_back(solve_linear_response(Regime::TwoToneBAE, w, p, G));
    }
    for (int row = 0; row < kNumOutputs; ++row)
      CHECK(row_dev(closed, solved, static_cast<OutputVar>(row), false) < 1e-9);
  }
  SUBCASE("chi_c = 2/kappa substitution error follows (2 omega/kappa)^2") {
    const double G = coupling_for_C(p, 2.0);
    for (const double w : {p.kappa() / 100.0, p.kappa() / 40.0, p.kappa() / 20.0}) {
      const auto approx = transduction_bae(w, p, G);
      const auto solver = solve_linear_response(Regime::TwoToneBAE, w, p, G);
      const double dev = std::abs(std::abs(approx.coeff[kMechMom][kCavXExtIn]) /
                                      std::abs(solver.coeff[kMechMom][kCavXExtIn]) -
                                  1.0);
      CHECK(dev <= std::pow(2.0 * w / p.kappa(), 2));
    }
  }
  SUBCASE("bad-cavity coefficients at kappa/omega_m = 1e3") {
    SystemParams pb;
    pb.omega_c = two_pi * 1e9;
    pb.omega_m = two_pi * 1e3;
    pb.kappa_e = two_pi * 6e5;
    pb.kappa_i = two_pi * 4e5;
    pb.gamma = two_pi * 0.01;
    pb.g0 = two_pi * 10.0;
    const double G = coupling_for_C(pb, 10.0);
    std::vector<TransductionSet> closed, solved;
    for (int k = 0; k <= 800; ++k) {
      const double w = 2.0 * pb.omega_m * k / 800.0;
      closed.push_back(transduction_bad_cavity(w, pb, G));
      solved.push_back(solve_linear_response(Regime::BadCavitySingleTone, w, pb, G));
    }
    CHECK(row_dev(closed, solved, kMechPos, true) < 1e-4);
    CHECK(row_dev(closed, solved, kMechMom, true) < 1e-4);
  }
  SUBCASE("good-cavity magnitudes within O(kappa/omega_m)") {
    SystemParams pg;
    pg.omega_c = two_pi * 1e9;
    pg.omega_m = two_pi * 1e6;
    pg.kappa_e = two_pi * 550.0;
    pg.kappa_i = two_pi * 450.0;
    pg.gamma = two_pi * 0.01;
    pg.g0 = two_pi * 10.0;
    // gamma_eff/kappa must stay small too: the closed form assumes the
    // cavity reacts fast compared with the broadened mechanics.
    const double G = coupling_for_C(pg, 100.0);
    const double gamma_eff = pg.gamma + 4.0 * G * G / pg.kappa();
    std::vector<TransductionSet> closed, solved;
    for (int sign : {-1, 1})
      for (int k = 0; k <= 400; ++k) {
        const double w = sign * (pg.omega_m + (-40.0 + 80.0 * k / 400.0) * gamma_eff);
        closed.push_back(transduction_good_cavity(w, pg, G));
        solved.push_back(solve_linear_response(Regime::RedSidebandSingleTone, w, pg, G));
      }
    const double bound = 5.0 * pg.kappa() / pg.omega_m;
    CHECK(row_dev(closed, solved, kMechPos, true) < bound);
    CHECK(row_dev(closed, solved, kMechMom, true) < bound);
  }
  SUBCASE("undamped pole is singular") {
    SystemParams bad = p;
    bad.gamma = 0.0;
    CHECK_THROWS_AS(
        solve_linear_response(Regime::TwoToneBAE, 0.0, bad, 0.0),
        std::runtime_error);
  }
}

TEST_CASE("cavity quadrature rotation") {
  const SystemParams p = paper_device();
  const double G = coupling_for_C(p, 2.0);
  const double theta = 0.6;
  const auto base = solve_linear_response(Regime::TwoToneBAE, 0.2 * p.kappa(), p, G);
  const auto rot = rotate_cavity_quadratures(base, theta, p);
  for (int i = 0; i < kNumInputs; ++i) {
    // Mechanics untouched; cavity power preserved channel by channel.
    CHECK(rot.coeff[kMechPos][i] == base.coeff[kMechPos][i]);
    CHECK(rot.coeff[kMechMom][i] == base.coeff[kMechMom][i]);
    const double before = std::norm(base.coeff[kCavX][i]) + std::norm(base.coeff[kCavP][i]);
    const double after = std::norm(rot.coeff[kCavX][i]) + std::norm(rot.coeff[kCavP][i]);
    CHECK(after == doctest::Approx(before).epsilon(1e-12));
  }
}

TEST_CASE("solver vs closed forms over random parameter draws") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> logu(-1.0, 1.0);
  for (int draw = 0; draw < 20; ++draw) {
    SystemParams p;
    p.omega_c = two_pi * 1e9;
    p.omega_m = two_pi * 1e6 * std::pow(10.0, logu(rng));
    const double kappa = p.omega_m * 1e-3 * std::pow(10.0, 0.3 * logu(rng));
    p.kappa_e = 0.55 * kappa;
    p.kappa_i = 0.45 * kappa;
    p.gamma = p.omega_m * 1e-9 * std::pow(10.0, 0.5 * (logu(rng) + 1.0));
    p.g0 = two_pi * 10.0;
    const double C = std::pow(10.0, 2.0 + logu(rng));
    const double G = coupling_for_C(p, C);
    const double gamma_eff = p.gamma + 4.0 * G * G / kappa;
    std::vector<TransductionSet> closed, solved;
    for (int k = 0; k <= 100; ++k) {
      const double w = p.omega_m + (-30.0 + 60.0 * k / 100.0) * gamma_eff;
      closed.push_back(transduction_good_cavity(w, p, G));
      solved.push_back(solve_linear_response(Regime::RedSidebandSingleTone, w, p, G));
    }
    const double bound = 5.0 * (kappa / p.omega_m + gamma_eff / kappa);
    CHECK(row_dev(closed, solved, kMechPos, true) < bound);
    CHECK(row_dev(closed, solved, kMechMom, true) < bound);
  }
}
