#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "optomech/spectra.hpp"
#include "optomech/trace.hpp"
#include "test_support.hpp"

using namespace optomech;
using namespace optomech::testing;

TEST_CASE("lorentzian pair") {
  const SystemParams p = paper_device();
  const auto at_peak = lorentzian_pair(p.omega_m, p.gamma, p.omega_m);
  CHECK(at_peak.l_plus == doctest::Approx(4.0 / (p.gamma * p.gamma)).epsilon(1e-12));
  // S0 is even in omega.
  for (const double w : {0.0, 0.3 * p.omega_m, p.omega_m, 2.5 * p.omega_m})
    CHECK(lorentzian_pair(w, p.gamma, p.omega_m).s0 ==
          lorentzian_pair(-w, p.gamma, p.omega_m).s0);
  // Unit area with the analytic tail correction, +/-50 linewidths.
  const auto grid = lab_grid(p.omega_m / two_pi, p.gamma / two_pi, 1 << 14, 50.0);
  std::vector<double> s0(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k)
    s0[k] = lorentzian_pair(two_pi * grid[k], p.gamma, p.omega_m).s0;
  const auto integral = integrate_sampled(grid, s0, grid.front(), grid.back(),
                                          TailModel::LorentzianAnalytic);
  CHECK(std::abs(integral.value - 1.0) < 1e-6);
}

TEST_CASE("bad-cavity position spectrum") {
  const SystemParams p = paper_device();
  const auto grid = lab_grid(p.omega_m / two_pi, p.gamma / two_pi);
  SUBCASE("vacuum only") {
    const SpectrumTrace t = spectrum_x_bad_cavity(grid, p, 0.0, BathState{});
    CHECK(integrate_spectrum(t, TraceComponent::Total).value ==
          doctest::Approx(0.5).epsilon(1e-5));
    // The vacuum peak sits at positive frequencies only.
    double neg = 0.0, pos = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (t.freq_hz[k] < 0.0)
        neg = std::max(neg, t.vacuum[k]);
      else
        pos = std::max(pos, t.vacuum[k]);
    }
    CHECK(pos > 1e6 * neg);
  }
  SUBCASE("unit cooperativity") {
    const SpectrumTrace t =
        spectrum_x_bad_cavity(grid, p, coupling_for_C(p, 1.0), BathState{});
    CHECK(integrate_spectrum(t, TraceComponent::Total).value ==
          doctest::Approx(1.5).epsilon(1e-5));
  }
  SUBCASE("classical backaction component") {
    const BathState b = baths_with(0.0, 0.5, p);
    const SpectrumTrace t = spectrum_x_bad_cavity(grid, p, coupling_for_C(p, 1.0), b);
    const double ba = integrate_spectrum(t, TraceComponent::Qba).value +
                      integrate_spectrum(t, TraceComponent::Classical).value;
    CHECK(ba == doctest::Approx(2.0).epsilon(1e-5));
  }
}

TEST_CASE("good-cavity position spectrum") {
  const SystemParams p = paper_device();
  const double C = 300.0;
  const BathState b = baths_with(1089.0, 0.2, p);
  const auto grid = lab_grid(p.omega_m / two_pi, p.gamma * (1.0 + C) / two_pi);
  const SpectrumTrace t = spectrum_x_good_cavity(grid, p, coupling_for_C(p, C), b);
  const VarianceReport vr = variance_good_cavity(C, 1089.0, 0.2);
  CHECK(rel_err(integrate_spectrum(t, TraceComponent::Total).value, vr.variance_x) < 1e-6);
  CHECK(rel_err(integrate_spectrum(t, TraceComponent::Thermal).value, vr.thermal) < 1e-5);
  CHECK(rel_err(integrate_spectrum(t, TraceComponent::Qba).value, vr.qba) < 1e-5);
}

TEST_CASE("BAE quadrature spectra") {
  const SystemParams p = paper_device();
  const BathState b = baths_with(1089.0, 0.2, p);
  const auto grid = peak_grid(0.0, p.gamma / two_pi);
  SUBCASE("S_X does not depend on the pump") {
    const auto weak = spectrum_quadratures_bae(grid, p, coupling_for_C(p, 0.5), b,
                                               p.gamma, b.n_m_T);
    const auto strong = spectrum_quadratures_bae(grid, p, coupling_for_C(p, 50.0), b,
                                                 p.gamma, b.n_m_T);
    for (std::size_t k = 0; k < grid.size(); ++k)
      CHECK(weak.first.total[k] == strong.first.total[k]);
  }
  SUBCASE("S_P(0) - S_X(0) closed form") {
    const double G = coupling_for_C(p, 2.0);
    const auto [sx, sp] = spectrum_quadratures_bae(
        std::vector<double>{0.0}, p, G, b, p.gamma, b.n_m_T);
    const double expected = 64.0 * G * G / (p.gamma * p.gamma * p.kappa()) *
                            (0.5 + b.n_c_T(p));
    CHECK(rel_err(sp.total[0] - sx.total[0], expected) < 1e-12);
  }
  SUBCASE("integrals reproduce the quadrature energies") {
    const double G = coupling_for_C(p, 2.0);
    const auto [sx, sp] = spectrum_quadratures_bae(grid, p, G, b, p.gamma, b.n_m_T);
    CHECK(rel_err(integrate_spectrum(sx, TraceComponent::Total).value, 1089.5) < 1e-4);
    const VarianceReport vr = variance_bae(2.0, 1089.0, 0.2);
    CHECK(rel_err(integrate_spectrum(sp, TraceComponent::Total).value, vr.variance_p) < 1e-5);
  }
}

TEST_CASE("BAE output spectrum") {
  const SystemParams p = paper_device();
  const auto grid = peak_grid(0.0, p.gamma / two_pi, 4096);
  SUBCASE("vacuum output is flat at 1/2") {
    const SpectrumTrace t =
        output_spectrum_bae(grid, p, 0.0, BathState{}, p.gamma, 0.0);
    for (std::size_t k = 0; k < t.size(); ++k)
      CHECK(t.total[k] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("peak height above the floor") {
    const double C = 2.0;
    const double G = coupling_for_C(p, C);
    const BathState b = baths_with(1089.0, 0.2, p);
    const SpectrumTrace t = output_spectrum_bae(
        std::vector<double>{0.0}, p, G, b, p.gamma, b.n_m_T);
    const double floor = 0.5 + 4.0 * p.kappa_e / p.kappa() * b.n_c_T(p);
    const double expected = 4.0 * C * p.gamma * p.kappa_e / p.kappa() *
                            (4.0 / p.gamma) * (0.5 + 1089.0);
    CHECK(rel_err(t.total[0] - floor, expected) < 1e-12);
  }
  SUBCASE("prefactor identity") {
    for (const double C : {0.5, 3.0, 1e4}) {
      const double G = coupling_for_C(p, C);
      const double lhs = 4.0 * C * p.gamma * p.kappa_e / p.kappa();
      const double rhs = 16.0 * G * G * p.kappa_e / (p.kappa() * p.kappa());
      CHECK(rel_err(lhs, rhs) < 1e-12);
    }
  }
}

TEST_CASE("variance reports") {
  SUBCASE("bad cavity") {
    CHECK(variance_bad_cavity(0, 0, 0).variance_x == 0.5);
    const VarianceReport one = variance_bad_cavity(1, 0, 0);
    CHECK(one.variance_x == 1.5);
    CHECK(one.n_qba == 1.0);
    const VarianceReport r = variance_bad_cavity(2, 100, 0.25);
    CHECK(r.variance_x == doctest::Approx(103.5).epsilon(1e-15));
    CHECK(r.qba == 2.0);
    CHECK(r.classical == 1.0);
  }
  SUBCASE("good cavity") {
    CHECK(variance_good_cavity(0, 5, 0).variance_x == 5.5);
    const VarianceReport anchor = variance_good_cavity(1.02e4, 1089, 0.2);
    CHECK(anchor.n_m == doctest::Approx(0.3068).epsilon(1e-3));
    CHECK(anchor.n_qba == 0.51e4);
    // C -> infinity leaves the cavity-noise floor.
    CHECK(variance_good_cavity(1e12, 7, 0.3).variance_x ==
          doctest::Approx(0.8).epsilon(1e-9));
  }
  SUBCASE("BAE") {
    const VarianceReport r = variance_bae(2, 5, 0);
    CHECK(r.variance_x == 5.5);
    CHECK(r.variance_p == 9.5);
    for (const double C : {0.0, 1.0, 100.0})
      CHECK(variance_bae(C, 5, 0).variance_x == 5.5);
    CHECK(variance_bae(1, 0, 0.5).classical == 2.0);
  }
  SUBCASE("decomposition sums to the total, components non-negative") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
      const double C = 1e4 * u(rng), nm = 1e4 * u(rng), nc = u(rng);
      for (const auto& r : {variance_bad_cavity(C, nm, nc),
                            variance_good_cavity(C, nm, nc), variance_bae(C, nm, nc)}) {
        CHECK(r.vacuum >= 0.0);
        CHECK(r.thermal >= 0.0);
        CHECK(r.qba >= 0.0);
        CHECK(r.classical >= 0.0);
        const double total =
            r.regime == Regime::TwoToneBAE ? r.variance_p : r.variance_x;
        CHECK(std::abs(r.vacuum + r.thermal + r.qba + r.classical - total) <=
              1e-12 * total);
      }
    }
  }
}

TEST_CASE("backaction occupancy ledger") {
  const auto bad = backaction_occupancy(Regime::BadCavitySingleTone, 10.0);
  const auto good = backaction_occupancy(Regime::RedSidebandSingleTone, 10.0);
  const auto bae = backaction_occupancy(Regime::TwoToneBAE, 10.0);
  CHECK(bad.n_qba == 10.0);
  CHECK(good.n_qba == 5.0);
  CHECK(bae.n_qba == 10.0);
  CHECK(bae.pos_qba == 0.0);
  CHECK(bae.mom_qba == 20.0);
  // The quadrature split carries twice the per-quadrature ledger value.
  CHECK(bae.pos_qba + bae.mom_qba == 2.0 * bae.n_qba);
  CHECK(backaction_occupancy(Regime::BadCavitySingleTone, 0.0).n_qba == 0.0);
}

TEST_CASE("output flux") {
  CHECK(output_flux_bae(0.0, 1.0, 145.0, 301.0, 0.5) == 0.0);
  CHECK(output_flux_bae(1.0, 1.0, 145.0, 301.0, 0.5) ==
        doctest::Approx(0.96345514950166113).epsilon(1e-12));
  CHECK(output_flux_bae(2.0, 1.0, 145.0, 301.0, 0.5) ==
        doctest::Approx(2.0 * output_flux_bae(1.0, 1.0, 145.0, 301.0, 0.5)));
}

TEST_CASE("integrate_spectrum") {
  const SystemParams p = paper_device();
  SUBCASE("zero trace integrates to zero") {
    SpectrumTrace t = make_trace(uniform_grid(-10.0, 10.0, 128));
    CHECK(integrate_spectrum(t, TraceComponent::Total).value == 0.0);
  }
  SUBCASE("band outside the grid is a usage error") {
    SpectrumTrace t = make_trace(uniform_grid(-10.0, 10.0, 128));
    CHECK_THROWS_AS(integrate_spectrum(t, TraceComponent::Total, -20.0, 5.0,
                                       TailModel::None),
                    std::invalid_argument);
  }
  SUBCASE("S_X integral for n_m^T = 1089") {
    const BathState b = baths_with(1089.0, 0.0, p);
    const auto grid = peak_grid(0.0, p.gamma / two_pi);
    const auto [sx, sp] =
        spectrum_quadratures_bae(grid, p, 0.0, b, p.gamma, b.n_m_T);
    CHECK(rel_err(integrate_spectrum(sx, TraceComponent::Total).value, 1089.5) < 1e-4);
  }
  SUBCASE("truncation estimate covers the missing tails") {
    const auto grid = peak_grid(0.0, 1.0, 4096, 40.0);
    std::vector<double> vals(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
      vals[k] = 1.0 / (grid[k] * grid[k] + 0.25);
    const auto none =
        integrate_sampled(grid, vals, grid.front(), grid.back(), TailModel::None);
    const auto with =
        integrate_sampled(grid, vals, grid.front(), grid.back(),
                          TailModel::LorentzianAnalytic);
    const double exact = 2.0 * constants::pi;  // integral of a 1/(f^2+1/4) line
    CHECK(std::abs(with.value - exact) < 1e-6 * exact);
    CHECK(none.value < exact);
    CHECK(std::abs(none.value + none.truncation_error - exact) < 1e-4 * exact);
  }
}

TEST_CASE("trace validation and CSV round trip") {
  const SystemParams p = paper_device();
  const BathState b = baths_with(12.0, 0.1, p);
  const auto grid = peak_grid(0.0, p.gamma / two_pi, 512);
  auto [sx, sp] = spectrum_quadratures_bae(grid, p, coupling_for_C(p, 1.0), b,
                                           p.gamma, b.n_m_T);
  sp.meta.params_hash = "abc123";
  sp.meta.seed = 42;
  validate_trace(sp);

  const auto dir = std::filesystem::temp_directory_path() / "optomech_trace_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "trace.csv").string();
  save_trace_csv(sp, path);
  const SpectrumTrace back = load_trace_csv(path);
  REQUIRE(back.size() == sp.size());
  for (std::size_t k = 0; k < sp.size(); ++k) {
    CHECK(back.freq_hz[k] == sp.freq_hz[k]);  // bit-exact
    CHECK(back.total[k] == sp.total[k]);
    CHECK(back.qba[k] == sp.qba[k]);
  }
  CHECK(back.meta.params_hash == "abc123");
  CHECK(back.meta.seed == 42);
  CHECK(back.meta.frame == Frame::Rotating);

  SUBCASE("component mismatch is rejected") {
    SpectrumTrace broken = sp;
    broken.total[3] *= 1.5;
    CHECK_THROWS_AS(validate_trace(broken), std::runtime_error);
  }
  SUBCASE("corrupted file is reported by name") {
    const std::string bad_path = (dir / "bad.csv").string();
    std::ofstream out(bad_path);
    out << "freq_hz,total,vacuum,thermal,qba,classical,floor\n1.0,2.0,nonsense\n";
    out.close();
    try {
      load_trace_csv(bad_path);
      FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("corrupted trace row") != std::string::npos);
      CHECK(std::string(e.what()).find("bad.csv") != std::string::npos);
    }
  }
}
