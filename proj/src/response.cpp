#include "optomech/response.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace optomech {

namespace {

constexpr Complex kI{0.0, 1.0};

struct LossPartition {
  double alpha;  // sqrt(kappa_i / kappa)
  double beta;   // sqrt(kappa_e / kappa)
};

LossPartition loss_partition(const SystemParams& p) {
  const double kappa = p.kappa();
  return {std::sqrt(p.kappa_i / kappa), std::sqrt(p.kappa_e / kappa)};
}

}  // namespace

Complex chi_first_order(double omega, double rate) {
  return 1.0 / Complex{rate / 2.0, -omega};
}

Complex chi_oscillator(double omega, double rate, double omega_m) {
  const Complex d = Complex{rate / 2.0, -omega};
  return 1.0 / (d * d + omega_m * omega_m);
}

SusceptibilitySamples susceptibilities(const SystemParams& p, double gamma_eff,
                                       std::span<const double> omega) {
  if (p.gamma <= 0.0 || p.kappa() <= 0.0 || gamma_eff <= 0.0)
    throw std::domain_error("susceptibilities: rates must be > 0");
  SusceptibilitySamples s;
  s.omega.assign(omega.begin(), omega.end());
  s.chi_m.reserve(omega.size());
  s.chi_c.reserve(omega.size());
  s.chi_m_prime.reserve(omega.size());
  s.chi_e_prime.reserve(omega.size());
  for (double w : omega) {
    s.chi_m.push_back(chi_first_order(w, p.gamma));
    s.chi_c.push_back(chi_first_order(w, p.kappa()));
    s.chi_m_prime.push_back(chi_oscillator(w, p.gamma, p.omega_m));
    s.chi_e_prime.push_back(chi_oscillator(w, gamma_eff, p.omega_m));
  }
  return s;
}

NoiseDensities NoiseDensities::from_baths(const BathState& baths) {
  return with_mech_occupation(baths.n_m_T, baths);
}

NoiseDensities NoiseDensities::with_mech_occupation(double n_mech,
                                                    const BathState& baths) {
  if (n_mech < 0.0 || baths.n_I_T < 0.0)
    throw std::domain_error("noise density: occupations must be >= 0");
  NoiseDensities n;
  n.density[kMechPosIn] = 0.5 + n_mech;
  n.density[kMechMomIn] = 0.5 + n_mech;
  n.density[kCavXExtIn] = 0.5;  // external bath at zero temperature
  n.density[kCavPExtIn] = 0.5;
  n.density[kCavXIntIn] = 0.5 + baths.n_I_T;
  n.density[kCavPIntIn] = 0.5 + baths.n_I_T;
  return n;
}

TransductionSet transduction_bad_cavity(double omega, const SystemParams& p, double G) {
  const auto [alpha, beta] = loss_partition(p);
  const double kappa = p.kappa();
  const Complex chi = chi_oscillator(omega, p.gamma, p.omega_m);
  const double sqrt_gamma = std::sqrt(p.gamma);
  const double s4cg = 4.0 * G / std::sqrt(kappa);  // sqrt(4 C gamma)

  TransductionSet t;
  t.regime = Regime::BadCavitySingleTone;
  t.omega = omega;
  t.row_defined[kMechPos] = true;
  t.row_defined[kMechMom] = true;

  auto& x = t.coeff[kMechPos];
  auto& mom = t.coeff[kMechMom];
  x[kMechPosIn] = kI * sqrt_gamma * omega * chi;
  x[kMechMomIn] = sqrt_gamma * p.omega_m * chi;
  x[kCavXExtIn] = -s4cg * beta * p.omega_m * chi;
  x[kCavXIntIn] = -s4cg * alpha * p.omega_m * chi;
  mom[kMechMomIn] = kI * sqrt_gamma * omega * chi;
  mom[kMechPosIn] = -sqrt_gamma * p.omega_m * chi;
  mom[kCavXExtIn] = kI * s4cg * beta * omega * chi;
  mom[kCavXIntIn] = kI * s4cg * alpha * omega * chi;
  return t;
}

TransductionSet transduction_good_cavity(double omega, const SystemParams& p, double G) {
  const auto [alpha, beta] = loss_partition(p);
  const double kappa = p.kappa();
  const double gamma_eff = p.gamma + 4.0 * G * G / kappa;
  const Complex chi = chi_oscillator(omega, gamma_eff, p.omega_m);
  const double sqrt_gamma = std::sqrt(p.gamma);
  const double g2k = 2.0 * G / std::sqrt(kappa);

  TransductionSet t;
  t.regime = Regime::RedSidebandSingleTone;
  t.omega = omega;
  t.row_defined[kMechPos] = true;
  t.row_defined[kMechMom] = true;

  auto& x = t.coeff[kMechPos];
  auto& mom = t.coeff[kMechMom];
  x[kMechPosIn] = kI * sqrt_gamma * omega * chi;
  x[kMechMomIn] = sqrt_gamma * p.omega_m * chi;
  x[kCavXExtIn] = -kI * g2k * beta * p.omega_m * chi;
  x[kCavXIntIn] = -kI * g2k * alpha * p.omega_m * chi;
  x[kCavPExtIn] = g2k * beta * omega * chi;
  x[kCavPIntIn] = g2k * alpha * omega * chi;
  mom[kMechMomIn] = kI * sqrt_gamma * omega * chi;
  mom[kMechPosIn] = -sqrt_gamma * p.omega_m * chi;
  mom[kCavXExtIn] = -g2k * beta * omega * chi;
  mom[kCavXIntIn] = -g2k * alpha * omega * chi;
  mom[kCavPExtIn] = -kI * g2k * beta * p.omega_m * chi;
  mom[kCavPIntIn] = -kI * g2k * alpha * p.omega_m * chi;
  return t;
}

TransductionSet transduction_bae(double omega, const SystemParams& p, double G,
                                 BaeOptions opts) {
  const double kappa = p.kappa();
  const Complex chi_m = chi_first_order(omega, p.gamma);
  const Complex chi_c = opts.exact_cavity_susceptibility
                            ? chi_first_order(omega, kappa)
                            : Complex{2.0 / kappa, 0.0};
  const double sqrt_gamma = std::sqrt(p.gamma);
  const double se = std::sqrt(p.kappa_e);
  const double si = std::sqrt(p.kappa_i);

  TransductionSet t;
  t.regime = Regime::TwoToneBAE;
  t.omega = omega;
  t.row_defined.fill(true);

  t.coeff[kMechPos][kMechPosIn] = sqrt_gamma * chi_m;

  auto& mom = t.coeff[kMechMom];
  mom[kMechMomIn] = sqrt_gamma * chi_m;
  mom[kCavXExtIn] = -2.0 * G * se * chi_m * chi_c;
  mom[kCavXIntIn] = -2.0 * G * si * chi_m * chi_c;

  auto& xc = t.coeff[kCavX];
  xc[kCavXExtIn] = se * chi_c;
  xc[kCavXIntIn] = si * chi_c;

  // P_c picks up the mechanics through P_c,x = 2 G chi_c and X = sqrt(gamma) chi_m X_in.
  auto& pc = t.coeff[kCavP];
  pc[kMechPosIn] = 2.0 * G * chi_c * sqrt_gamma * chi_m;
  pc[kCavPExtIn] = se * chi_c;
  pc[kCavPIntIn] = si * chi_c;

  // Input-output relation P_c,out = sqrt(kappa_e) P_c - P_c,in.
  auto& out = t.coeff[kCavPOut];
  for (int i = 0; i < kNumInputs; ++i) out[i] = se * pc[i];
  out[kCavPExtIn] -= 1.0;
  return t;
}

TransductionSet transduction_closed_form(Regime regime, double omega,
                                         const SystemParams& p, double G,
                                         BaeOptions opts) {
  switch (regime) {
    case Regime::BadCavitySingleTone: return transduction_bad_cavity(omega, p, G);
    case Regime::RedSidebandSingleTone: return transduction_good_cavity(omega, p, G);
    case Regime::TwoToneBAE: return transduction_bae(omega, p, G, opts);
  }
  throw std::invalid_argument("transduction_closed_form: unknown regime");
}

TransductionSet solve_linear_response(Regime regime, double omega,
                                      const SystemParams& p, double G) {
  using Eigen::Matrix4cd;
  using MatrixB = Eigen::Matrix<Complex, 4, kNumInputs>;

  const double kappa = p.kappa();
  const Complex dc{kappa / 2.0, -omega};   // chi_c^-1
  const Complex dm{p.gamma / 2.0, -omega};  // chi_m^-1

  // Rows: X_c, P_c, mech-pos, mech-mom.
  Matrix4cd a = Matrix4cd::Zero();
  a(0, 0) = dc;
  a(1, 1) = dc;
  a(2, 2) = dm;
  a(3, 3) = dm;
  switch (regime) {
    case Regime::BadCavitySingleTone:
    case Regime::RedSidebandSingleTone: {
      const double delta = regime == Regime::BadCavitySingleTone ? 0.0 : -p.omega_m;
      a(0, 1) = delta;
      a(1, 0) = -delta;
      a(1, 2) = 2.0 * G;
      a(2, 3) = -p.omega_m;
      a(3, 2) = p.omega_m;
      a(3, 0) = 2.0 * G;
      break;
    }
    case Regime::TwoToneBAE:
      a(1, 2) = -2.0 * G;
      a(3, 0) = 2.0 * G;
      break;
  }

  MatrixB b = MatrixB::Zero();
  const double sqrt_gamma = std::sqrt(p.gamma);
  b(0, kCavXExtIn) = std::sqrt(p.kappa_e);
  b(0, kCavXIntIn) = std::sqrt(p.kappa_i);
  b(1, kCavPExtIn) = std::sqrt(p.kappa_e);
  b(1, kCavPIntIn) = std::sqrt(p.kappa_i);
  b(2, kMechPosIn) = sqrt_gamma;
  b(3, kMechMomIn) = sqrt_gamma;

  Eigen::FullPivLU<Matrix4cd> lu(a);
  if (!lu.isInvertible())
    throw std::runtime_error("solve_linear_response: singular system matrix");
  const MatrixB t = lu.solve(b);

  TransductionSet set;
  set.regime = regime;
  set.omega = omega;
  set.row_defined.fill(true);
  for (int i = 0; i < kNumInputs; ++i) {
    set.coeff[kCavX][i] = t(0, i);
    set.coeff[kCavP][i] = t(1, i);
    set.coeff[kMechPos][i] = t(2, i);
    set.coeff[kMechMom][i] = t(3, i);
    set.coeff[kCavPOut][i] = std::sqrt(p.kappa_e) * t(1, i);
  }
  set.coeff[kCavPOut][kCavPExtIn] -= 1.0;
  return set;
}

TransductionSet rotate_cavity_quadratures(const TransductionSet& set, double theta,
                                          const SystemParams& p) {
  if (theta == 0.0) return set;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  TransductionSet r = set;
  for (int i = 0; i < kNumInputs; ++i) {
    const Complex xc = set.coeff[kCavX][i];
    const Complex pc = set.coeff[kCavP][i];
    r.coeff[kCavX][i] = c * xc + s * pc;
    r.coeff[kCavP][i] = -s * xc + c * pc;
    r.coeff[kCavPOut][i] = std::sqrt(p.kappa_e) * r.coeff[kCavP][i];
  }
  // The direct transmission term follows the rotated input quadrature.
  r.coeff[kCavPOut][kCavXExtIn] += s;
  r.coeff[kCavPOut][kCavPExtIn] -= c;
  return r;
}

double assemble_spectrum(const TransductionSet& set, OutputVar v,
                         const NoiseDensities& noise) {
  double total = 0.0;
  for (int i = 0; i < kNumInputs; ++i)
    total += std::norm(set.coeff[v][i]) * noise.density[i];
  return total;
}

}  // namespace optomech
