#include "corrt/metric_synthesis.hpp"

#include <cmath>

#include "doctest.h"

using namespace corrt;

namespace {

PlantModel make_scalar_plant(double a, bool with_input) {
  PlantModel p;
  p.label = "scalar";
  p.n_x = 1;
  p.n_u = with_input ? 1 : 0;
  p.n_w = 0;
  Eigen::MatrixXd amat = Eigen::MatrixXd::Constant(1, 1, a);
  p.drift = [amat](const Eigen::VectorXd& x) { return Eigen::VectorXd(amat * x); };
  p.jacobian = [amat](const Eigen::VectorXd&) { return amat; };
  p.drift_poly = p.drift;
  p.jacobian_poly = p.jacobian;
  if (with_input) {
    p.input_matrix = Eigen::MatrixXd::Constant(1, 1, 1.0);
    p.input_nullspace = Eigen::MatrixXd::Zero(1, 0);
  } else {
    p.input_matrix = Eigen::MatrixXd::Zero(1, 0);
    p.input_nullspace = Eigen::MatrixXd::Identity(1, 1);
  }
  p.disturbance_matrix = Eigen::MatrixXd::Zero(1, 0);
  p.control_box = AxisBox::unbounded(p.n_u);
  p.linear_dynamics = true;
  return p;
}

PlantModel make_double_integrator() {
  PlantModel p;
  p.label = "double_integrator";
  p.n_x = 2;
  p.n_u = 1;
  p.n_w = 0;
  Eigen::MatrixXd a(2, 2);
  a << 0.0, 1.0, 0.0, 0.0;
  p.drift = [a](const Eigen::VectorXd& x) { return Eigen::VectorXd(a * x); };
  p.jacobian = [a](const Eigen::VectorXd&) { return a; };
  p.drift_poly = p.drift;
  p.jacobian_poly = p.jacobian;
  p.input_matrix = (Eigen::MatrixXd(2, 1) << 0.0, 1.0).finished();
  p.disturbance_matrix = Eigen::MatrixXd::Zero(2, 0);
  p.input_nullspace = (Eigen::MatrixXd(2, 1) << 1.0, 0.0).finished();
  p.control_box = AxisBox::unbounded(1);
  p.linear_dynamics = true;
  return p;
}

PlantModel make_unobservable_unstable() {
  PlantModel p;
  p.label = "unobservable";
  p.n_x = 2;
  p.n_u = 1;
  p.n_w = 0;
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
  p.drift = [a](const Eigen::VectorXd& x) { return Eigen::VectorXd(a * x); };
  p.jacobian = [a](const Eigen::VectorXd&) { return a; };
  p.drift_poly = p.drift;
  p.jacobian_poly = p.jacobian;
  p.input_matrix = (Eigen::MatrixXd(2, 1) << 0.0, 1.0).finished();
  p.disturbance_matrix = Eigen::MatrixXd::Zero(2, 0);
  p.input_nullspace = (Eigen::MatrixXd(2, 1) << 1.0, 0.0).finished();
  p.control_box = AxisBox::unbounded(1);
  p.linear_dynamics = true;
  return p;
}

// For the double integrator the CCM condition reduces to the scalar
// 2 W(0,1) + 2 lambda W(0,0) <= 0. Writing W = R(t) diag(l1,l2) R(t)^T and
// maximizing the margin -2(W01 + lambda W00) over the rotation angle gives
//   margin_max(l1,l2) = (l2-l1) sqrt(1+lambda^2) - lambda (l1+l2),
// scanned densely over eigenvalue pairs below.
double di_oracle_best_objective(double lambda, double beta_lo, double beta_hi,
                                double mu) {
  double best = kInf;
  const int steps = 600;
  for (int i = 0; i <= steps; ++i) {
    const double l1 = beta_lo + (beta_hi - beta_lo) * i / steps;
    for (int j = i; j <= steps; ++j) {
      const double l2 = beta_lo + (beta_hi - beta_lo) * j / steps;
      const double margin =
          (l2 - l1) * std::sqrt(1.0 + lambda * lambda) - lambda * (l1 + l2);
      if (margin < mu) continue;
      best = std::min(best, std::sqrt(l2 / l1) / lambda);
    }
  }
  return best;
}

}  // namespace

TEST_CASE("ccm margin: fully actuated plant is vacuous") {
  const PlantModel p = make_scalar_plant(-1.0, true);
  CHECK(ccm_lmi_margin(Eigen::MatrixXd::Identity(1, 1),
                       Eigen::VectorXd::Zero(1), p, 0.5) == kInf);
}

TEST_CASE("ccm margin: double integrator hand value") {
  const PlantModel p = make_double_integrator();
  const double margin = ccm_lmi_margin(Eigen::MatrixXd::Identity(2, 2),
                                       Eigen::VectorXd::Zero(2), p, 0.1);
  // B_perp^T (AW + WA^T + 2*lambda*W) B_perp = (0) + 2*0.1*1 = 0.2.
  CHECK(margin == doctest::Approx(-0.2));
}

TEST_CASE("ccm margin: car metric feasible inside D_c at lambda_c=2.5") {
  const PlantModel car = make_car_plant();
  // Hand-constructed W: W11 = 0.2 I, W21 = [[0,-1],[-3.5,0]], W22 chosen for
  // positive definiteness. At x=(0,0,0,3.5) the constraint block evaluates to
  // diag(-7,-7) + 2*2.5*0.2 I = -6 I, so the margin is 6.
  Eigen::MatrixXd w(4, 4);
  w << 0.2, 0.0, 0.0, -3.5,
       0.0, 0.2, -1.0, 0.0,
       0.0, -1.0, 10.0, 0.0,
       -3.5, 0.0, 0.0, 125.0;
  Eigen::VectorXd x(4);
  x << 0.0, 0.0, 0.0, 3.5;
  const double margin = ccm_lmi_margin(w, x, car, 2.5);
  CHECK(margin >= 0.0);
  CHECK(margin == doctest::Approx(6.0).epsilon(0.01));
}

TEST_CASE("ocm margin examples") {
  // A = 0, C = I, rho = 2*lambda*eigmax(W): boundary feasibility.
  PlantModel still = make_scalar_plant(0.0, true);
  still.n_x = 2;
  Eigen::MatrixXd a0 = Eigen::MatrixXd::Zero(2, 2);
  still.drift = [a0](const Eigen::VectorXd& x) { return Eigen::VectorXd(a0 * x); };
  still.jacobian = [a0](const Eigen::VectorXd&) { return a0; };
  still.drift_poly = still.drift;
  still.jacobian_poly = still.jacobian;
  Eigen::MatrixXd w(2, 2);
  w << 0.3, 0.0, 0.0, 1.0;
  const double lambda_e = 0.7;
  const double rho = 2.0 * lambda_e * 1.0;
  CHECK(ocm_lmi_margin(w, Eigen::VectorXd::Zero(2), still,
                       Eigen::MatrixXd::Identity(2, 2), rho,
                       lambda_e) >= -1e-12);

  // Arm 17D with the reported metric: W_e = 0.1 I, lambda_e = 9.5, full
  // reduced observation (orientation from the image, joints and joint rates
  // from encoders), large rho.
  const PlantModel arm = make_arm17_plant();
  const Eigen::MatrixXd w_arm = 0.1 * Eigen::MatrixXd::Identity(17, 17);
  const double m = ocm_lmi_margin(w_arm, Eigen::VectorXd::Zero(17), arm,
                                  Eigen::MatrixXd::Identity(17, 17), 3.0, 9.5);
  CHECK(m >= 0.0);
  CHECK(m == doctest::Approx(1.0));

  // rho = 0 with a positive-symmetric-part A cannot be contracting.
  const PlantModel unstable = make_unobservable_unstable();
  CHECK(ocm_lmi_margin(Eigen::MatrixXd::Identity(2, 2),
                       Eigen::VectorXd::Zero(2), unstable,
                       Eigen::MatrixXd::Identity(2, 2), 0.0, 0.5) < 0.0);
}

TEST_CASE("synthesize_ccm: scalar autonomous plant") {
  const PlantModel p = make_scalar_plant(-1.0, false);
  const AxisBox dom(Eigen::VectorXd::Constant(1, -1.0),
                    Eigen::VectorXd::Constant(1, 1.0));
  SynthesisConfig cfg;
  cfg.rate_grid = {0.5, 0.9};
  cfg.max_iters = 500;
  const SynthesizedMetric m = synthesize_ccm(p, dom, cfg);
  CHECK(m.feasible);
  CHECK(m.verify_margin >= -1e-8);
  // lambda = 0.9 wins: objective 1/lambda with cond ~ 1.
  CHECK(m.spec.rate == doctest::Approx(0.9));

  SynthesisConfig bad = cfg;
  bad.rate_grid = {1.5};
  const SynthesizedMetric inf = synthesize_ccm(p, dom, bad);
  CHECK_FALSE(inf.feasible);
  CHECK(inf.worst_margin < bad.margin);
  CHECK(inf.report.find("infeasible") != std::string::npos);
}

TEST_CASE("synthesize_ccm: double integrator matches grid oracle") {
  const PlantModel p = make_double_integrator();
  const AxisBox dom(Eigen::VectorXd::Constant(2, -1.0),
                    Eigen::VectorXd::Constant(2, 1.0));
  SynthesisConfig cfg;
  cfg.rate_grid = {0.5};
  cfg.beta_lo = 0.05;
  cfg.beta_hi = 10.0;
  cfg.kappa_hi = 400.0;
  cfg.kappa_tol = 0.1;
  cfg.max_iters = 4000;
  const SynthesizedMetric m = synthesize_ccm(p, dom, cfg);
  CHECK(m.feasible);
  const double oracle =
      di_oracle_best_objective(0.5, cfg.beta_lo, cfg.beta_hi, cfg.margin);
  CHECK(m.objective >= oracle * 0.999);
  CHECK(m.objective <= oracle * 1.05);

  // Rate monotonicity on the same metric: lower rates only gain margin.
  const double m_at = verify_ccm(m.dual, p, dom, m.spec.rate, 50, 5);
  const double m_lower = verify_ccm(m.dual, p, dom, 0.25, 50, 5);
  CHECK(m_lower >= m_at - 1e-12);
}

TEST_CASE("synthesize_ccm: arm14 linear chain") {
  const PlantModel p = make_arm14_plant();
  const AxisBox dom = AxisBox::unbounded(14);
  SynthesisConfig cfg;
  cfg.rate_grid = {1.0};
  cfg.beta_lo = 0.05;
  cfg.beta_hi = 50.0;
  cfg.kappa_hi = 1000.0;
  cfg.kappa_tol = 50.0;
  cfg.max_iters = 3000;
  const SynthesizedMetric m = synthesize_ccm(p, dom, cfg);
  CHECK(m.feasible);
  CHECK(m.verify_margin >= -1e-8);

  // Linear plant: margins are state-independent.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 2.0);
  Eigen::VectorXd x1(14), x2(14);
  for (int i = 0; i < 14; ++i) {
    x1[i] = g(rng);
    x2[i] = g(rng);
  }
  CHECK(std::abs(ccm_lmi_margin(m.dual, x1, p, 1.0) -
                 ccm_lmi_margin(m.dual, x2, p, 1.0)) < 1e-10);
}

TEST_CASE("synthesize_ocm: fully observed stable system needs little gain") {
  PlantModel p = make_scalar_plant(-1.0, true);
  p.n_x = 2;
  Eigen::MatrixXd a = -Eigen::MatrixXd::Identity(2, 2);
  p.drift = [a](const Eigen::VectorXd& x) { return Eigen::VectorXd(a * x); };
  p.jacobian = [a](const Eigen::VectorXd&) { return a; };
  p.drift_poly = p.drift;
  p.jacobian_poly = p.jacobian;
  const AxisBox dom = AxisBox::unbounded(2);
  SynthesisConfig cfg;
  cfg.rate_grid = {0.5};
  cfg.max_iters = 800;
  const SynthesizedMetric m =
      synthesize_ocm(p, dom, Eigen::MatrixXd::Identity(2, 2), cfg);
  CHECK(m.feasible);
  CHECK(m.spec.rho < 1.0);
  CHECK(m.verify_margin >= -1e-8);
}

TEST_CASE("synthesize_ocm: arm17 with orientation and joint observations") {
  const PlantModel arm = make_arm17_plant();
  Eigen::MatrixXd c_r = Eigen::MatrixXd::Zero(10, 17);
  for (int i = 0; i < 10; ++i) c_r(i, i) = 1.0;  // phi and j, not jdot
  SynthesisConfig cfg;
  cfg.rate_grid = {0.3};
  cfg.beta_lo = 0.02;
  cfg.beta_hi = 10.0;
  cfg.kappa_hi = 500.0;
  cfg.kappa_tol = 100.0;
  cfg.max_iters = 3000;
  const SynthesizedMetric m =
      synthesize_ocm(arm, AxisBox::unbounded(17), c_r, cfg);
  CHECK(m.feasible);
  CHECK(m.verify_margin >= -1e-8);
}

TEST_CASE("synthesize_ocm: unobservable unstable mode is infeasible") {
  const PlantModel p = make_unobservable_unstable();
  Eigen::MatrixXd c_r(1, 2);
  c_r << 1.0, 0.0;
  SynthesisConfig cfg;
  cfg.rate_grid = {0.2};
  cfg.max_iters = 400;
  const SynthesizedMetric m =
      synthesize_ocm(p, AxisBox::unbounded(2), c_r, cfg);
  // The (2,2) entry of the LMI is 2 W22 (1 + lambda) > 0 for any rho.
  CHECK_FALSE(m.feasible);
  CHECK(m.report.find("infeasible") != std::string::npos);
}
