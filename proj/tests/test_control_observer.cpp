#include "corrt/control_observer.hpp"

#include <cmath>
#include <random>

#include "doctest.h"

using namespace corrt;

namespace {

PlantModel make_scalar_input_plant() {
  PlantModel p;
  p.label = "scalar_u";
  p.n_x = 1;
  p.n_u = 1;
  p.n_w = 0;
  p.drift = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Zero(x.size());
  };
  p.jacobian = [](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Zero(1, 1);
  };
  p.drift_poly = p.drift;
  p.jacobian_poly = p.jacobian;
  p.input_matrix = Eigen::MatrixXd::Identity(1, 1);
  p.disturbance_matrix = Eigen::MatrixXd::Zero(1, 0);
  p.input_nullspace = Eigen::MatrixXd::Zero(1, 0);
  p.control_box = AxisBox::unbounded(1);
  p.linear_dynamics = true;
  return p;
}

PlantModel make_di_plant() {
  PlantModel p;
  p.label = "di";
  p.n_x = 2;
  p.n_u = 1;
  p.n_w = 0;
  Eigen::MatrixXd a(2, 2);
  a << 0, 1, 0, 0;
  p.drift = [a](const Eigen::VectorXd& x) { return Eigen::VectorXd(a * x); };
  p.jacobian = [a](const Eigen::VectorXd&) { return a; };
  p.drift_poly = p.drift;
  p.jacobian_poly = p.jacobian;
  p.input_matrix = (Eigen::MatrixXd(2, 1) << 0, 1).finished();
  p.disturbance_matrix = Eigen::MatrixXd::Zero(2, 0);
  p.input_nullspace = (Eigen::MatrixXd(2, 1) << 1, 0).finished();
  p.control_box = AxisBox::unbounded(1);
  p.linear_dynamics = true;
  return p;
}

// One-constraint QP oracle: minimize ||u - base||^2 s.t. s0 + a.u <= 0, by
// projected gradient (independent of the closed-form path under test).
Eigen::VectorXd qp_oracle(const Eigen::VectorXd& base, double s0,
                          const Eigen::VectorXd& a) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(base.size());
  const double lr = 0.2;
  for (int it = 0; it < 20000; ++it) {
    Eigen::VectorXd g = 2.0 * (u - base);
    u -= lr * g;
    const double viol = s0 + a.dot(u);
    if (viol > 0.0 && a.squaredNorm() > 0.0) {
      u -= (viol / a.squaredNorm()) * a;  // project back onto the half-space
    }
  }
  return u;
}

}  // namespace

TEST_CASE("contraction slack: scalar hand example") {
  const PlantModel p = make_scalar_input_plant();
  MetricSpec ccm(MetricMatrix::identity(1), 1.0, 0.0, AxisBox::unbounded(1));
  const TrackingController ctrl(&p, ccm);
  Eigen::VectorXd x(1), xs(1), us(1);
  x << 1.0;
  xs << 0.0;
  us << 0.0;
  // slack(u_fb) = u_fb + 1.
  for (double ufb : {-2.0, -1.0, 0.0, 0.5}) {
    Eigen::VectorXd u(1);
    u << ufb;
    CHECK(ctrl.constraint_slack(x, xs, us, u) == doctest::Approx(ufb + 1.0));
  }
  // Minimum-norm feedback lands on the boundary u_fb = -1.
  const Eigen::VectorXd u = ctrl.min_norm_control(x, xs, us);
  CHECK(u[0] == doctest::Approx(-1.0));

  // x = x*: u = u*.
  Eigen::VectorXd us2(1);
  us2 << 0.37;
  CHECK(ctrl.min_norm_control(xs, xs, us2)[0] == doctest::Approx(0.37));
}

TEST_CASE("min-norm matches QP oracle and satisfies the certificate") {
  const PlantModel p = make_di_plant();
  Eigen::MatrixXd mc(2, 2);
  mc << 2.0, -0.8, -0.8, 1.5;
  MetricSpec ccm(MetricMatrix(mc), 0.8, 0.0, AxisBox::unbounded(2));
  const TrackingController ctrl(&p, ccm);

  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  int checked = 0;
  for (int k = 0; k < 10000; ++k) {
    Eigen::VectorXd xh(2), xs(2), us(1);
    xh << g(rng), g(rng);
    xs << g(rng), g(rng);
    us << g(rng);
    const Eigen::VectorXd u = ctrl.min_norm_control(xh, xs, us);
    const double slack = ctrl.constraint_slack(xh, xs, us, u - us);
    CHECK(slack <= 1e-9);

    // Oracle comparison for the feedback component.
    const double s0 = ctrl.constraint_slack(xh, xs, us, Eigen::VectorXd::Zero(1));
    const Eigen::VectorXd a =
        p.input_matrix.transpose() * (ccm.metric.matrix() * (xh - xs));
    const Eigen::VectorXd oracle = qp_oracle(Eigen::VectorXd::Zero(1), s0, a);
    CHECK((u - us - oracle).norm() < 1e-6);
    ++checked;
  }
  CHECK(checked == 10000);
}

TEST_CASE("closest control and delta_k") {
  const PlantModel p = make_di_plant();
  MetricSpec ccm(MetricMatrix::identity(2), 0.5, 0.0, AxisBox::unbounded(2));
  const TrackingController ctrl(&p, ccm);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);

  // xhat = x: delta_k = 0.
  for (int k = 0; k < 100; ++k) {
    Eigen::VectorXd x(2), xs(2), us(1);
    x << g(rng), g(rng);
    xs << g(rng), g(rng);
    us << g(rng);
    CHECK(ctrl.delta_k(x, x, xs, us) == doctest::Approx(0.0).epsilon(1e-12));
  }

  // If u(xhat) is already feasible at x, u_closest equals it.
  int feasible_cases = 0, infeasible_cases = 0;
  for (int k = 0; k < 2000; ++k) {
    Eigen::VectorXd xh(2), x(2), xs(2), us(1);
    xh << g(rng), g(rng);
    x << g(rng), g(rng);
    xs << g(rng), g(rng);
    us << g(rng);
    const Eigen::VectorXd u_hat = ctrl.min_norm_control(xh, xs, us);
    const double slack_at_x = ctrl.constraint_slack(x, xs, us, u_hat - us);
    const Eigen::VectorXd u_close = ctrl.closest_control(xh, x, xs, us);
    if (slack_at_x <= 0.0) {
      CHECK((u_close - u_hat).norm() < 1e-12);
      CHECK(ctrl.delta_k(xh, x, xs, us) == doctest::Approx(0.0));
      ++feasible_cases;
    } else {
      // Tightness: the closest feasible control is no farther than u(x).
      const Eigen::VectorXd u_x = ctrl.min_norm_control(x, xs, us);
      CHECK((u_hat - u_close).norm() <= (u_hat - u_x).norm() + 1e-9);
      ++infeasible_cases;
    }
  }
  CHECK(feasible_cases > 100);
  CHECK(infeasible_cases > 100);
}

TEST_CASE("closed-loop IES decay on an LTI plant") {
  const PlantModel p = make_di_plant();
  // Dual metric W with strict margin: 2 W01 + 2 lambda W00 = -0.4 < 0.
  Eigen::MatrixXd w(2, 2);
  w << 3.0, -1.4, -1.4, 1.0;
  const double lambda = 0.4;
  REQUIRE(2.0 * w(0, 1) + 2.0 * lambda * w(0, 0) < 0.0);
  MetricSpec ccm(MetricMatrix(w.inverse().eval()), lambda, 0.0,
                 AxisBox::unbounded(2));
  const TrackingController ctrl(&p, ccm);

  // Track the origin with u* = 0 from a perturbed start, w = 0. The
  // continuous-time claim is tested by integrating the closed-loop vector
  // field (controller evaluated inside every RK4 stage).
  Eigen::VectorXd x(2);
  x << 0.7, -0.4;
  const Eigen::VectorXd xs = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd us = Eigen::VectorXd::Zero(1);
  const double dt = 0.002;
  const double d0 = riemannian_distance(x, xs, ccm.metric);
  const auto closed_loop = [&](const Eigen::VectorXd& s) -> Eigen::VectorXd {
    return p.f(s) + p.input_matrix * ctrl.min_norm_control(s, xs, us);
  };
  double t = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const Eigen::VectorXd k1 = closed_loop(x);
    const Eigen::VectorXd k2 = closed_loop(x + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = closed_loop(x + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = closed_loop(x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += dt;
    const double d = riemannian_distance(x, xs, ccm.metric);
    CHECK(d <= d0 * std::exp(-lambda * t) * (1.0 + 1e-6) + 1e-12);
  }
}

TEST_CASE("observer: zero innovation keeps a perfect estimate") {
  const PlantModel p = make_di_plant();
  MetricSpec ocm(MetricMatrix::identity(2), 1.0, 2.0, AxisBox::unbounded(2));
  Eigen::MatrixXd c_r(1, 2);
  c_r << 1, 0;
  const Observer obs(&p, ocm, c_r,
                     [](const Eigen::VectorXd& y, const Eigen::VectorXd&) {
                       return y;  // y already reduced
                     });
  // Continuous measurement: integrate the joint (x, xhat) system with the
  // innovation evaluated inside each stage; it stays identically zero.
  Eigen::VectorXd x(2), xh(2), u(1);
  x << 0.3, -0.2;
  xh = x;
  u << 0.4;
  const double dt = 0.01;
  const auto joint = [&](const Eigen::VectorXd& z) {
    Eigen::VectorXd dz(4);
    const Eigen::VectorXd xs = z.head(2), xhs = z.tail(2);
    dz.head(2) = p.f(xs) + p.input_matrix * u;
    dz.tail(2) = p.f(xhs) + p.input_matrix * u +
                 obs.innovation_rate(xhs, c_r * xs);
    return dz;
  };
  Eigen::VectorXd z(4);
  z << x, xh;
  for (int k = 0; k < 200; ++k) {
    const Eigen::VectorXd k1 = joint(z);
    const Eigen::VectorXd k2 = joint(z + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = joint(z + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = joint(z + dt * k3);
    z += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    CHECK((z.head(2) - z.tail(2)).norm() < 1e-9);
  }

  // Zero-order-hold API at an equilibrium: exact fixed point.
  Eigen::VectorXd xe(2), ue(1);
  xe << 0.3, 0.0;
  ue << 0.0;
  Eigen::VectorXd xhe = xe;
  for (int k = 0; k < 50; ++k) {
    xhe = obs.step(xhe, c_r * xe, Eigen::VectorXd::Zero(0), ue, dt);
    CHECK((xhe - xe).norm() < 1e-12);
  }
}

TEST_CASE("observer: scalar first-order lag") {
  // xhat_dot = 0.5 rho m (x - xhat) with 0.5 rho m = 1 -> xhat = 1 - e^-t.
  PlantModel p = make_scalar_input_plant();
  p.input_matrix = Eigen::MatrixXd::Zero(1, 1);
  MetricSpec ocm(MetricMatrix::identity(1), 1.0, 2.0, AxisBox::unbounded(1));
  const Observer obs(&p, ocm, Eigen::MatrixXd::Identity(1, 1),
                     [](const Eigen::VectorXd& y, const Eigen::VectorXd&) {
                       return y;
                     });
  Eigen::VectorXd xh = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd y(1), u(1);
  y << 1.0;
  u << 0.0;
  double t = 0.0;
  for (int k = 0; k < 300; ++k) {
    xh = obs.step(xh, y, Eigen::VectorXd::Zero(0), u, 0.005);
    t += 0.005;
  }
  CHECK(xh[0] == doctest::Approx(1.0 - std::exp(-t)).epsilon(1e-6));
}

TEST_CASE("observer input validation") {
  const PlantModel p = make_di_plant();
  MetricSpec ocm(MetricMatrix::identity(2), 1.0, 1.0, AxisBox::unbounded(2));
  Eigen::MatrixXd c_r(1, 2);
  c_r << 1, 0;
  const Observer obs(&p, ocm, c_r,
                     [](const Eigen::VectorXd& y, const Eigen::VectorXd&) {
                       return y;
                     });
  Eigen::VectorXd bad(1);
  bad << std::nan("");
  CHECK_THROWS(obs.step(Eigen::VectorXd::Zero(2), bad, Eigen::VectorXd::Zero(0),
                        Eigen::VectorXd::Zero(1), 0.01));
  CHECK_THROWS(obs.step(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1),
                        Eigen::VectorXd::Zero(0), Eigen::VectorXd::Zero(1),
                        0.0));
}
