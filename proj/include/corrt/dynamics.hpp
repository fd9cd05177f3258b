#pragma once

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "corrt/geometry.hpp"

namespace corrt {

/// Least-squares degree-5 polynomial fit of sin/cos on [-pi/2, pi/2], used to
/// evaluate metric-synthesis margins on polynomialized dynamics.
class PolyTrig {
 public:
  PolyTrig();
  double sin(double x) const;
  double cos(double x) const;
  double dsin(double x) const;
  double dcos(double x) const;

 private:
  Eigen::VectorXd sin_c_, cos_c_;  // coefficients of x^0 .. x^5
};

const PolyTrig& poly_trig();

using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using MatrixFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// Control-affine plant: xdot = f(x) + B u + B_w w.
struct PlantModel {
  std::string label;
  int n_x = 0, n_u = 0, n_w = 0;
  VectorFn drift;            // f(x), exact
  MatrixFn jacobian;         // A(x) = df/dx, exact
  VectorFn drift_poly;       // polynomialized f for synthesis margins
  MatrixFn jacobian_poly;    // polynomialized A
  Eigen::MatrixXd input_matrix;        // B
  Eigen::MatrixXd disturbance_matrix;  // B_w, ||B_w|| <= 1
  Eigen::MatrixXd input_nullspace;     // B_perp, B_perp^T B = 0
  AxisBox control_box = AxisBox::unbounded(0);
  bool linear_dynamics = false;

  Eigen::VectorXd f(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd A(const Eigen::VectorXd& x) const;
  Eigen::VectorXd xdot(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& w) const;
};

PlantModel make_car_plant();
PlantModel make_quadrotor_plant();
PlantModel make_arm14_plant();
PlantModel make_arm17_plant();
PlantModel make_plant(const std::string& label);

// Verification helper: max relative error between A(x) and central finite
// differences of f at x.
double jacobian_fd_error(const PlantModel& plant, const Eigen::VectorXd& x);

struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
};

using Signal = std::function<Eigen::VectorXd(double)>;

// Fixed-step RK4 rollout of xdot = f(x) + B u(t) + B_w w(t). Controls are
// validated against the plant's control box at every step.
Trajectory integrate(const PlantModel& plant, const Eigen::VectorXd& x0,
                     const Signal& control, const Signal& disturbance,
                     double t0, double t1, double dt);

// Single RK4 step with zero-order-hold u and w.
Eigen::VectorXd rk4_step(const PlantModel& plant, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                         double dt);

enum class DisturbancePolicy { kZero, kUniformBall, kWorstCaseAxis, kSeeded };

DisturbancePolicy disturbance_policy_from_string(const std::string& s);

/// Seeded generator of disturbance samples with ||w|| <= bound exactly.
class DisturbanceGenerator {
 public:
  DisturbanceGenerator(int dim, double bound, DisturbancePolicy policy,
                       uint64_t seed);

  // `direction_hint` steers the worst-case policy (e.g. current tracking
  // error); ignored by the other policies.
  Eigen::VectorXd sample(const Eigen::VectorXd& direction_hint);
  Eigen::VectorXd sample();

  double bound() const { return bound_; }

 private:
  int dim_;
  double bound_;
  DisturbancePolicy policy_;
  std::mt19937_64 rng_;
};

}  // namespace corrt
