#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>

#include "corrt/dynamics.hpp"
#include "corrt/geometry.hpp"

namespace corrt {

/// Raised when no feasible control exists inside the control box, or when the
/// contraction half-space is degenerate while still violated. The planner
/// treats this as a rejected extension; at runtime it flags a certificate
/// violation.
struct ControlInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Min-norm tracking controller for a constant CCM. The geodesic is the
/// chord, so the contraction condition is one affine constraint in the
/// feedback and the min-norm solution is a closed-form half-space projection.
class TrackingController {
 public:
  TrackingController(const PlantModel* plant, MetricSpec ccm);

  // Slack of the contraction constraint at `x` for feedback u_fb:
  //   (x-x*)^T M_c (f(x) - f(x*) + B u_fb) + lambda_c d_c(x,x*)^2.
  // Feasible iff <= 0; affine in u_fb.
  double constraint_slack(const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref,
                          const Eigen::VectorXd& u_ref,
                          const Eigen::VectorXd& u_fb) const;

  // u = u_ref + u_fb with the minimum-norm feasible u_fb; throws
  // ControlInfeasible when the result leaves the control box or the
  // constraint cannot be met.
  Eigen::VectorXd min_norm_control(const Eigen::VectorXd& xhat,
                                   const Eigen::VectorXd& x_ref,
                                   const Eigen::VectorXd& u_ref) const;

  // Projection of u(xhat,...) onto the feasible set at the true state x.
  Eigen::VectorXd closest_control(const Eigen::VectorXd& xhat,
                                  const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& x_ref,
                                  const Eigen::VectorXd& u_ref) const;

  // ||R_c B (u(xhat,...) - u_closest)||; zero whenever u(xhat,...) already
  // contracts at x.
  double delta_k(const Eigen::VectorXd& xhat, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& x_ref,
                 const Eigen::VectorXd& u_ref) const;

  const MetricSpec& ccm() const { return ccm_; }
  const PlantModel& plant() const { return *plant_; }

 private:
  // Minimum-norm point of {u_fb : slack0 + a.u_fb <= 0} relative to `base`.
  Eigen::VectorXd project_feasible(const Eigen::VectorXd& base, double slack_at_base,
                                   const Eigen::VectorXd& a) const;

  const PlantModel* plant_;
  MetricSpec ccm_;
};

/// Decodes a raw observation (y, theta) into the reduced measurement used by
/// the observer innovation.
using PerceptionDecoder =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& theta)>;

/// Reduced-observation contraction observer:
///   xhat_dot = f(xhat) + B u + 0.5 rho M_e C_r^T (hinv(y,theta) - C_r xhat).
class Observer {
 public:
  Observer(const PlantModel* plant, MetricSpec ocm, Eigen::MatrixXd c_r,
           PerceptionDecoder decoder);

  // One RK4 step with the observation held over the interval.
  Eigen::VectorXd step(const Eigen::VectorXd& xhat, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& theta, const Eigen::VectorXd& u,
                       double dt) const;

  Eigen::VectorXd innovation_rate(const Eigen::VectorXd& xhat,
                                  const Eigen::VectorXd& y_reduced) const;

  const MetricSpec& ocm() const { return ocm_; }  // metric is W_e
  const Eigen::MatrixXd& gain() const { return gain_; }
  const Eigen::MatrixXd& selector() const { return c_r_; }

 private:
  const PlantModel* plant_;
  MetricSpec ocm_;
  Eigen::MatrixXd c_r_;
  Eigen::MatrixXd gain_;  // 0.5 rho M_e C_r^T
  PerceptionDecoder decoder_;
};

}  // namespace corrt
