#include "corrt/control_observer.hpp"

#include <cmath>

namespace corrt {

TrackingController::TrackingController(const PlantModel* plant, MetricSpec ccm)
    : plant_(plant), ccm_(std::move(ccm)) {
  if (ccm_.metric.dim() != plant_->n_x) {
    throw std::invalid_argument("TrackingController: metric dim mismatch");
  }
  if (ccm_.rate <= 0.0) {
    throw std::invalid_argument("TrackingController: rate must be positive");
  }
}

double TrackingController::constraint_slack(const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& x_ref,
                                            const Eigen::VectorXd& u_ref,
                                            const Eigen::VectorXd& u_fb) const {
  (void)u_ref;  // cancels in the chord form for control-affine B
  const Eigen::VectorXd d = x - x_ref;
  const Eigen::VectorXd md = ccm_.metric.matrix() * d;
  const double d2 = d.dot(md);
  return md.dot(plant_->f(x) - plant_->f(x_ref) +
                plant_->input_matrix * u_fb) +
         ccm_.rate * d2;
}

Eigen::VectorXd TrackingController::project_feasible(
    const Eigen::VectorXd& base, double slack_at_base,
    const Eigen::VectorXd& a) const {
  if (slack_at_base <= 0.0) return base;
  const double an2 = a.squaredNorm();
  if (an2 < 1e-16) {
    throw ControlInfeasible(
        "contraction constraint violated with vanishing control authority "
        "(certificate violation)");
  }
  return base - (slack_at_base / an2) * a;
}

Eigen::VectorXd TrackingController::min_norm_control(
    const Eigen::VectorXd& xhat, const Eigen::VectorXd& x_ref,
    const Eigen::VectorXd& u_ref) const {
  const Eigen::VectorXd zero_fb = Eigen::VectorXd::Zero(plant_->n_u);
  const double slack0 = constraint_slack(xhat, x_ref, u_ref, zero_fb);
  const Eigen::VectorXd a =
      plant_->input_matrix.transpose() *
      (ccm_.metric.matrix() * (xhat - x_ref));
  const Eigen::VectorXd u_fb = project_feasible(zero_fb, slack0, a);
  const Eigen::VectorXd u = u_ref + u_fb;
  if (!plant_->control_box.contains(u, 1e-9)) {
    throw ControlInfeasible("min-norm control leaves the control box");
  }
  return u;
}

Eigen::VectorXd TrackingController::closest_control(
    const Eigen::VectorXd& xhat, const Eigen::VectorXd& x,
    const Eigen::VectorXd& x_ref, const Eigen::VectorXd& u_ref) const {
  const Eigen::VectorXd u_hat = min_norm_control(xhat, x_ref, u_ref);
  const Eigen::VectorXd u_fb_hat = u_hat - u_ref;
  const double slack = constraint_slack(x, x_ref, u_ref, u_fb_hat);
  const Eigen::VectorXd a =
      plant_->input_matrix.transpose() * (ccm_.metric.matrix() * (x - x_ref));
  return u_ref + project_feasible(u_fb_hat, slack, a);
}

double TrackingController::delta_k(const Eigen::VectorXd& xhat,
                                   const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& x_ref,
                                   const Eigen::VectorXd& u_ref) const {
  const Eigen::VectorXd u_hat = min_norm_control(xhat, x_ref, u_ref);
  const Eigen::VectorXd u_close = closest_control(xhat, x, x_ref, u_ref);
  return (ccm_.metric.cholesky() * (plant_->input_matrix * (u_hat - u_close)))
      .norm();
}

Observer::Observer(const PlantModel* plant, MetricSpec ocm, Eigen::MatrixXd c_r,
                   PerceptionDecoder decoder)
    : plant_(plant),
      ocm_(std::move(ocm)),
      c_r_(std::move(c_r)),
      decoder_(std::move(decoder)) {
  if (ocm_.metric.dim() != plant_->n_x) {
    throw std::invalid_argument("Observer: metric dim mismatch");
  }
  if (ocm_.rho < 0.0) throw std::invalid_argument("Observer: rho must be >= 0");
  // W_e is the stored metric; the innovation gain uses M_e = W_e^{-1}.
  gain_ = 0.5 * ocm_.rho * ocm_.metric.inverse() * c_r_.transpose();
}

Eigen::VectorXd Observer::innovation_rate(const Eigen::VectorXd& xhat,
                                          const Eigen::VectorXd& y_reduced) const {
  return gain_ * (y_reduced - c_r_ * xhat);
}

Eigen::VectorXd Observer::step(const Eigen::VectorXd& xhat,
                               const Eigen::VectorXd& y,
                               const Eigen::VectorXd& theta,
                               const Eigen::VectorXd& u, double dt) const {
  if (dt <= 0.0) throw std::invalid_argument("Observer::step: dt must be > 0");
  if (!y.allFinite()) throw std::invalid_argument("Observer::step: NaN observation");
  const Eigen::VectorXd y_reduced = decoder_(y, theta);
  const auto deriv = [&](const Eigen::VectorXd& s) -> Eigen::VectorXd {
    return plant_->f(s) + plant_->input_matrix * u +
           innovation_rate(s, y_reduced);
  };
  const Eigen::VectorXd k1 = deriv(xhat);
  const Eigen::VectorXd k2 = deriv(xhat + 0.5 * dt * k1);
  const Eigen::VectorXd k3 = deriv(xhat + 0.5 * dt * k2);
  const Eigen::VectorXd k4 = deriv(xhat + dt * k3);
  return xhat + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace corrt
