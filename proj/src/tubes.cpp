#include "corrt/tubes.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace corrt {

Eigen::Matrix2d TubeRhsConstants::matrix() const {
  Eigen::Matrix2d a;
  a << -lambda_c, l_delta_k, coupling, -lambda_e;
  return a;
}

TubeRhsConstants assemble_rhs(const MetricSpec& ccm, const MetricSpec& ocm,
                              const TubeConstants& constants,
                              const DisturbanceBounds& dist, int eps_mode) {
  std::ostringstream missing;
  auto need = [&](double v, const char* name) {
    if (std::isnan(v)) missing << name << " ";
    return v;
  };

  TubeRhsConstants rhs;
  rhs.eps_mode = eps_mode;
  rhs.lambda_c = ccm.rate;
  rhs.lambda_e = ocm.rate;
  rhs.l_delta_k = need(constants.l_delta_k, "L_delta_k");

  const double eig_max_mc = ccm.metric.eig_max();
  const double eig_max_we = ocm.metric.eig_max();
  const double eig_max_me = 1.0 / ocm.metric.eig_min();  // M_e = W_e^-1
  const double eig_min_mc = ccm.metric.eig_min();

  rhs.input_c = std::sqrt(eig_max_mc) * dist.wx_bar;
  const double l_hinv = need(constants.l_hinv, "L_hinv");
  rhs.input_e_base =
      std::sqrt(eig_max_we) * dist.wx_bar +
      0.5 * ocm.rho * std::sqrt(eig_max_me) * l_hinv *
          std::sqrt(dist.sigma_by) * dist.wy_bar;
  rhs.eps_gain = 0.5 * ocm.rho * std::sqrt(eig_max_me);

  switch (eps_mode) {
    case 1:
      need(constants.eps1, "eps1");
      break;
    case 2:
      rhs.coupling = 0.5 * need(constants.l_p, "L_p") * ocm.rho *
                     std::sqrt(eig_max_me / eig_min_mc);
      break;
    case 3:
      need(constants.l_p, "L_p");
      need(constants.dispersion, "dispersion");
      break;
    default:
      throw std::invalid_argument("assemble_rhs: eps_mode must be 1, 2 or 3");
  }

  if (!missing.str().empty()) {
    throw std::invalid_argument("assemble_rhs: missing constants: " +
                                missing.str());
  }
  if (!rhs.is_metzler()) {
    throw std::logic_error("assemble_rhs: matrix is not Metzler");
  }
  return rhs;
}

TubeTrajectory propagate(const TubeRhsConstants& rhs,
                         const std::vector<double>& eps_samples, double dc0,
                         double de0, double t0, double dt, double c_bar,
                         double e_bar) {
  if (rhs.lambda_c <= 0.0 || rhs.lambda_e <= 0.0) {
    throw std::invalid_argument("propagate: contraction rates must be positive");
  }
  if (dc0 < 0.0 || de0 < 0.0) {
    throw std::invalid_argument("propagate: initial bounds must be nonnegative");
  }
  if (!rhs.is_metzler()) {
    throw std::logic_error("propagate: matrix is not Metzler");
  }
  if (eps_samples.empty()) {
    throw std::invalid_argument("propagate: eps samples required");
  }
  if (dt <= 0.0) throw std::invalid_argument("propagate: dt must be positive");

  const int steps = static_cast<int>(eps_samples.size()) - 1;
  // Exact one-step affine response: [E, Phi1] from the augmented exponential
  // exp([[A, I],[0, 0]] dt); d+ = E d + Phi1 v with v held at its interval sup.
  Eigen::Matrix4d aug = Eigen::Matrix4d::Zero();
  aug.topLeftCorner<2, 2>() = rhs.matrix();
  aug.topRightCorner<2, 2>().setIdentity();
  const Eigen::Matrix4d exp_aug = (aug * dt).exp();
  const Eigen::Matrix2d e_step = exp_aug.topLeftCorner<2, 2>();
  const Eigen::Matrix2d phi1 = exp_aug.topRightCorner<2, 2>();

  TubeTrajectory out;
  out.t.reserve(steps + 1);
  out.dc.reserve(steps + 1);
  out.de.reserve(steps + 1);
  out.eps = eps_samples;

  Eigen::Vector2d d(dc0, de0);
  out.t.push_back(t0);
  out.dc.push_back(d[0]);
  out.de.push_back(d[1]);
  out.caps_ok = d[0] <= c_bar && d[1] <= e_bar;
  for (int k = 0; k < steps; ++k) {
    const double eps_sup = std::max(eps_samples[k], eps_samples[k + 1]);
    const Eigen::Vector2d v(rhs.input_c,
                            rhs.input_e_base + rhs.eps_gain * eps_sup);
    d = e_step * d + phi1 * v;
    out.t.push_back(t0 + (k + 1) * dt);
    out.dc.push_back(d[0]);
    out.de.push_back(d[1]);
    if (d[0] > c_bar || d[1] > e_bar) out.caps_ok = false;
  }
  return out;
}

double eps1(double eps1_constant) { return eps1_constant; }

double eps2_tilde(const Eigen::VectorXd& yr_star, const Eigen::VectorXd& theta,
                  const Dataset& data, double l_p) {
  if (data.size() == 0) throw std::invalid_argument("eps2: empty dataset");
  const Eigen::VectorXd dyr2 =
      (data.yr.rowwise() - yr_star.transpose()).rowwise().squaredNorm();
  const Eigen::VectorXd dth2 =
      (data.theta.rowwise() - theta.transpose()).rowwise().squaredNorm();
  const Eigen::VectorXd bound =
      l_p * (dyr2 + dth2).cwiseSqrt() + data.errors;
  return bound.minCoeff();
}

double eps2(const Eigen::VectorXd& yr_star, const Eigen::VectorXd& theta,
            double dc, const Dataset& data, double l_p, double eig_min_mc) {
  return l_p * dc / std::sqrt(eig_min_mc) +
         eps2_tilde(yr_star, theta, data, l_p);
}

double eps3_raw(const Ellipsoid& reduced_tube, const Eigen::VectorXd& theta,
                const Dataset& data, double l_p, double dispersion) {
  if (data.size() == 0) throw std::invalid_argument("eps3: empty dataset");
  const int n = data.size();

  // Vectorized metric distances of all datapoints to the tube center, and
  // theta distances to the query parameter.
  const Eigen::MatrixXd diff =
      data.yr.rowwise() - reduced_tube.center.transpose();
  const Eigen::VectorXd md2 =
      ((diff * reduced_tube.metric.matrix()).array() * diff.array())
          .rowwise()
          .sum();
  const Eigen::VectorXd md = md2.cwiseMax(0.0).cwiseSqrt();
  const Eigen::VectorXd td =
      (data.theta.rowwise() - theta.transpose()).rowwise().norm();

  double best_s = kInf, best_eta = kInf;
  for (int i = 0; i < n; ++i) {
    const double s = std::max(0.0, md[i] - reduced_tube.radius);
    if (s < best_s - 1e-12 ||
        (std::abs(s - best_s) <= 1e-12 && td[i] < best_eta)) {
      best_s = s;
      best_eta = td[i];
    }
  }

  const double radius = reduced_tube.radius + best_s + 1e-12;
  const double eta = best_eta + 1e-12;
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    if (md[i] <= radius && td[i] <= eta) worst = std::max(worst, data.errors[i]);
  }
  return l_p * dispersion + worst;
}

std::vector<double> smooth_forward_max(const std::vector<double>& raw,
                                       int window) {
  std::vector<double> out(raw.size());
  const int n = static_cast<int>(raw.size());
  for (int k = 0; k < n; ++k) {
    double v = raw[k];
    for (int j = k + 1; j <= std::min(n - 1, k + window); ++j) {
      v = std::max(v, raw[j]);
    }
    out[k] = v;
  }
  return out;
}

}  // namespace corrt
