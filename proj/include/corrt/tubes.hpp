#pragma once

#include <Eigen/Dense>
#include <vector>

#include "corrt/geometry.hpp"
#include "corrt/perception.hpp"

namespace corrt {

/// Constants of the coupled affine tracking/estimation bound
///   d/dt [dc, de] <= [[-lambda_c, L_dk], [coupling, -lambda_e]] [dc, de]
///                  + [input_c, input_e_base + eps_gain * eps_bar(t)].
/// The matrix must be Metzler (nonnegative off-diagonals).
struct TubeRhsConstants {
  double lambda_c = 0.0;
  double lambda_e = 0.0;
  double l_delta_k = 0.0;
  double coupling = 0.0;  // nonzero only in eps mode 2
  double input_c = 0.0;
  double input_e_base = 0.0;
  double eps_gain = 0.0;  // (rho/2) sqrt(eigmax(M_e))
  int eps_mode = 1;

  Eigen::Matrix2d matrix() const;
  bool is_metzler() const { return l_delta_k >= 0.0 && coupling >= 0.0; }
};

/// Estimated constants entering the tube RHS; NaN marks a missing value and
/// assemble_rhs lists every missing name it needs for the chosen mode.
struct TubeConstants {
  double l_delta_k = kNaN;
  double l_hinv = kNaN;
  double l_p = kNaN;
  double eps1 = kNaN;
  double dispersion = kNaN;
  static constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
};

struct DisturbanceBounds {
  double wx_bar = 0.0;
  double wy_bar = 0.0;
  double sigma_by = 1.0;  // max singular value of B_y
};

TubeRhsConstants assemble_rhs(const MetricSpec& ccm, const MetricSpec& ocm,
                              const TubeConstants& constants,
                              const DisturbanceBounds& dist, int eps_mode);

struct TubeTrajectory {
  std::vector<double> t;
  std::vector<double> dc;
  std::vector<double> de;
  std::vector<double> eps;  // per-step eps_bar samples used
  bool caps_ok = true;      // dc <= c_bar and de <= e_bar throughout
};

// Exact affine stepping with inputs held at their per-interval supremum;
// upper-bounds the Theorem-1 integral on the grid. `eps_samples` has one
// value per grid point (steps + 1 entries).
TubeTrajectory propagate(const TubeRhsConstants& rhs,
                         const std::vector<double>& eps_samples, double dc0,
                         double de0, double t0, double dt, double c_bar = kInf,
                         double e_bar = kInf);

// eps_bar_1: the constant uniform bound.
double eps1(double eps1_constant);

// eps_bar_2 (Lipschitz-local): L_p dc / sqrt(eigmin(M_c)) + min over data of
// L_p ||(yr*,theta) - (yr_i,theta_i)|| + e_i. `eps2_tilde` omits the leading
// dc term (regrouped into the coupling entry).
double eps2(const Eigen::VectorXd& yr_star, const Eigen::VectorXd& theta,
            double dc, const Dataset& data, double l_p, double eig_min_mc);
double eps2_tilde(const Eigen::VectorXd& yr_star, const Eigen::VectorXd& theta,
                  const Dataset& data, double l_p);

/// eps_bar_3 (dispersion-buffered): L_p * R + max training error over the
/// data inside the reduced tube, theta-buffered by the smallest ball that
/// captures a datapoint. If no datapoint falls in the tube spatially, the
/// tube radius is inflated to the nearest datapoint first (lexicographic
/// (spatial, theta) nearest-datapoint search); the result stays an upper
/// bound because enlarging the set can only raise the max.
double eps3_raw(const Ellipsoid& reduced_tube, const Eigen::VectorXd& theta,
                const Dataset& data, double l_p, double dispersion);

// Forward-running max over a lookahead window, linearly interpolated: a
// continuous upper envelope of the raw eps_bar_3 sequence.
std::vector<double> smooth_forward_max(const std::vector<double>& raw,
                                       int window);

}  // namespace corrt
