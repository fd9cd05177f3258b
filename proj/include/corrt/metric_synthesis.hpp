#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "corrt/dynamics.hpp"
#include "corrt/geometry.hpp"

namespace corrt {

/// Search configuration for constant-metric synthesis: line search over the
/// contraction rate, bisection over the condition number, projected
/// subgradient ascent on the worst sampled LMI margin.
struct SynthesisConfig {
  std::vector<double> rate_grid;
  double kappa_lo = 1.0;
  double kappa_hi = 200.0;
  double kappa_tol = 2.0;
  double beta_lo = 0.02;
  double beta_hi = 100.0;
  int sample_count = 120;
  double margin = 1e-3;  // required LMI slack at every sample
  int max_iters = 5000;
  uint64_t seed = 1;
  double rho_lo = 1e-3;  // OCM multiplier search range
  double rho_hi = 1e4;
  int verify_multiplier = 10;
};

struct SynthesizedMetric {
  bool feasible = false;
  // For CCMs `spec.metric` is M_c = W^-1; for OCMs it is W_e itself.
  MetricSpec spec;
  Eigen::MatrixXd dual;  // the LMI variable W
  double objective = kInf;
  double worst_margin = -kInf;      // over the synthesis samples
  double verify_margin = -kInf;     // over the fresh denser verification set
  std::string report;

  explicit SynthesizedMetric(MetricSpec s) : spec(std::move(s)) {}
};

// Slack of the constant-metric CCM condition at one state:
//   margin = -lambda_max(B_perp^T (A W + W A^T + 2 lambda_c W) B_perp).
// Returns +inf for fully actuated plants (empty B_perp). Uses the plant's
// polynomialized Jacobian.
double ccm_lmi_margin(const Eigen::MatrixXd& w, const Eigen::VectorXd& x,
                      const PlantModel& plant, double lambda_c);

// Slack of the simplified OCM condition at one state:
//   margin = -lambda_max(W A + A^T W - rho C_r^T C_r + 2 lambda_e W).
double ocm_lmi_margin(const Eigen::MatrixXd& w_e, const Eigen::VectorXd& xhat,
                      const PlantModel& plant, const Eigen::MatrixXd& c_r,
                      double rho, double lambda_e);

double ccm_lmi_margin(const MetricMatrix& w, const Eigen::VectorXd& x,
                      const PlantModel& plant, double lambda_c);
double ocm_lmi_margin(const MetricMatrix& w_e, const Eigen::VectorXd& xhat,
                      const PlantModel& plant, const Eigen::MatrixXd& c_r,
                      double rho, double lambda_e);

SynthesizedMetric synthesize_ccm(const PlantModel& plant, const AxisBox& d_c,
                                 const SynthesisConfig& cfg);

SynthesizedMetric synthesize_ocm(const PlantModel& plant, const AxisBox& d_e,
                                 const Eigen::MatrixXd& c_r,
                                 const SynthesisConfig& cfg);

// Worst margin over a fresh sample set (used for the verification report and
// the re-verification property tests).
double verify_ccm(const Eigen::MatrixXd& w, const PlantModel& plant,
                  const AxisBox& d_c, double lambda_c, int samples,
                  uint64_t seed);
double verify_ocm(const Eigen::MatrixXd& w_e, const PlantModel& plant,
                  const Eigen::MatrixXd& c_r, const AxisBox& d_e, double rho,
                  double lambda_e, int samples, uint64_t seed);

// Samples used for LMI evaluation: uniform on finite axes, standard normal
// scaled by 5 on unbounded axes (disclosed in the verification report).
std::vector<Eigen::VectorXd> sample_domain(const AxisBox& box, int count,
                                           uint64_t seed);

}  // namespace corrt
