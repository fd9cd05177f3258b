#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "corrt/control_observer.hpp"
#include "corrt/geometry.hpp"
#include "corrt/perception.hpp"

namespace corrt {

struct EstimatedConstant {
  double value = 0.0;
  std::string method;  // "evt" | "max-margin"
  double delta = 0.0;
  int batches = 0;
  int batch_size = 0;
  uint64_t seed = 0;
  double sample_max = 0.0;
  bool degenerate = false;  // all-zero samples or failed tail fit
  std::string domain;
};

struct EvtConfig {
  int batches = 50;
  int batch_size = 200;
  double delta = 0.975;
  double margin = 0.05;  // multiplicative safety on top of the tail estimate
  int bootstrap = 200;
  uint64_t seed = 0;
};

namespace detail {

/// Generalized extreme value fit by probability-weighted moments (Hosking).
/// shape > 0 is the reverse-Weibull domain with finite upper endpoint
/// loc + scale/shape.
struct GevFit {
  double loc = 0.0;
  double scale = 0.0;
  double shape = 0.0;
  bool valid = false;
};

GevFit fit_gev_pwm(std::vector<double> maxima);
double gev_quantile(const GevFit& fit, double p);
double gev_upper_endpoint(const GevFit& fit);

}  // namespace detail

/// EVT over-estimate of the supremum of a sampled nonnegative quantity:
/// batch maxima -> reverse-Weibull endpoint -> parametric-bootstrap
/// delta-quantile, floored at the global sample max, inflated by the margin.
EstimatedConstant estimate_sup_evt(
    const std::function<double(std::mt19937_64&)>& value_sampler,
    const EvtConfig& cfg);

// Lipschitz constant from difference quotients supplied by the pair oracle.
EstimatedConstant estimate_lipschitz_evt(
    const std::function<double(std::mt19937_64&)>& quotient_sampler,
    const EvtConfig& cfg);

// Uniform perception error bound over yr_box x theta_box (eps_bar_1).
EstimatedConstant estimate_uniform_eps1(const PerceptionModel& model,
                                        const ObservationMap& map,
                                        const AxisBox& yr_box,
                                        const AxisBox& theta_box, int n,
                                        const EvtConfig& cfg);

/// Certified over-approximation of the dispersion (radius of the largest
/// open ball in `box` avoiding all rows of `points`) by branch-and-bound
/// with the 1-Lipschitz bound F(center) + half-diagonal.
double compute_dispersion(const Eigen::MatrixXd& points, const AxisBox& box,
                          double tol, int max_nodes = 400000);

struct DeltaKSampleDomain {
  AxisBox nominal_box = AxisBox::unbounded(0);  // x* samples
  double c_bar = 0.0;                           // d_c(x*, x) cap
  double e_bar = 0.0;                           // d_e(x, xhat) cap
};

// Lipschitz constant of Delta k in its first argument, with input distances
// measured w.r.t. W_e. Samples violating control feasibility are rejected
// and counted.
EstimatedConstant estimate_L_delta_k(const TrackingController& controller,
                                     const MetricMatrix& w_e,
                                     const DeltaKSampleDomain& dom,
                                     const EvtConfig& cfg,
                                     int* rejected_samples = nullptr);

}  // namespace corrt
