#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "corrt/dynamics.hpp"
#include "corrt/geometry.hpp"
#include "corrt/metric_synthesis.hpp"
#include "corrt/perception.hpp"

namespace corrt {

/// Obstacle box over a subset of state axes, optionally shifted along one of
/// them by a component of theta.
struct ObstacleSpec {
  std::vector<int> axes;  // state axes the box constrains
  Eigen::VectorXd lo, hi;
  int theta_index = -1;
  int shift_axis = 0;  // position within `axes`
  double shift_scale = 1.0;

  AxisBox box_at(const Eigen::VectorXd& theta) const;       // on `axes`
  AxisBox full_box_at(const Eigen::VectorXd& theta, int n_x) const;
};

struct PerceptionConfig {
  std::string kind = "raster";  // raster | embed
  RasterConfig raster;
  EmbedConfig embed;
  std::vector<int> noise_mask_zero;  // channels with zeroed noise (B_y 0s)
  int n_train = 20000;
  int n_val = 4000;
  RffConfig rff;
  uint64_t data_seed = 7;
};

struct PlannerConfig {
  double p_goal = 0.1;
  double dwell_min = 0.2;
  double dwell_max = 1.0;
  double dt = 0.005;
  int max_iters = 20000;
  int eps3_window = 2;
  uint64_t seed = 1;
};

struct EstimationConfig {
  int batches = 50;
  int batch_size = 200;
  double delta = 0.975;
  double dispersion_tol = 0.05;
  int dispersion_max_points = 4000;  // thinned subset used for R and eps3
  uint64_t seed = 11;
};

/// Everything defining one experiment: plant, domains, perception, task.
struct Scenario {
  int schema = 1;
  std::string name;
  std::string plant_label = "car";
  std::string task = "reach";  // reach | estimate (arm orientation task)

  AxisBox d_c = AxisBox::unbounded(0);
  AxisBox d_e = AxisBox::unbounded(0);
  AxisBox crdp = AxisBox::unbounded(0);     // reduced-state data domain
  AxisBox d_theta = AxisBox::unbounded(0);  // parameter domain
  std::vector<int> selector;                // image-invertible state indices
  std::vector<int> tube_axes;               // axes the tracking tube bounds
  std::vector<int> encoder_axes;  // states measured directly (arm j, jdot)
  // State axes supplying the perception parameter theta (empty: external).
  std::vector<int> theta_from_axes;

  std::vector<ObstacleSpec> obstacles;
  std::vector<int> goal_axes;
  Eigen::VectorXd goal_lo, goal_hi;
  double goal_phi_extent = 0.1;  // estimate task threshold

  Eigen::VectorXd x_init;
  Eigen::VectorXd theta_default;
  bool sample_theta_per_trial = true;

  double wx_bar = 0.0;
  double wy_bar = 0.0;
  std::string wx_policy = "uniform-ball";
  double dc0 = 0.0;
  double de0 = 0.0;
  double c_bar = kInf;
  double e_bar = kInf;
  int eps_mode = 3;

  PerceptionConfig perception;
  PlannerConfig planner;
  EstimationConfig estimation;
  SynthesisConfig ccm_synth;
  SynthesisConfig ocm_synth;
  double trial_duration_cap = 60.0;
  int trials = 50;

  AxisBox goal_box() const;  // on goal_axes
  bool has_encoder(int axis) const;
};

Scenario car_analog_scenario();
Scenario arm_estimation_scenario();

std::string scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const std::string& text);
Scenario load_scenario(const std::string& path);
void save_scenario(const std::string& path, const Scenario& s);
std::string scenario_hash(const Scenario& s);

/// Assembled runtime artifacts for a scenario.
struct ScenarioRuntime {
  Scenario scenario;
  PlantModel plant;
  ObservationMap map;
  ReducedSelector img_selector;   // image-invertible block
  Eigen::MatrixXd observer_c_r;   // full reduced observation (image+encoders)
  Dataset data;                   // training set with errors
  Dataset validation;
  PerceptionModel model;
  MetricSpec ccm;                 // metric M_c on tube_axes
  MetricSpec ocm;                 // metric W_e, full state
  Dataset plan_data;              // thinned subset used by eps2/eps3 and R
  // estimated constants
  double l_hinv = 0.0;
  double l_p = 0.0;
  double eps1_const = 0.0;
  double dispersion = 0.0;
  double l_delta_k = 0.0;
  double delta_product = 1.0;

  ScenarioRuntime(Scenario s);
};

// Pipeline stages. Each returns the artifact and can persist it via the CLI.
ObservationMap build_observation_map(const Scenario& s);
void fit_perception_stage(ScenarioRuntime& rt);
void synthesize_metrics_stage(ScenarioRuntime& rt);
void estimate_constants_stage(ScenarioRuntime& rt);

std::string metrics_to_json(const ScenarioRuntime& rt);
void metrics_from_json(ScenarioRuntime& rt, const std::string& text);
std::string constants_to_json(const ScenarioRuntime& rt);
void constants_from_json(ScenarioRuntime& rt, const std::string& text);

}  // namespace corrt
