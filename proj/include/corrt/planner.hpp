#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "corrt/scenario.hpp"
#include "corrt/tubes.hpp"

namespace corrt {

enum class Baseline { kNone, kB1, kB2, kB3 };
Baseline baseline_from_string(const std::string& s);
std::string baseline_to_string(Baseline b);

struct PlanNode {
  Eigen::VectorXd x;  // nominal state at time t
  double dc_bar = 0.0;
  double de_bar = 0.0;
  double t = 0.0;
  int parent = -1;
  Eigen::VectorXd u_parent;  // control applied over the incoming edge
  double dwell = 0.0;
  // Fine-grid arrays along the incoming edge (empty for the root).
  std::vector<Eigen::VectorXd> edge_x;
  std::vector<double> edge_dc, edge_de, edge_eps;
};

struct Plan {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;  // nominal states, one per grid point
  std::vector<Eigen::VectorXd> u;  // u[k] held over [t[k], t[k+1])
  std::vector<double> dc_bar, de_bar, eps;
  Eigen::VectorXd theta;
  uint64_t seed = 0;
  std::string scenario_hash;
  Baseline baseline = Baseline::kNone;
  double dt = 0.0;

  double duration() const { return t.empty() ? 0.0 : t.back() - t.front(); }
};

enum class RejectReason { kCapC, kCapE, kTrackingTube, kEstimatorTube, kControl, kNoConverge };

struct PlanAttempt {
  bool success = false;
  Plan plan;
  int tree_size = 0;
  int iterations = 0;
  std::map<std::string, int> rejections;
  std::string failure;
};

/// Precomputed per-(scenario, theta) planning context: tube RHS constants,
/// lifted boxes, and the eps evaluator.
class TubePlanner {
 public:
  TubePlanner(const ScenarioRuntime* rt, Baseline baseline,
              const Eigen::VectorXd& theta);

  PlanAttempt plan(uint64_t seed) const;

  // Grows one candidate edge from `node`; fills `out` and the reason on
  // rejection. Exposed for tests.
  bool extend(const PlanNode& node, const Eigen::VectorXd& u_p, double dwell,
              PlanNode* out, RejectReason* reason) const;

  // Re-verifies every check of a returned plan from scratch on a `refine`x
  // finer grid with independently integrated tubes. Returns false with a
  // message on any violation.
  bool verify_plan(const Plan& plan, int refine, std::string* message) const;

  const TubeRhsConstants& rhs() const { return rhs_; }
  double eps_at(const Eigen::VectorXd& x_nominal, double dc_radius) const;
  bool goal_reached(const Eigen::VectorXd& x_nominal, double dc_radius) const;
  bool checks_pass(const Eigen::VectorXd& x_nominal, double dc,
                   double de, RejectReason* reason) const;

 private:
  Ellipsoid tracking_tube(const Eigen::VectorXd& x_nominal, double dc) const;
  Eigen::VectorXd tube_coords(const Eigen::VectorXd& x) const;
  Eigen::VectorXd theta_for(const Eigen::VectorXd& x_nominal) const;

  const ScenarioRuntime* rt_;
  Baseline baseline_;
  Eigen::VectorXd theta_;
  TubeRhsConstants rhs_;
  MetricMatrix tube_metric_;       // on tube axes
  AxisBox track_box_;              // (D_c ∩ D_r) restricted to tube axes
  AxisBox estimator_box_;          // D_e ∩ D_c full state
  bool estimator_box_active_ = false;
  std::vector<AxisBox> obstacle_boxes_;  // on tube axes, at this theta
  AxisBox goal_box_;                     // on tube axes
  double phi_slack_ = 0.0;  // arm: L_p * de0 / sqrt(eigmin(W_e))
  double dt_ = 0.0;
  // eps mode 3 cache: tube projection onto the selector coordinates.
  std::optional<MetricMatrix> reduced_metric_;
  std::vector<int> selector_tube_positions_;
};

std::string plan_to_json(const Plan& plan);
Plan plan_from_json(const std::string& text);

}  // namespace corrt
