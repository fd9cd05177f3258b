#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "corrt/planner.hpp"
#include "corrt/scenario.hpp"

namespace corrt {

struct TrialResult {
  uint64_t seed = 0;
  bool aborted = false;
  bool contained_c = true;  // d_c(t) <= dc_bar(t) at every logged step
  bool contained_e = true;
  int violations_c = 0;
  int violations_e = 0;
  bool safe = true;
  bool goal = false;
  double trk_err = 0.0;
  double est_err = 0.0;

  std::vector<double> t;
  std::vector<Eigen::VectorXd> x, xhat, u;
  std::vector<double> dc, de, dc_bar, de_bar;
};

// Executes the plan on the disturbed plant with the observer in the loop and
// audits tube containment from the raw logs.
TrialResult run_closed_loop(const ScenarioRuntime& rt, const Plan& plan,
                            uint64_t seed);

struct StatsTable {
  int n = 0;
  double trk_mean = 0.0, trk_std = 0.0;
  double est_mean = 0.0, est_std = 0.0;
  double containment_c_rate = 0.0;
  double containment_e_rate = 0.0;
  double safety_rate = 0.0;
  double goal_rate = 0.0;
  int violations_c = 0;
  int violations_e = 0;
};

StatsTable aggregate_stats(std::vector<TrialResult> results);

void write_trial_csv(const std::string& path, const TrialResult& r);
std::string stats_to_csv(const StatsTable& s);

// Audit independence: recompute the containment flags from the raw logs of a
// trial using only the metrics (no simulator internals).
std::pair<int, int> recount_violations(const ScenarioRuntime& rt,
                                       const Plan& plan, const TrialResult& r);

}  // namespace corrt
