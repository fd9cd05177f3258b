#include "corrt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "corrt/control_observer.hpp"

namespace corrt {

namespace {

Eigen::VectorXd restrict_to(const Eigen::VectorXd& x,
                            const std::vector<int>& axes) {
  Eigen::VectorXd out(axes.size());
  for (size_t i = 0; i < axes.size(); ++i) out[i] = x[axes[i]];
  return out;
}

// Uniform point on the radius-r sphere of the metric: r * M^{-1/2} u.
Eigen::VectorXd metric_sphere_point(const MetricMatrix& m, double r,
                                    std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd dir(m.dim());
  for (int i = 0; i < m.dim(); ++i) dir[i] = gauss(rng);
  dir.normalize();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.matrix());
  return r * (es.eigenvectors() *
              es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
              es.eigenvectors().transpose() * dir);
}

MetricMatrix restrict_metric(const MetricMatrix& m,
                             const std::vector<int>& axes) {
  Eigen::MatrixXd sub(axes.size(), axes.size());
  for (size_t i = 0; i < axes.size(); ++i)
    for (size_t j = 0; j < axes.size(); ++j)
      sub(i, j) = m.matrix()(axes[i], axes[j]);
  return MetricMatrix(sub);
}

}  // namespace

TrialResult run_closed_loop(const ScenarioRuntime& rt, const Plan& plan,
                            uint64_t seed) {
  const Scenario& s = rt.scenario;
  const PlantModel& plant = rt.plant;
  const int n = static_cast<int>(plan.t.size());
  TrialResult r;
  r.seed = seed;
  if (n == 0) {
    r.aborted = true;
    return r;
  }

  std::mt19937_64 rng(seed ^ 0xc0ffee123456789ull);

  // Initial conditions on the bound spheres.
  Eigen::VectorXd x = plan.x.front();
  const bool arm_style = !s.encoder_axes.empty();
  {
    const Eigen::VectorXd dv =
        metric_sphere_point(rt.ccm.metric, s.dc0, rng);
    for (size_t i = 0; i < s.tube_axes.size(); ++i) {
      x[s.tube_axes[i]] += dv[i];
    }
  }
  Eigen::VectorXd xhat;
  std::vector<int> free_axes;  // axes the estimate can be wrong about
  for (int i = 0; i < plant.n_x; ++i) {
    if (!s.has_encoder(i)) free_axes.push_back(i);
  }
  if (arm_style) {
    // Estimate starts at the nominal orientation block; the true orientation
    // is offset so that d_e(x(0), xhat(0)) equals the stated bound.
    xhat = x;
    for (int a : free_axes) xhat[a] = plan.x.front()[a];
    const Eigen::VectorXd dv = metric_sphere_point(
        restrict_metric(rt.ocm.metric, free_axes), s.de0, rng);
    for (size_t i = 0; i < free_axes.size(); ++i) {
      x[free_axes[i]] = xhat[free_axes[i]] - dv[i];
    }
  } else {
    xhat = x + metric_sphere_point(rt.ocm.metric, s.de0, rng);
  }

  // Controller on the tube axes (the actuated subsystem for the arm).
  const bool sub_controller =
      static_cast<int>(s.tube_axes.size()) != plant.n_x;
  const PlantModel ctrl_plant =
      sub_controller ? make_arm14_plant() : plant;
  const TrackingController controller(&ctrl_plant, rt.ccm);

  const PerceptionDecoder decoder =
      [&rt](const Eigen::VectorXd& y,
            const Eigen::VectorXd& theta) -> Eigen::VectorXd {
    return rt.model.eval(y, theta);
  };
  // Full reduced measurement = decoded image block + encoder readings; the
  // observer consumes it through its selector.
  const Observer observer(
      &plant, rt.ocm, rt.observer_c_r,
      [](const Eigen::VectorXd& y, const Eigen::VectorXd&) { return y; });

  DisturbanceGenerator wx_gen(plant.n_w, s.wx_bar,
                              disturbance_policy_from_string(s.wx_policy),
                              seed * 31 + 7);
  DisturbanceGenerator wy_gen(rt.map.n_y(), s.wy_bar,
                              DisturbancePolicy::kUniformBall, seed * 17 + 3);

  const Eigen::VectorXd x0_err = plan.x.front() - x;
  const Eigen::VectorXd xhat0_err = xhat - x;

  auto log_step = [&](int k, const Eigen::VectorXd& u_applied) {
    r.t.push_back(plan.t[k]);
    r.x.push_back(x);
    r.xhat.push_back(xhat);
    r.u.push_back(u_applied);
    const double dc = riemannian_distance(
        restrict_to(plan.x[k], s.tube_axes), restrict_to(x, s.tube_axes),
        rt.ccm.metric);
    const double de = riemannian_distance(x, xhat, rt.ocm.metric);
    r.dc.push_back(dc);
    r.de.push_back(de);
    r.dc_bar.push_back(plan.dc_bar[k]);
    r.de_bar.push_back(plan.de_bar[k]);
    if (dc > plan.dc_bar[k]) {
      r.contained_c = false;
      ++r.violations_c;
    }
    if (de > plan.de_bar[k]) {
      r.contained_e = false;
      ++r.violations_e;
    }
    for (const auto& ob : s.obstacles) {
      if (ob.box_at(plan.theta).contains(restrict_to(x, ob.axes))) {
        r.safe = false;
      }
    }
  };

  log_step(0, Eigen::VectorXd::Zero(plant.n_u));
  for (int k = 0; k + 1 < n; ++k) {
    if (!x.allFinite() || !xhat.allFinite()) {
      r.aborted = true;
      return r;
    }
    const Eigen::VectorXd theta_p = s.theta_from_axes.empty()
                                        ? plan.theta
                                        : restrict_to(x, s.theta_from_axes);
    const Eigen::VectorXd y =
        rt.map.observe(restrict_to(x, s.selector), theta_p, wy_gen.sample());
    Eigen::VectorXd y_reduced(rt.observer_c_r.rows());
    y_reduced.head(s.selector.size()) = decoder(y, theta_p);
    for (size_t i = 0; i < s.encoder_axes.size(); ++i) {
      y_reduced[s.selector.size() + i] = x[s.encoder_axes[i]];
    }

    // Controller input: the estimate, with directly measured axes replaced
    // by their true values.
    Eigen::VectorXd x_ctrl = xhat;
    for (int a : s.encoder_axes) x_ctrl[a] = x[a];

    Eigen::VectorXd u;
    try {
      if (sub_controller) {
        u = controller.min_norm_control(restrict_to(x_ctrl, s.tube_axes),
                                        restrict_to(plan.x[k], s.tube_axes),
                                        plan.u[k]);
      } else {
        u = controller.min_norm_control(x_ctrl, plan.x[k], plan.u[k]);
      }
    } catch (const ControlInfeasible&) {
      r.aborted = true;
      return r;
    }

    const Eigen::VectorXd w_x = wx_gen.sample(x - plan.x[k]);
    x = rk4_step(plant, x, u, w_x, plan.dt);
    xhat = observer.step(xhat, y_reduced, theta_p, u, plan.dt);
    log_step(k + 1, u);
  }

  // Terminal metrics.
  if (s.task == "estimate") {
    r.goal = true;
    for (int a : s.selector) {
      if (std::abs(xhat[a] - x[a]) > s.goal_phi_extent) r.goal = false;
    }
  } else {
    r.goal = s.goal_box().contains(restrict_to(x, s.goal_axes));
  }
  const double den_trk = x0_err.norm();
  const double den_est = xhat0_err.norm();
  r.trk_err = den_trk == 0.0 ? 0.0 : (plan.x.back() - x).norm() / den_trk;
  r.est_err = den_est == 0.0 ? 0.0 : (xhat - x).norm() / den_est;
  return r;
}

StatsTable aggregate_stats(std::vector<TrialResult> results) {
  std::sort(results.begin(), results.end(),
            [](const TrialResult& a, const TrialResult& b) {
              return a.seed < b.seed;
            });
  StatsTable s;
  s.n = static_cast<int>(results.size());
  if (s.n == 0) throw std::invalid_argument("aggregate_stats: no results");
  double trk_sum = 0.0, est_sum = 0.0;
  for (const auto& r : results) {
    trk_sum += r.trk_err;
    est_sum += r.est_err;
    s.containment_c_rate += r.contained_c ? 1.0 : 0.0;
    s.containment_e_rate += r.contained_e ? 1.0 : 0.0;
    s.safety_rate += r.safe ? 1.0 : 0.0;
    s.goal_rate += r.goal ? 1.0 : 0.0;
    s.violations_c += r.violations_c;
    s.violations_e += r.violations_e;
  }
  s.trk_mean = trk_sum / s.n;
  s.est_mean = est_sum / s.n;
  double trk_var = 0.0, est_var = 0.0;
  for (const auto& r : results) {
    trk_var += (r.trk_err - s.trk_mean) * (r.trk_err - s.trk_mean);
    est_var += (r.est_err - s.est_mean) * (r.est_err - s.est_mean);
  }
  s.trk_std = std::sqrt(trk_var / s.n);  // population convention
  s.est_std = std::sqrt(est_var / s.n);
  s.containment_c_rate /= s.n;
  s.containment_e_rate /= s.n;
  s.safety_rate /= s.n;
  s.goal_rate /= s.n;
  return s;
}

void write_trial_csv(const std::string& path, const TrialResult& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trial_csv: cannot open " + path);
  char buf[64];
  out << "t";
  const int n_x = r.x.empty() ? 0 : static_cast<int>(r.x.front().size());
  const int n_u = r.u.empty() ? 0 : static_cast<int>(r.u.front().size());
  for (int i = 0; i < n_x; ++i) out << ",x" << i;
  for (int i = 0; i < n_x; ++i) out << ",xhat" << i;
  for (int i = 0; i < n_u; ++i) out << ",u" << i;
  out << ",dc,de,dc_bar,de_bar\n";
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (size_t k = 0; k < r.t.size(); ++k) {
    out << fmt(r.t[k]);
    for (int i = 0; i < n_x; ++i) out << "," << fmt(r.x[k][i]);
    for (int i = 0; i < n_x; ++i) out << "," << fmt(r.xhat[k][i]);
    for (int i = 0; i < n_u; ++i) out << "," << fmt(r.u[k][i]);
    out << "," << fmt(r.dc[k]) << "," << fmt(r.de[k]) << ","
        << fmt(r.dc_bar[k]) << "," << fmt(r.de_bar[k]) << "\n";
  }
}

std::string stats_to_csv(const StatsTable& s) {
  char buf[512];
  std::string out =
      "n,trk_mean,trk_std,est_mean,est_std,containment_c_rate,"
      "containment_e_rate,safety_rate,goal_rate,violations_c,violations_e\n";
  std::snprintf(buf, sizeof(buf),
                "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d,%d\n",
                s.n, s.trk_mean, s.trk_std, s.est_mean, s.est_std,
                s.containment_c_rate, s.containment_e_rate, s.safety_rate,
                s.goal_rate, s.violations_c, s.violations_e);
  return out + buf;
}

std::pair<int, int> recount_violations(const ScenarioRuntime& rt,
                                       const Plan& plan,
                                       const TrialResult& r) {
  int vc = 0, ve = 0;
  for (size_t k = 0; k < r.t.size(); ++k) {
    const double dc = riemannian_distance(
        restrict_to(plan.x[k], rt.scenario.tube_axes),
        restrict_to(r.x[k], rt.scenario.tube_axes), rt.ccm.metric);
    const double de = riemannian_distance(r.x[k], r.xhat[k], rt.ocm.metric);
    if (dc > plan.dc_bar[k]) ++vc;
    if (de > plan.de_bar[k]) ++ve;
  }
  return {vc, ve};
}

}  // namespace corrt
