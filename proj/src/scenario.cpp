#include "corrt/scenario.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "corrt/constants.hpp"
#include "json.hpp"

namespace corrt {

using nlohmann::json;

AxisBox ObstacleSpec::box_at(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd l = lo, h = hi;
  if (theta_index >= 0) {
    const double shift = shift_scale * theta[theta_index];
    l[shift_axis] += shift;
    h[shift_axis] += shift;
  }
  return AxisBox(l, h);
}

AxisBox ObstacleSpec::full_box_at(const Eigen::VectorXd& theta, int n_x) const {
  return box_at(theta).lift(n_x, axes);
}

AxisBox Scenario::goal_box() const {
  return AxisBox(goal_lo, goal_hi);
}

bool Scenario::has_encoder(int axis) const {
  return std::find(encoder_axes.begin(), encoder_axes.end(), axis) !=
         encoder_axes.end();
}

namespace {

json bound_to_json(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  return v;
}

double bound_from_json(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    throw std::invalid_argument("bad bound string: " + s);
  }
  return j.get<double>();
}

json box_to_json(const AxisBox& b) {
  json lo = json::array(), hi = json::array();
  for (int i = 0; i < b.dim(); ++i) {
    lo.push_back(bound_to_json(b.lo()[i]));
    hi.push_back(bound_to_json(b.hi()[i]));
  }
  return json{{"lo", lo}, {"hi", hi}};
}

AxisBox box_from_json(const json& j) {
  const json& lo = j.at("lo");
  const json& hi = j.at("hi");
  Eigen::VectorXd l(lo.size()), h(hi.size());
  for (size_t i = 0; i < lo.size(); ++i) l[i] = bound_from_json(lo[i]);
  for (size_t i = 0; i < hi.size(); ++i) h[i] = bound_from_json(hi[i]);
  return AxisBox(l, h);
}

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd mat_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  return m;
}

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) {
      throw std::invalid_argument("unknown key '" + it.key() + "' in " + where);
    }
  }
}

json raster_to_json(const RasterConfig& rc) {
  json obstacles = json::array();
  for (const auto& ob : rc.obstacles) {
    obstacles.push_back(json{{"lo_x", ob.lo_x},
                             {"lo_y", ob.lo_y},
                             {"hi_x", ob.hi_x},
                             {"hi_y", ob.hi_y},
                             {"theta_index", ob.theta_index},
                             {"shift_axis", ob.shift_axis},
                             {"shift_scale", ob.shift_scale}});
  }
  return json{{"width", rc.width},
              {"height", rc.height},
              {"window", json{{"x_lo", rc.window_x_lo},
                              {"x_hi", rc.window_x_hi},
                              {"y_lo", rc.window_y_lo},
                              {"y_hi", rc.window_y_hi}}},
              {"marker_sigma", rc.marker_sigma},
              {"tick_offset", rc.tick_offset},
              {"tick_sigma", rc.tick_sigma},
              {"edge_softness", rc.edge_softness},
              {"marker_on_top", rc.marker_on_top},
              {"multi_plane", rc.multi_plane},
              {"obstacle_intensity", rc.obstacle_intensity},
              {"pos_x_index", rc.pos_x_index},
              {"pos_y_index", rc.pos_y_index},
              {"heading_index", rc.heading_index},
              {"obstacles", obstacles}};
}

RasterConfig raster_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"width", "height", "window", "marker_sigma",
                       "tick_offset", "tick_sigma", "edge_softness",
                       "marker_on_top", "multi_plane", "obstacle_intensity",
                       "pos_x_index", "pos_y_index", "heading_index",
                       "obstacles"},
                      "raster");
  RasterConfig rc;
  rc.width = j.at("width").get<int>();
  rc.height = j.at("height").get<int>();
  rc.window_x_lo = j.at("window").at("x_lo").get<double>();
  rc.window_x_hi = j.at("window").at("x_hi").get<double>();
  rc.window_y_lo = j.at("window").at("y_lo").get<double>();
  rc.window_y_hi = j.at("window").at("y_hi").get<double>();
  rc.marker_sigma = j.at("marker_sigma").get<double>();
  rc.tick_offset = j.at("tick_offset").get<double>();
  rc.tick_sigma = j.at("tick_sigma").get<double>();
  rc.edge_softness = j.at("edge_softness").get<double>();
  rc.marker_on_top = j.at("marker_on_top").get<bool>();
  rc.multi_plane = j.at("multi_plane").get<bool>();
  rc.obstacle_intensity = j.at("obstacle_intensity").get<double>();
  rc.pos_x_index = j.at("pos_x_index").get<int>();
  rc.pos_y_index = j.at("pos_y_index").get<int>();
  rc.heading_index = j.at("heading_index").get<int>();
  for (const auto& o : j.at("obstacles")) {
    RasterConfig::ObstacleTemplate ob;
    ob.lo_x = o.at("lo_x").get<double>();
    ob.lo_y = o.at("lo_y").get<double>();
    ob.hi_x = o.at("hi_x").get<double>();
    ob.hi_y = o.at("hi_y").get<double>();
    ob.theta_index = o.at("theta_index").get<int>();
    ob.shift_axis = o.at("shift_axis").get<int>();
    ob.shift_scale = o.at("shift_scale").get<double>();
    rc.obstacles.push_back(ob);
  }
  return rc;
}

json synth_to_json(const SynthesisConfig& c) {
  return json{{"rate_grid", c.rate_grid}, {"kappa_lo", c.kappa_lo},
              {"kappa_hi", c.kappa_hi},   {"kappa_tol", c.kappa_tol},
              {"beta_lo", c.beta_lo},     {"beta_hi", c.beta_hi},
              {"sample_count", c.sample_count},
              {"margin", c.margin},       {"max_iters", c.max_iters},
              {"seed", c.seed},           {"rho_lo", c.rho_lo},
              {"rho_hi", c.rho_hi},
              {"verify_multiplier", c.verify_multiplier}};
}

SynthesisConfig synth_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"rate_grid", "kappa_lo", "kappa_hi", "kappa_tol",
                       "beta_lo", "beta_hi", "sample_count", "margin",
                       "max_iters", "seed", "rho_lo", "rho_hi",
                       "verify_multiplier"},
                      "synthesis");
  SynthesisConfig c;
  c.rate_grid = j.at("rate_grid").get<std::vector<double>>();
  c.kappa_lo = j.at("kappa_lo").get<double>();
  c.kappa_hi = j.at("kappa_hi").get<double>();
  c.kappa_tol = j.at("kappa_tol").get<double>();
  c.beta_lo = j.at("beta_lo").get<double>();
  c.beta_hi = j.at("beta_hi").get<double>();
  c.sample_count = j.at("sample_count").get<int>();
  c.margin = j.at("margin").get<double>();
  c.max_iters = j.at("max_iters").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  c.rho_lo = j.at("rho_lo").get<double>();
  c.rho_hi = j.at("rho_hi").get<double>();
  c.verify_multiplier = j.at("verify_multiplier").get<int>();
  return c;
}

}  // namespace

std::string scenario_to_json(const Scenario& s) {
  json obstacles = json::array();
  for (const auto& ob : s.obstacles) {
    obstacles.push_back(json{{"axes", ob.axes},
                             {"lo", vec_to_json(ob.lo)},
                             {"hi", vec_to_json(ob.hi)},
                             {"theta_index", ob.theta_index},
                             {"shift_axis", ob.shift_axis},
                             {"shift_scale", ob.shift_scale}});
  }
  json j{
      {"schema", s.schema},
      {"name", s.name},
      {"plant", s.plant_label},
      {"task", s.task},
      {"d_c", box_to_json(s.d_c)},
      {"d_e", box_to_json(s.d_e)},
      {"crdp", box_to_json(s.crdp)},
      {"d_theta", box_to_json(s.d_theta)},
      {"selector", s.selector},
      {"tube_axes", s.tube_axes},
      {"encoder_axes", s.encoder_axes},
      {"theta_from_axes", s.theta_from_axes},
      {"obstacles", obstacles},
      {"goal_axes", s.goal_axes},
      {"goal_lo", vec_to_json(s.goal_lo)},
      {"goal_hi", vec_to_json(s.goal_hi)},
      {"goal_phi_extent", s.goal_phi_extent},
      {"x_init", vec_to_json(s.x_init)},
      {"theta_default", vec_to_json(s.theta_default)},
      {"sample_theta_per_trial", s.sample_theta_per_trial},
      {"wx_bar", s.wx_bar},
      {"wy_bar", s.wy_bar},
      {"wx_policy", s.wx_policy},
      {"dc0", s.dc0},
      {"de0", s.de0},
      {"c_bar", bound_to_json(s.c_bar)},
      {"e_bar", bound_to_json(s.e_bar)},
      {"eps_mode", s.eps_mode},
      {"trial_duration_cap", s.trial_duration_cap},
      {"trials", s.trials},
      {"perception",
       json{{"kind", s.perception.kind},
            {"raster", raster_to_json(s.perception.raster)},
            {"embed", json{{"n_y", s.perception.embed.n_y},
                           {"gain", s.perception.embed.gain},
                           {"nonlinearity", s.perception.embed.nonlinearity},
                           {"seed", s.perception.embed.seed}}},
            {"noise_mask_zero", s.perception.noise_mask_zero},
            {"n_train", s.perception.n_train},
            {"n_val", s.perception.n_val},
            {"rff", json{{"features", s.perception.rff.features},
                         {"ridge", s.perception.rff.ridge},
                         {"lengthscale", s.perception.rff.lengthscale},
                         {"seed", s.perception.rff.seed}}},
            {"data_seed", s.perception.data_seed}}},
      {"planner", json{{"p_goal", s.planner.p_goal},
                       {"dwell_min", s.planner.dwell_min},
                       {"dwell_max", s.planner.dwell_max},
                       {"dt", s.planner.dt},
                       {"max_iters", s.planner.max_iters},
                       {"eps3_window", s.planner.eps3_window},
                       {"seed", s.planner.seed}}},
      {"estimation", json{{"batches", s.estimation.batches},
                          {"batch_size", s.estimation.batch_size},
                          {"delta", s.estimation.delta},
                          {"dispersion_tol", s.estimation.dispersion_tol},
                          {"dispersion_max_points",
                           s.estimation.dispersion_max_points},
                          {"seed", s.estimation.seed}}},
      {"ccm_synth", synth_to_json(s.ccm_synth)},
      {"ocm_synth", synth_to_json(s.ocm_synth)},
  };
  return j.dump(2);
}

Scenario scenario_from_json(const std::string& text) {
  const json j = json::parse(text);
  reject_unknown_keys(
      j,
      {"schema", "name", "plant", "task", "d_c", "d_e", "crdp", "d_theta",
       "selector", "tube_axes", "encoder_axes", "theta_from_axes", "obstacles",
       "goal_axes",
       "goal_lo", "goal_hi", "goal_phi_extent", "x_init", "theta_default",
       "sample_theta_per_trial", "wx_bar", "wy_bar", "wx_policy", "dc0", "de0",
       "c_bar", "e_bar", "eps_mode", "trial_duration_cap", "trials",
       "perception", "planner", "estimation", "ccm_synth", "ocm_synth"},
      "scenario");
  Scenario s;
  s.schema = j.at("schema").get<int>();
  if (s.schema != 1) throw std::invalid_argument("unsupported scenario schema");
  s.name = j.at("name").get<std::string>();
  s.plant_label = j.at("plant").get<std::string>();
  s.task = j.at("task").get<std::string>();
  s.d_c = box_from_json(j.at("d_c"));
  s.d_e = box_from_json(j.at("d_e"));
  s.crdp = box_from_json(j.at("crdp"));
  s.d_theta = box_from_json(j.at("d_theta"));
  s.selector = j.at("selector").get<std::vector<int>>();
  s.tube_axes = j.at("tube_axes").get<std::vector<int>>();
  s.encoder_axes = j.at("encoder_axes").get<std::vector<int>>();
  s.theta_from_axes = j.at("theta_from_axes").get<std::vector<int>>();
  for (const auto& o : j.at("obstacles")) {
    ObstacleSpec ob;
    ob.axes = o.at("axes").get<std::vector<int>>();
    ob.lo = vec_from_json(o.at("lo"));
    ob.hi = vec_from_json(o.at("hi"));
    ob.theta_index = o.at("theta_index").get<int>();
    ob.shift_axis = o.at("shift_axis").get<int>();
    ob.shift_scale = o.at("shift_scale").get<double>();
    s.obstacles.push_back(ob);
  }
  s.goal_axes = j.at("goal_axes").get<std::vector<int>>();
  s.goal_lo = vec_from_json(j.at("goal_lo"));
  s.goal_hi = vec_from_json(j.at("goal_hi"));
  s.goal_phi_extent = j.at("goal_phi_extent").get<double>();
  s.x_init = vec_from_json(j.at("x_init"));
  s.theta_default = vec_from_json(j.at("theta_default"));
  s.sample_theta_per_trial = j.at("sample_theta_per_trial").get<bool>();
  s.wx_bar = j.at("wx_bar").get<double>();
  s.wy_bar = j.at("wy_bar").get<double>();
  s.wx_policy = j.at("wx_policy").get<std::string>();
  s.dc0 = j.at("dc0").get<double>();
  s.de0 = j.at("de0").get<double>();
  s.c_bar = bound_from_json(j.at("c_bar"));
  s.e_bar = bound_from_json(j.at("e_bar"));
  s.eps_mode = j.at("eps_mode").get<int>();
  s.trial_duration_cap = j.at("trial_duration_cap").get<double>();
  s.trials = j.at("trials").get<int>();

  const json& p = j.at("perception");
  reject_unknown_keys(p,
                      {"kind", "raster", "embed", "noise_mask_zero", "n_train",
                       "n_val", "rff", "data_seed"},
                      "perception");
  s.perception.kind = p.at("kind").get<std::string>();
  s.perception.raster = raster_from_json(p.at("raster"));
  s.perception.embed.n_y = p.at("embed").at("n_y").get<int>();
  s.perception.embed.gain = p.at("embed").at("gain").get<double>();
  s.perception.embed.nonlinearity = p.at("embed").at("nonlinearity").get<bool>();
  s.perception.embed.seed = p.at("embed").at("seed").get<uint64_t>();
  s.perception.noise_mask_zero =
      p.at("noise_mask_zero").get<std::vector<int>>();
  s.perception.n_train = p.at("n_train").get<int>();
  s.perception.n_val = p.at("n_val").get<int>();
  s.perception.rff.features = p.at("rff").at("features").get<int>();
  s.perception.rff.ridge = p.at("rff").at("ridge").get<double>();
  s.perception.rff.lengthscale = p.at("rff").at("lengthscale").get<double>();
  s.perception.rff.seed = p.at("rff").at("seed").get<uint64_t>();
  s.perception.data_seed = p.at("data_seed").get<uint64_t>();

  const json& pl = j.at("planner");
  s.planner.p_goal = pl.at("p_goal").get<double>();
  s.planner.dwell_min = pl.at("dwell_min").get<double>();
  s.planner.dwell_max = pl.at("dwell_max").get<double>();
  s.planner.dt = pl.at("dt").get<double>();
  s.planner.max_iters = pl.at("max_iters").get<int>();
  s.planner.eps3_window = pl.at("eps3_window").get<int>();
  s.planner.seed = pl.at("seed").get<uint64_t>();

  const json& e = j.at("estimation");
  s.estimation.batches = e.at("batches").get<int>();
  s.estimation.batch_size = e.at("batch_size").get<int>();
  s.estimation.delta = e.at("delta").get<double>();
  s.estimation.dispersion_tol = e.at("dispersion_tol").get<double>();
  s.estimation.dispersion_max_points =
      e.at("dispersion_max_points").get<int>();
  s.estimation.seed = e.at("seed").get<uint64_t>();

  s.ccm_synth = synth_from_json(j.at("ccm_synth"));
  s.ocm_synth = synth_from_json(j.at("ocm_synth"));
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_scenario: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str());
}

void save_scenario(const std::string& path, const Scenario& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_scenario: cannot open " + path);
  out << scenario_to_json(s);
}

std::string scenario_hash(const Scenario& s) {
  // FNV-1a over the canonical JSON encoding.
  const std::string text = scenario_to_json(s);
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream ss;
  ss << std::hex << h;
  return ss.str();
}

Scenario car_analog_scenario() {
  Scenario s;
  s.name = "car_analog";
  s.plant_label = "car";
  s.task = "reach";

  Eigen::VectorXd dc_lo(4), dc_hi(4);
  dc_lo << -kInf, -kInf, -M_PI / 3.0, 2.0;
  dc_hi << kInf, kInf, M_PI / 3.0, 5.0;
  s.d_c = AxisBox(dc_lo, dc_hi);
  s.d_e = s.d_c;

  Eigen::VectorXd crdp_lo(3), crdp_hi(3);
  crdp_lo << 0.0, -2.5, -M_PI / 3.0;
  crdp_hi << 13.5, 2.5, M_PI / 3.0;
  s.crdp = AxisBox(crdp_lo, crdp_hi);

  Eigen::VectorXd th_lo(5), th_hi(5);
  th_lo << 0.5, -1.5, 0.5, -1.0, 0.0;
  th_hi << 1.5, -0.5, 1.5, 0.0, 1.0;
  s.d_theta = AxisBox(th_lo, th_hi);

  s.selector = {0, 1, 2};
  s.tube_axes = {0, 1, 2, 3};
  s.encoder_axes = {};

  // Five obstacles spread along x, each shifted in y by one theta entry.
  for (int k = 0; k < 5; ++k) {
    ObstacleSpec ob;
    ob.axes = {0, 1};
    ob.lo = Eigen::VectorXd(2);
    ob.hi = Eigen::VectorXd(2);
    ob.lo << 1.8 + 2.3 * k, -0.35;
    ob.hi << 2.6 + 2.3 * k, 0.35;
    ob.theta_index = k;
    ob.shift_axis = 1;
    ob.shift_scale = 1.0;
    s.obstacles.push_back(ob);
  }

  s.goal_axes = {0, 1};
  s.goal_lo = Eigen::VectorXd(2);
  s.goal_hi = Eigen::VectorXd(2);
  s.goal_lo << 12.0, -2.2;
  s.goal_hi << 13.4, 2.2;

  s.x_init = Eigen::VectorXd(4);
  s.x_init << 0.6, -1.8, 0.0, 3.0;
  s.theta_default = 0.5 * (th_lo + th_hi);
  s.sample_theta_per_trial = true;

  s.wx_bar = 0.02;
  s.wy_bar = 0.05;
  s.wx_policy = "uniform-ball";
  s.dc0 = 0.05;
  s.de0 = 0.05;
  s.c_bar = 1.2;
  s.e_bar = 1.2;
  s.eps_mode = 3;
  s.trial_duration_cap = 40.0;
  s.trials = 50;

  RasterConfig& rc = s.perception.raster;
  rc.width = 32;
  rc.height = 32;
  rc.window_x_lo = -1.5;
  rc.window_x_hi = 15.0;
  rc.window_y_lo = -3.8;
  rc.window_y_hi = 3.8;
  rc.marker_sigma = 0.55;
  rc.tick_offset = 0.9;
  rc.tick_sigma = 0.35;
  rc.edge_softness = 0.08;
  rc.marker_on_top = true;  // the camera sees the car in front of obstacles
  for (const auto& ob : s.obstacles) {
    RasterConfig::ObstacleTemplate t;
    t.lo_x = ob.lo[0];
    t.lo_y = ob.lo[1];
    t.hi_x = ob.hi[0];
    t.hi_y = ob.hi[1];
    t.theta_index = ob.theta_index;
    t.shift_axis = 1;
    t.shift_scale = ob.shift_scale;
    rc.obstacles.push_back(t);
  }
  // Depth-like half of the channels carries the runtime noise.
  for (int i = 0; i < rc.width * rc.height; i += 2) {
    s.perception.noise_mask_zero.push_back(i);
  }
  s.perception.n_train = 16000;
  s.perception.n_val = 4000;
  s.perception.rff.features = 1024;
  s.perception.rff.ridge = 3e-8;
  s.perception.rff.lengthscale = 0.6;
  s.perception.rff.seed = 20;
  s.perception.data_seed = 7;

  s.planner.p_goal = 0.12;
  s.planner.dwell_min = 0.2;
  s.planner.dwell_max = 1.0;
  s.planner.dt = 0.005;
  s.planner.max_iters = 30000;
  s.planner.seed = 1;

  s.estimation.batches = 50;
  s.estimation.batch_size = 200;
  s.estimation.delta = 0.975;
  s.estimation.dispersion_tol = 0.05;
  s.estimation.dispersion_max_points = 3000;
  s.estimation.seed = 11;

  s.ccm_synth.rate_grid = {1.2, 1.6, 2.0};
  s.ccm_synth.beta_lo = 0.1;
  s.ccm_synth.beta_hi = 20.0;
  s.ccm_synth.kappa_hi = 300.0;
  s.ccm_synth.kappa_tol = 10.0;
  s.ccm_synth.sample_count = 90;
  s.ccm_synth.max_iters = 2500;
  s.ccm_synth.seed = 5;

  s.ocm_synth.rate_grid = {0.4, 0.6, 1.0};
  s.ocm_synth.beta_lo = 0.3;
  s.ocm_synth.beta_hi = 6.0;
  s.ocm_synth.kappa_hi = 60.0;
  s.ocm_synth.kappa_tol = 5.0;
  s.ocm_synth.sample_count = 90;
  s.ocm_synth.max_iters = 2500;
  s.ocm_synth.seed = 6;
  return s;
}

Scenario arm_estimation_scenario() {
  Scenario s;
  s.name = "arm17_estimation";
  s.plant_label = "arm17";
  s.task = "estimate";

  s.d_c = AxisBox::unbounded(17);
  s.d_e = AxisBox::unbounded(17);

  Eigen::VectorXd phi_lo = Eigen::VectorXd::Constant(3, -M_PI / 3.0);
  Eigen::VectorXd phi_hi = Eigen::VectorXd::Constant(3, M_PI / 3.0);
  s.crdp = AxisBox(phi_lo, phi_hi);

  Eigen::VectorXd j_lo(7), j_hi(7);
  j_lo << -0.05, 0.0, 0.15, -1.83, -0.05, -0.05, -M_PI / 3.0;
  j_hi << 0.0, 0.05, 0.32, -1.69, 0.05, 0.05, M_PI / 3.0;
  s.d_theta = AxisBox(j_lo, j_hi);

  s.selector = {0, 1, 2};  // image-invertible block: the Euler angles
  s.tube_axes = {3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
  s.encoder_axes = {3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
  s.theta_from_axes = {3, 4, 5, 6, 7, 8, 9};  // joints act as theta

  s.goal_axes = {};
  s.goal_lo = Eigen::VectorXd(0);
  s.goal_hi = Eigen::VectorXd(0);
  s.goal_phi_extent = 0.1;

  s.x_init = Eigen::VectorXd::Zero(17);
  // Start with the last joint in the occluding range; the planner must move
  // it to regain view of the grasped object.
  s.x_init.segment(3, 7) << -0.02, 0.02, 0.2, -1.75, 0.0, 0.0, -0.9;
  s.theta_default = Eigen::VectorXd(0);
  s.sample_theta_per_trial = false;

  s.wx_bar = 0.0125;
  s.wy_bar = 0.0;
  s.wx_policy = "uniform-ball";
  s.dc0 = 1e-3;
  s.de0 = 0.32;
  s.c_bar = 0.5;
  s.e_bar = 1.0;
  s.eps_mode = 2;
  s.trial_duration_cap = 12.0;
  s.trials = 25;

  RasterConfig& rc = s.perception.raster;
  rc.width = 32;
  rc.height = 32;
  rc.window_x_lo = -1.3;
  rc.window_x_hi = 1.3;
  rc.window_y_lo = -1.3;
  rc.window_y_hi = 1.3;
  rc.marker_sigma = 0.22;
  rc.tick_offset = 0.45;
  rc.tick_sigma = 0.13;
  rc.edge_softness = 0.05;
  // Occluder panel whose x-position follows the last joint: near j7 ~ -0.9
  // it covers the marker region, near j7 ~ +0.9 it is out of frame.
  {
    RasterConfig::ObstacleTemplate t;
    t.lo_x = -1.45;
    t.lo_y = -1.3;
    t.hi_x = 1.15;
    t.hi_y = 1.3;
    t.theta_index = 6;
    t.shift_axis = 0;
    t.shift_scale = -2.4;
    rc.obstacles.push_back(t);
  }
  s.perception.n_train = 12000;
  s.perception.n_val = 3000;
  s.perception.rff.features = 640;
  s.perception.rff.ridge = 1e-7;
  s.perception.rff.lengthscale = 0.7;
  s.perception.rff.seed = 21;
  s.perception.data_seed = 8;

  s.planner.p_goal = 0.25;
  s.planner.dwell_min = 0.2;
  s.planner.dwell_max = 0.5;
  s.planner.dt = 0.002;
  s.planner.max_iters = 4000;
  s.planner.seed = 2;

  s.estimation.batches = 40;
  s.estimation.batch_size = 150;
  s.estimation.delta = 0.975;
  s.estimation.dispersion_tol = 0.08;
  s.estimation.dispersion_max_points = 2500;
  s.estimation.seed = 12;

  s.ccm_synth.rate_grid = {2.0};
  s.ccm_synth.beta_lo = 0.05;
  s.ccm_synth.beta_hi = 50.0;
  s.ccm_synth.kappa_hi = 1200.0;
  s.ccm_synth.kappa_tol = 100.0;
  s.ccm_synth.max_iters = 3000;
  s.ccm_synth.seed = 7;

  s.ocm_synth.rate_grid = {6.0, 9.5};
  s.ocm_synth.beta_lo = 0.05;
  s.ocm_synth.beta_hi = 10.0;
  s.ocm_synth.kappa_hi = 50.0;
  s.ocm_synth.kappa_tol = 10.0;
  s.ocm_synth.max_iters = 2000;
  s.ocm_synth.seed = 8;
  return s;
}

ObservationMap build_observation_map(const Scenario& s) {
  const int n_r = static_cast<int>(s.selector.size());
  const int n_p = s.d_theta.dim();
  ObservationMap map =
      s.perception.kind == "raster"
          ? ObservationMap::raster(s.perception.raster, n_r, n_p)
          : ObservationMap::embed(s.perception.embed, n_r, n_p);
  if (!s.perception.noise_mask_zero.empty()) {
    Eigen::VectorXd mask = Eigen::VectorXd::Ones(map.n_y());
    for (int idx : s.perception.noise_mask_zero) mask[idx] = 0.0;
    ObservationMap tmp = map;
    tmp.set_noise_mask(mask);
    return tmp;
  }
  return map;
}

ScenarioRuntime::ScenarioRuntime(Scenario s)
    : scenario(std::move(s)),
      plant(make_plant(scenario.plant_label)),
      map(build_observation_map(scenario)),
      img_selector(plant.n_x, scenario.selector),
      ccm(MetricMatrix::identity(
              static_cast<int>(scenario.tube_axes.size())),
          1.0, 0.0, AxisBox::unbounded(static_cast<int>(scenario.tube_axes.size()))),
      ocm(MetricMatrix::identity(plant.n_x), 1.0, 0.0,
          AxisBox::unbounded(plant.n_x)) {
  // Observer reduced observation: image-invertible block plus encoder axes.
  std::vector<int> rows = scenario.selector;
  for (int a : scenario.encoder_axes) rows.push_back(a);
  observer_c_r = ReducedSelector(plant.n_x, rows).c_r;
}

void fit_perception_stage(ScenarioRuntime& rt) {
  const Scenario& s = rt.scenario;
  // The perception parameter domain: external theta, or the encoder block
  // domain when theta plays that role (arm task).
  rt.data = generate_dataset(rt.map, s.crdp, s.d_theta, s.perception.n_train,
                             s.perception.data_seed);
  rt.validation = generate_dataset(rt.map, s.crdp, s.d_theta,
                                   s.perception.n_val,
                                   s.perception.data_seed + 1);
  rt.model = fit_inverse(rt.data, s.perception.rff);
  fill_errors(rt.data, rt.model);
  fill_errors(rt.validation, rt.model);

  // Thinned planning subset: eps2/eps3 queries and the dispersion use the
  // same subset so the (errors, R) pair stays self-consistent.
  const int keep = std::min(s.estimation.dispersion_max_points, rt.data.size());
  const int stride = std::max(1, rt.data.size() / keep);
  std::vector<int> rows;
  for (int i = 0; i < rt.data.size(); i += stride) rows.push_back(i);
  rt.plan_data.yr.resize(rows.size(), rt.data.yr.cols());
  rt.plan_data.theta.resize(rows.size(), rt.data.theta.cols());
  rt.plan_data.y.resize(rows.size(), 0);
  rt.plan_data.errors.resize(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    rt.plan_data.yr.row(i) = rt.data.yr.row(rows[i]);
    rt.plan_data.theta.row(i) = rt.data.theta.row(rows[i]);
    rt.plan_data.errors[i] = rt.data.errors[rows[i]];
  }
  rt.plan_data.yr_box = rt.data.yr_box;
  rt.plan_data.theta_box = rt.data.theta_box;
  rt.plan_data.seed = rt.data.seed;
}

void synthesize_metrics_stage(ScenarioRuntime& rt) {
  const Scenario& s = rt.scenario;
  if (s.plant_label == "arm17") {
    // 14D CCM for the actuated subsystem, 17D OCM for the full state.
    const PlantModel arm14 = make_arm14_plant();
    const SynthesizedMetric ccm =
        synthesize_ccm(arm14, AxisBox::unbounded(14), s.ccm_synth);
    if (!ccm.feasible) throw std::runtime_error("arm CCM synthesis failed");
    rt.ccm = ccm.spec;
    const SynthesizedMetric ocm = synthesize_ocm(
        rt.plant, s.d_e, Eigen::MatrixXd::Identity(17, 17), s.ocm_synth);
    if (!ocm.feasible) throw std::runtime_error("arm OCM synthesis failed");
    rt.ocm = ocm.spec;
    return;
  }
  // Restrict boxes: tube axes cover the full state here.
  const SynthesizedMetric ccm = synthesize_ccm(rt.plant, s.d_c, s.ccm_synth);
  if (!ccm.feasible) {
    throw std::runtime_error("CCM synthesis failed:\n" + ccm.report);
  }
  rt.ccm = ccm.spec;
  const SynthesizedMetric ocm =
      synthesize_ocm(rt.plant, s.d_e, rt.observer_c_r, s.ocm_synth);
  if (!ocm.feasible) {
    throw std::runtime_error("OCM synthesis failed:\n" + ocm.report);
  }
  rt.ocm = ocm.spec;
}

void estimate_constants_stage(ScenarioRuntime& rt) {
  const Scenario& s = rt.scenario;
  EvtConfig evt;
  evt.batches = s.estimation.batches;
  evt.batch_size = s.estimation.batch_size;
  evt.delta = s.estimation.delta;
  evt.seed = s.estimation.seed;

  // L_hinv: Lipschitz of the learned inverse in y over D_y (+) Y_d.
  {
    EvtConfig cfg = evt;
    cfg.seed = evt.seed + 1;
    auto sampler = [&](std::mt19937_64& rng) -> double {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::normal_distribution<double> gauss(0.0, 1.0);
      const Eigen::VectorXd yr = s.crdp.sample(rng);
      const Eigen::VectorXd th = s.d_theta.sample(rng);
      const Eigen::VectorXd y_base = rt.map.render(yr, th);
      auto noisy = [&](double scale) {
        Eigen::VectorXd w(rt.map.n_y());
        for (int i = 0; i < w.size(); ++i) w[i] = gauss(rng);
        const double bound = std::max(s.wy_bar, 1e-3);
        w *= (scale * bound) / w.norm();
        return Eigen::VectorXd(y_base + rt.map.noise_mask().cwiseProduct(w));
      };
      const double s1 = std::pow(10.0, -2.0 * unit(rng));
      const double s2 = std::pow(10.0, -2.0 * unit(rng));
      const Eigen::VectorXd y1 = noisy(s1);
      const Eigen::VectorXd y2 = noisy(s2);
      const double dy = (y1 - y2).norm();
      if (dy < 1e-12) return 0.0;
      return (rt.model.eval(y1, th) - rt.model.eval(y2, th)).norm() / dy;
    };
    rt.l_hinv = estimate_lipschitz_evt(sampler, cfg).value;
  }

  // L_p: Lipschitz of the pointwise inversion error over (yr, theta).
  {
    EvtConfig cfg = evt;
    cfg.seed = evt.seed + 2;
    auto sampler = [&](std::mt19937_64& rng) -> double {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::normal_distribution<double> gauss(0.0, 1.0);
      const int n_z = s.crdp.dim() + s.d_theta.dim();
      const Eigen::VectorXd yr = s.crdp.sample(rng);
      const Eigen::VectorXd th = s.d_theta.sample(rng);
      Eigen::VectorXd dir(n_z);
      for (int i = 0; i < n_z; ++i) dir[i] = gauss(rng);
      dir.normalize();
      const double scale = std::pow(10.0, -3.0 + 3.0 * unit(rng));
      Eigen::VectorXd yr2 = yr + scale * dir.head(s.crdp.dim());
      Eigen::VectorXd th2 = th + scale * dir.tail(s.d_theta.dim());
      yr2 = s.crdp.clamp(yr2);
      th2 = s.d_theta.clamp(th2);
      const double dz = std::sqrt((yr2 - yr).squaredNorm() +
                                  (th2 - th).squaredNorm());
      if (dz < 1e-12) return 0.0;
      const double e1 = perception_error(rt.model, rt.map, yr, th);
      const double e2 = perception_error(rt.model, rt.map, yr2, th2);
      return std::abs(e1 - e2) / dz;
    };
    rt.l_p = estimate_lipschitz_evt(sampler, cfg).value;
  }

  // eps1: uniform error bound.
  {
    EvtConfig cfg = evt;
    cfg.seed = evt.seed + 3;
    rt.eps1_const =
        estimate_uniform_eps1(rt.model, rt.map, s.crdp, s.d_theta,
                              cfg.batches * cfg.batch_size, cfg)
            .value;
  }

  // Dispersion of the planning subset over the data domain.
  {
    const int n = rt.plan_data.size();
    Eigen::MatrixXd pts(n, rt.plan_data.yr.cols() + rt.plan_data.theta.cols());
    pts << rt.plan_data.yr, rt.plan_data.theta;
    Eigen::VectorXd lo(pts.cols()), hi(pts.cols());
    lo << s.crdp.lo(), s.d_theta.lo();
    hi << s.crdp.hi(), s.d_theta.hi();
    rt.dispersion = compute_dispersion(pts, AxisBox(lo, hi),
                                       s.estimation.dispersion_tol);
  }

  // L_delta_k: zero when the controller is fed directly measured states.
  int n_constants = 3;  // l_hinv, l_p (or eps1), dispersion bookkeeping below
  if (s.encoder_axes.size() == s.tube_axes.size() &&
      !s.encoder_axes.empty()) {
    rt.l_delta_k = 0.0;
  } else {
    EvtConfig cfg = evt;
    cfg.seed = evt.seed + 4;
    const PlantModel& plant = rt.plant;
    const TrackingController ctrl(&plant, rt.ccm);
    DeltaKSampleDomain dom;
    // Nominal states sampled where plans live: the data domain lifted into
    // the state box, finite velocity bounds from D_c.
    Eigen::VectorXd lo(plant.n_x), hi(plant.n_x);
    for (int i = 0; i < plant.n_x; ++i) {
      lo[i] = std::isfinite(s.d_c.lo()[i]) ? s.d_c.lo()[i] : -2.0;
      hi[i] = std::isfinite(s.d_c.hi()[i]) ? s.d_c.hi()[i] : 2.0;
    }
    for (size_t r = 0; r < s.selector.size(); ++r) {
      lo[s.selector[r]] = s.crdp.lo()[r];
      hi[s.selector[r]] = s.crdp.hi()[r];
    }
    dom.nominal_box = AxisBox(lo, hi);
    dom.c_bar = s.c_bar;
    dom.e_bar = s.e_bar;
    int rejected = 0;
    rt.l_delta_k =
        estimate_L_delta_k(ctrl, rt.ocm.metric, dom, cfg, &rejected).value;
    n_constants += 1;
  }

  // Overall correctness probability: product of per-constant deltas
  // (two constants in mode 1: eps1 + L_hinv [+ L_dk]; three in modes 2/3).
  int used = 1;  // L_hinv always
  if (s.eps_mode == 1) used += 1;          // eps1
  if (s.eps_mode >= 2) used += 1;          // L_p
  if (s.eps_mode == 3) used += 1;          // dispersion (R)
  if (rt.l_delta_k > 0.0) used += 1;
  rt.delta_product = std::pow(s.estimation.delta, used);
  (void)n_constants;
}

std::string metrics_to_json(const ScenarioRuntime& rt) {
  json j;
  j["schema"] = 1;
  j["ccm"] = {{"matrix", mat_to_json(rt.ccm.metric.matrix())},
              {"rate", rt.ccm.rate},
              {"rho", rt.ccm.rho},
              {"eig_lo", rt.ccm.metric.eig_min()},
              {"eig_hi", rt.ccm.metric.eig_max()},
              {"domain", box_to_json(rt.ccm.domain)}};
  j["ocm"] = {{"matrix", mat_to_json(rt.ocm.metric.matrix())},
              {"rate", rt.ocm.rate},
              {"rho", rt.ocm.rho},
              {"eig_lo", rt.ocm.metric.eig_min()},
              {"eig_hi", rt.ocm.metric.eig_max()},
              {"domain", box_to_json(rt.ocm.domain)}};
  return j.dump(2);
}

void metrics_from_json(ScenarioRuntime& rt, const std::string& text) {
  const json j = json::parse(text);
  if (j.at("schema").get<int>() != 1) {
    throw std::invalid_argument("unsupported metrics schema");
  }
  const json& c = j.at("ccm");
  rt.ccm = MetricSpec(MetricMatrix(mat_from_json(c.at("matrix"))),
                      c.at("rate").get<double>(), c.at("rho").get<double>(),
                      box_from_json(c.at("domain")));
  const json& o = j.at("ocm");
  rt.ocm = MetricSpec(MetricMatrix(mat_from_json(o.at("matrix"))),
                      o.at("rate").get<double>(), o.at("rho").get<double>(),
                      box_from_json(o.at("domain")));
}

std::string constants_to_json(const ScenarioRuntime& rt) {
  json j;
  j["schema"] = 1;
  j["delta"] = rt.scenario.estimation.delta;
  j["delta_product"] = rt.delta_product;
  j["seed"] = rt.scenario.estimation.seed;
  j["constants"] = {{"L_hinv", rt.l_hinv},
                    {"L_p", rt.l_p},
                    {"eps1", rt.eps1_const},
                    {"dispersion", rt.dispersion},
                    {"L_delta_k", rt.l_delta_k}};
  j["method"] = "evt";
  return j.dump(2);
}

void constants_from_json(ScenarioRuntime& rt, const std::string& text) {
  const json j = json::parse(text);
  if (j.at("schema").get<int>() != 1) {
    throw std::invalid_argument("unsupported constants schema");
  }
  const json& c = j.at("constants");
  rt.l_hinv = c.at("L_hinv").get<double>();
  rt.l_p = c.at("L_p").get<double>();
  rt.eps1_const = c.at("eps1").get<double>();
  rt.dispersion = c.at("dispersion").get<double>();
  rt.l_delta_k = c.at("L_delta_k").get<double>();
  rt.delta_product = j.at("delta_product").get<double>();
}

}  // namespace corrt
