#include "corrt/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace corrt {

namespace {

Eigen::VectorXd fit_poly(const std::function<double(double)>& fn, int degree,
                         double lo, double hi, int samples) {
  Eigen::MatrixXd vand(samples, degree + 1);
  Eigen::VectorXd rhs(samples);
  for (int i = 0; i < samples; ++i) {
    const double x = lo + (hi - lo) * i / (samples - 1);
    double p = 1.0;
    for (int j = 0; j <= degree; ++j) {
      vand(i, j) = p;
      p *= x;
    }
    rhs[i] = fn(x);
  }
  return vand.colPivHouseholderQr().solve(rhs);
}

double eval_poly(const Eigen::VectorXd& c, double x) {
  double acc = 0.0;
  for (int j = static_cast<int>(c.size()) - 1; j >= 0; --j) acc = acc * x + c[j];
  return acc;
}

double eval_dpoly(const Eigen::VectorXd& c, double x) {
  double acc = 0.0;
  for (int j = static_cast<int>(c.size()) - 1; j >= 1; --j) {
    acc = acc * x + j * c[j];
  }
  return acc;
}

constexpr double kGravity = 9.81;
constexpr double kQuadMass = 0.486;
constexpr double kQuadArm = 0.25;
constexpr double kQuadInertia = 0.07;

Eigen::MatrixXd unit_columns(int n, const std::vector<int>& idx) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, static_cast<int>(idx.size()));
  for (size_t j = 0; j < idx.size(); ++j) m(idx[j], static_cast<int>(j)) = 1.0;
  return m;
}

}  // namespace

PolyTrig::PolyTrig() {
  sin_c_ = fit_poly([](double x) { return std::sin(x); }, 5, -M_PI_2, M_PI_2, 2001);
  cos_c_ = fit_poly([](double x) { return std::cos(x); }, 5, -M_PI_2, M_PI_2, 2001);
}

double PolyTrig::sin(double x) const { return eval_poly(sin_c_, x); }
double PolyTrig::cos(double x) const { return eval_poly(cos_c_, x); }
double PolyTrig::dsin(double x) const { return eval_dpoly(sin_c_, x); }
double PolyTrig::dcos(double x) const { return eval_dpoly(cos_c_, x); }

const PolyTrig& poly_trig() {
  static const PolyTrig fit;
  return fit;
}

Eigen::VectorXd PlantModel::f(const Eigen::VectorXd& x) const {
  if (!x.allFinite()) throw std::invalid_argument(label + ": non-finite state");
  return drift(x);
}

Eigen::MatrixXd PlantModel::A(const Eigen::VectorXd& x) const {
  if (!x.allFinite()) throw std::invalid_argument(label + ": non-finite state");
  return jacobian(x);
}

Eigen::VectorXd PlantModel::xdot(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& w) const {
  Eigen::VectorXd rate = f(x) + input_matrix * u;
  if (w.size() > 0) rate += disturbance_matrix * w;
  return rate;
}

PlantModel make_car_plant() {
  PlantModel p;
  p.label = "car";
  p.n_x = 4;
  p.n_u = 2;
  p.n_w = 2;
  p.drift = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd f(4);
    f << x[3] * std::cos(x[2]), x[3] * std::sin(x[2]), 0.0, 0.0;
    return f;
  };
  p.jacobian = [](const Eigen::VectorXd& x) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
    a(0, 2) = -x[3] * std::sin(x[2]);
    a(0, 3) = std::cos(x[2]);
    a(1, 2) = x[3] * std::cos(x[2]);
    a(1, 3) = std::sin(x[2]);
    return a;
  };
  p.drift_poly = [](const Eigen::VectorXd& x) {
    const PolyTrig& tr = poly_trig();
    Eigen::VectorXd f(4);
    f << x[3] * tr.cos(x[2]), x[3] * tr.sin(x[2]), 0.0, 0.0;
    return f;
  };
  p.jacobian_poly = [](const Eigen::VectorXd& x) {
    const PolyTrig& tr = poly_trig();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
    a(0, 2) = x[3] * tr.dcos(x[2]);
    a(0, 3) = tr.cos(x[2]);
    a(1, 2) = x[3] * tr.dsin(x[2]);
    a(1, 3) = tr.sin(x[2]);
    return a;
  };
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(4, 2);
  b(2, 0) = 1.0;
  b(3, 1) = 1.0;
  p.input_matrix = b;
  p.disturbance_matrix = b;
  p.input_nullspace = unit_columns(4, {0, 1});
  Eigen::VectorXd ulo(2), uhi(2);
  ulo << -3.0, -2.0;
  uhi << 3.0, 2.0;
  p.control_box = AxisBox(ulo, uhi);
  return p;
}

PlantModel make_quadrotor_plant() {
  PlantModel p;
  p.label = "quadrotor";
  p.n_x = 6;
  p.n_u = 2;
  p.n_w = 2;
  p.drift = [](const Eigen::VectorXd& x) {
    const double phi = x[2], vx = x[3], vz = x[4], phidot = x[5];
    Eigen::VectorXd f(6);
    f << vx * std::cos(phi) - vz * std::sin(phi),
        vx * std::sin(phi) + vz * std::cos(phi), phidot,
        vz * phidot - kGravity * std::sin(phi),
        -vx * phidot - kGravity * std::cos(phi), 0.0;
    return f;
  };
  p.jacobian = [](const Eigen::VectorXd& x) {
    const double phi = x[2], vx = x[3], vz = x[4], phidot = x[5];
    const double s = std::sin(phi), c = std::cos(phi);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(6, 6);
    a(0, 2) = -vx * s - vz * c;
    a(0, 3) = c;
    a(0, 4) = -s;
    a(1, 2) = vx * c - vz * s;
    a(1, 3) = s;
    a(1, 4) = c;
    a(2, 5) = 1.0;
    a(3, 2) = -kGravity * c;
    a(3, 4) = phidot;
    a(3, 5) = vz;
    a(4, 2) = kGravity * s;
    a(4, 3) = -phidot;
    a(4, 5) = -vx;
    return a;
  };
  p.drift_poly = [](const Eigen::VectorXd& x) {
    const PolyTrig& tr = poly_trig();
    const double phi = x[2], vx = x[3], vz = x[4], phidot = x[5];
    Eigen::VectorXd f(6);
    f << vx * tr.cos(phi) - vz * tr.sin(phi),
        vx * tr.sin(phi) + vz * tr.cos(phi), phidot,
        vz * phidot - kGravity * tr.sin(phi),
        -vx * phidot - kGravity * tr.cos(phi), 0.0;
    return f;
  };
  p.jacobian_poly = [](const Eigen::VectorXd& x) {
    const PolyTrig& tr = poly_trig();
    const double phi = x[2], vx = x[3], vz = x[4], phidot = x[5];
    const double s = tr.sin(phi), c = tr.cos(phi);
    const double ds = tr.dsin(phi), dc = tr.dcos(phi);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(6, 6);
    a(0, 2) = vx * dc - vz * ds;
    a(0, 3) = c;
    a(0, 4) = -s;
    a(1, 2) = vx * ds + vz * dc;
    a(1, 3) = s;
    a(1, 4) = c;
    a(2, 5) = 1.0;
    a(3, 2) = -kGravity * ds;
    a(3, 4) = phidot;
    a(3, 5) = vz;
    a(4, 2) = kGravity * dc;
    a(4, 3) = -phidot;
    a(4, 5) = -vx;
    return a;
  };
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(6, 2);
  b(4, 0) = 1.0 / kQuadMass;
  b(4, 1) = 1.0 / kQuadMass;
  b(5, 0) = kQuadArm / kQuadInertia;
  b(5, 1) = -kQuadArm / kQuadInertia;
  p.input_matrix = b;
  Eigen::MatrixXd bw = Eigen::MatrixXd::Zero(6, 2);
  bw(4, 0) = 1.0;
  bw(5, 1) = 1.0;
  p.disturbance_matrix = bw;
  p.input_nullspace = unit_columns(6, {0, 1, 2, 3});
  Eigen::VectorXd ulo(2), uhi(2);
  ulo << 0.0, 0.0;
  uhi << 2.0 * kQuadMass * kGravity, 2.0 * kQuadMass * kGravity;
  p.control_box = AxisBox(ulo, uhi);
  return p;
}

namespace {

PlantModel make_linear_plant(const std::string& label, const Eigen::MatrixXd& a,
                             const Eigen::MatrixXd& b, const Eigen::MatrixXd& bw,
                             const std::vector<int>& nullspace_axes,
                             const AxisBox& ubox) {
  PlantModel p;
  p.label = label;
  p.n_x = static_cast<int>(a.rows());
  p.n_u = static_cast<int>(b.cols());
  p.n_w = static_cast<int>(bw.cols());
  p.drift = [a](const Eigen::VectorXd& x) { return Eigen::VectorXd(a * x); };
  p.jacobian = [a](const Eigen::VectorXd&) { return a; };
  p.drift_poly = p.drift;
  p.jacobian_poly = p.jacobian;
  p.input_matrix = b;
  p.disturbance_matrix = bw;
  p.input_nullspace = unit_columns(p.n_x, nullspace_axes);
  p.control_box = ubox;
  p.linear_dynamics = true;
  return p;
}

}  // namespace

PlantModel make_arm14_plant() {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(14, 14);
  a.block(0, 7, 7, 7).setIdentity();
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(14, 7);
  b.block(7, 0, 7, 7).setIdentity();
  std::vector<int> ns;
  for (int i = 0; i < 7; ++i) ns.push_back(i);
  Eigen::VectorXd ulo = Eigen::VectorXd::Constant(7, -4.0);
  Eigen::VectorXd uhi = Eigen::VectorXd::Constant(7, 4.0);
  return make_linear_plant("arm14", a, b, b, ns, AxisBox(ulo, uhi));
}

PlantModel make_arm17_plant() {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(17, 17);
  a.block(3, 10, 7, 7).setIdentity();
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(17, 7);
  b.block(10, 0, 7, 7).setIdentity();
  std::vector<int> ns;
  for (int i = 0; i < 10; ++i) ns.push_back(i);
  Eigen::VectorXd ulo = Eigen::VectorXd::Constant(7, -4.0);
  Eigen::VectorXd uhi = Eigen::VectorXd::Constant(7, 4.0);
  return make_linear_plant("arm17", a, b, b, ns, AxisBox(ulo, uhi));
}

PlantModel make_plant(const std::string& label) {
  if (label == "car") return make_car_plant();
  if (label == "quadrotor") return make_quadrotor_plant();
  if (label == "arm14") return make_arm14_plant();
  if (label == "arm17") return make_arm17_plant();
  throw std::invalid_argument("make_plant: unknown label " + label);
}

double jacobian_fd_error(const PlantModel& plant, const Eigen::VectorXd& x) {
  const double h = 1e-6;
  const Eigen::MatrixXd a = plant.A(x);
  double worst = 0.0;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  for (int j = 0; j < plant.n_x; ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const Eigen::VectorXd col = (plant.f(xp) - plant.f(xm)) / (2.0 * h);
    worst = std::max(worst, (col - a.col(j)).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

Eigen::VectorXd rk4_step(const PlantModel& plant, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                         double dt) {
  const auto deriv = [&](const Eigen::VectorXd& s) { return plant.xdot(s, u, w); };
  const Eigen::VectorXd k1 = deriv(x);
  const Eigen::VectorXd k2 = deriv(x + 0.5 * dt * k1);
  const Eigen::VectorXd k3 = deriv(x + 0.5 * dt * k2);
  const Eigen::VectorXd k4 = deriv(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory integrate(const PlantModel& plant, const Eigen::VectorXd& x0,
                     const Signal& control, const Signal& disturbance,
                     double t0, double t1, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("integrate: dt must be positive");
  if (t1 < t0) throw std::invalid_argument("integrate: t1 < t0");
  Trajectory traj;
  const int steps = static_cast<int>(std::llround((t1 - t0) / dt));
  traj.t.reserve(steps + 1);
  traj.x.reserve(steps + 1);
  Eigen::VectorXd x = x0;
  traj.t.push_back(t0);
  traj.x.push_back(x);
  for (int k = 0; k < steps; ++k) {
    const double t = t0 + k * dt;
    const Eigen::VectorXd u = control(t);
    if (!plant.control_box.contains(u, 1e-9)) {
      throw std::domain_error(plant.label + ": control outside bounds");
    }
    const Eigen::VectorXd w = disturbance ? disturbance(t) : Eigen::VectorXd::Zero(plant.n_w);
    x = rk4_step(plant, x, u, w, dt);
    traj.t.push_back(t + dt);
    traj.x.push_back(x);
  }
  return traj;
}

DisturbancePolicy disturbance_policy_from_string(const std::string& s) {
  if (s == "zero") return DisturbancePolicy::kZero;
  if (s == "uniform-ball") return DisturbancePolicy::kUniformBall;
  if (s == "worst-case-axis") return DisturbancePolicy::kWorstCaseAxis;
  if (s == "seeded") return DisturbancePolicy::kSeeded;
  throw std::invalid_argument("unknown disturbance policy: " + s);
}

DisturbanceGenerator::DisturbanceGenerator(int dim, double bound,
                                           DisturbancePolicy policy,
                                           uint64_t seed)
    : dim_(dim), bound_(bound), policy_(policy), rng_(seed) {}

Eigen::VectorXd DisturbanceGenerator::sample(const Eigen::VectorXd& hint) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim_);
  if (policy_ == DisturbancePolicy::kZero || bound_ == 0.0 || dim_ == 0) return w;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (policy_) {
    case DisturbancePolicy::kUniformBall: {
      for (int i = 0; i < dim_; ++i) w[i] = gauss(rng_);
      const double n = w.norm();
      if (n == 0.0) return Eigen::VectorXd::Zero(dim_);
      const double r = bound_ * std::pow(unit(rng_), 1.0 / dim_);
      w *= r / n;
      break;
    }
    case DisturbancePolicy::kSeeded: {
      // Full-magnitude sample in a seeded random direction.
      for (int i = 0; i < dim_; ++i) w[i] = gauss(rng_);
      const double n = w.norm();
      if (n == 0.0) return Eigen::VectorXd::Zero(dim_);
      w *= bound_ / n;
      break;
    }
    case DisturbancePolicy::kWorstCaseAxis: {
      if (hint.size() == dim_ && hint.norm() > 1e-12) {
        w = bound_ * hint / hint.norm();
      } else {
        w[0] = bound_;
      }
      break;
    }
    default:
      break;
  }
  if (w.norm() > bound_) w *= bound_ / w.norm();
  return w;
}

Eigen::VectorXd DisturbanceGenerator::sample() {
  return sample(Eigen::VectorXd::Zero(0));
}

}  // namespace corrt
