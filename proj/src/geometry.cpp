#include "corrt/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace corrt {

AxisBox::AxisBox(Eigen::VectorXd lo, Eigen::VectorXd hi)
    : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size()) {
    throw std::invalid_argument("AxisBox: bound dimensions differ");
  }
  for (int i = 0; i < lo_.size(); ++i) {
    if (!(lo_[i] <= hi_[i])) {
      throw std::invalid_argument("AxisBox: lower bound exceeds upper bound");
    }
  }
}

AxisBox AxisBox::unbounded(int dim) {
  return AxisBox(Eigen::VectorXd::Constant(dim, -kInf),
                 Eigen::VectorXd::Constant(dim, kInf));
}

bool AxisBox::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != lo_.size()) throw std::invalid_argument("AxisBox: dim mismatch");
  for (int i = 0; i < x.size(); ++i) {
    if (x[i] < lo_[i] - tol || x[i] > hi_[i] + tol) return false;
  }
  return true;
}

Eigen::VectorXd AxisBox::clamp(const Eigen::VectorXd& x) const {
  if (x.size() != lo_.size()) throw std::invalid_argument("AxisBox: dim mismatch");
  return x.cwiseMax(lo_).cwiseMin(hi_);
}

Eigen::VectorXd AxisBox::center() const { return 0.5 * (lo_ + hi_); }

Eigen::VectorXd AxisBox::widths() const { return hi_ - lo_; }

Eigen::VectorXd AxisBox::sample(std::mt19937_64& rng) const {
  Eigen::VectorXd x(dim());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < dim(); ++i) {
    if (!std::isfinite(lo_[i]) || !std::isfinite(hi_[i])) {
      throw std::domain_error("AxisBox::sample: unbounded axis");
    }
    x[i] = lo_[i] + unit(rng) * (hi_[i] - lo_[i]);
  }
  return x;
}

double AxisBox::inradius() const {
  double r = kInf;
  for (int i = 0; i < dim(); ++i) r = std::min(r, 0.5 * (hi_[i] - lo_[i]));
  return r;
}

double AxisBox::distance(const Eigen::VectorXd& x) const {
  double d2 = 0.0;
  for (int i = 0; i < dim(); ++i) {
    double gap = 0.0;
    if (x[i] < lo_[i]) gap = lo_[i] - x[i];
    else if (x[i] > hi_[i]) gap = x[i] - hi_[i];
    d2 += gap * gap;
  }
  return std::sqrt(d2);
}

AxisBox AxisBox::lift(int full_dim, const std::vector<int>& axes) const {
  if (static_cast<int>(axes.size()) != dim()) {
    throw std::invalid_argument("AxisBox::lift: axes size mismatch");
  }
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(full_dim, -kInf);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(full_dim, kInf);
  for (int i = 0; i < dim(); ++i) {
    lo[axes[i]] = lo_[i];
    hi[axes[i]] = hi_[i];
  }
  return AxisBox(lo, hi);
}

AxisBox AxisBox::intersect(const AxisBox& other) const {
  if (other.dim() != dim()) throw std::invalid_argument("AxisBox: dim mismatch");
  return AxisBox(lo_.cwiseMax(other.lo_), hi_.cwiseMin(other.hi_));
}

bool AxisBox::all_finite() const {
  return lo_.allFinite() && hi_.allFinite();
}

MetricMatrix::MetricMatrix(const Eigen::MatrixXd& m) : m_(m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("MetricMatrix: not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("MetricMatrix: not symmetric");
  }
  m_ = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_);
  eig_min_ = es.eigenvalues().minCoeff();
  eig_max_ = es.eigenvalues().maxCoeff();
  if (eig_min_ <= 0.0) {
    throw std::invalid_argument("MetricMatrix: not positive definite");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m_);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("MetricMatrix: Cholesky failed");
  }
  chol_ = llt.matrixU();  // M = R^T R with R upper-triangular
  if (((chol_.transpose() * chol_ - m_).norm() / m_.norm()) > 1e-10) {
    throw std::runtime_error("MetricMatrix: Cholesky reconstruction error");
  }
  inv_ = llt.solve(Eigen::MatrixXd::Identity(dim(), dim()));
}

MetricMatrix MetricMatrix::identity(int n) {
  return MetricMatrix(Eigen::MatrixXd::Identity(n, n));
}

Ellipsoid::Ellipsoid(Eigen::VectorXd c, MetricMatrix m, double r)
    : center(std::move(c)), metric(std::move(m)), radius(r) {
  if (center.size() != metric.dim()) {
    throw std::invalid_argument("Ellipsoid: center/metric dim mismatch");
  }
  if (radius < 0.0) throw std::invalid_argument("Ellipsoid: negative radius");
}

bool Ellipsoid::contains(const Eigen::VectorXd& x, double tol) const {
  const Eigen::VectorXd d = x - center;
  return d.dot(metric.matrix() * d) <= radius * radius + tol;
}

double Ellipsoid::extent(int axis) const {
  return radius * std::sqrt(metric.inverse()(axis, axis));
}

double riemannian_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                           const MetricMatrix& m) {
  if (p.size() != q.size() || p.size() != m.dim()) {
    throw std::invalid_argument("riemannian_distance: dim mismatch");
  }
  const Eigen::VectorXd d = p - q;
  return std::sqrt(std::max(0.0, d.dot(m.matrix() * d)));
}

std::pair<double, double> eigen_bounds(const MetricMatrix& m) {
  return {m.eig_min(), m.eig_max()};
}

bool ellipsoid_in_box(const Ellipsoid& e, const AxisBox& b) {
  if (e.center.size() != b.dim()) {
    throw std::invalid_argument("ellipsoid_in_box: dim mismatch");
  }
  for (int i = 0; i < b.dim(); ++i) {
    const double ext = e.extent(i);
    if (e.center[i] - ext < b.lo()[i] || e.center[i] + ext > b.hi()[i]) {
      return false;
    }
  }
  return true;
}

namespace {

// Minimum of (x-c)^T M (x-c) over the box, found by projected gradient with
// diminishing steps. Exact for diagonal M via coordinate clamping.
double box_quadratic_min_candidate(const Ellipsoid& e, const AxisBox& b,
                                   Eigen::VectorXd* argmin) {
  const Eigen::MatrixXd& m = e.metric.matrix();
  Eigen::VectorXd x = b.clamp(e.center);
  const double step0 = 1.0 / e.metric.eig_max();
  for (int k = 0; k < 400; ++k) {
    const Eigen::VectorXd g = 2.0 * (m * (x - e.center));
    const Eigen::VectorXd x_next = b.clamp(x - step0 * g);
    if ((x_next - x).norm() < 1e-14 * (1.0 + x.norm())) {
      x = x_next;
      break;
    }
    x = x_next;
  }
  if (argmin) *argmin = x;
  const Eigen::VectorXd d = x - e.center;
  return d.dot(m * d);
}

bool is_diagonal(const Eigen::MatrixXd& m) {
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (i != j && m(i, j) != 0.0) return false;
    }
  }
  return true;
}

}  // namespace

bool ellipsoid_disjoint_box(const Ellipsoid& e, const AxisBox& b) {
  if (e.center.size() != b.dim()) {
    throw std::invalid_argument("ellipsoid_disjoint_box: dim mismatch");
  }
  const double r2 = e.radius * e.radius;

  if (is_diagonal(e.metric.matrix())) {
    const Eigen::VectorXd p = b.clamp(e.center);
    const Eigen::VectorXd d = p - e.center;
    return d.dot(e.metric.matrix() * d) > r2;
  }

  // Intersection witness from the projected-gradient candidate.
  Eigen::VectorXd xmin;
  const double cand = box_quadratic_min_candidate(e, b, &xmin);
  if (cand <= r2) return false;

  // Certificate 1: metric lower bound via the Euclidean distance to the box.
  const double dist = b.distance(e.center);
  if (e.metric.eig_min() * dist * dist > r2) return true;

  // Certificate 2: the axis-aligned bounding box of E misses B.
  for (int i = 0; i < b.dim(); ++i) {
    const double ext = e.extent(i);
    if (e.center[i] + ext < b.lo()[i] || e.center[i] - ext > b.hi()[i]) {
      return true;
    }
  }

  // Certificate 3: first-order lower bound of the convex quadratic over B.
  const Eigen::VectorXd g = 2.0 * (e.metric.matrix() * (xmin - e.center));
  double lb = cand;
  for (int i = 0; i < b.dim(); ++i) {
    const double dlo = b.lo()[i] - xmin[i];
    const double dhi = b.hi()[i] - xmin[i];
    double worst;
    if (std::isfinite(dlo) && std::isfinite(dhi)) {
      worst = std::min(g[i] * dlo, g[i] * dhi);
    } else {
      // Unbounded edge: the linear term is unbounded below unless the
      // gradient component vanished at the stationary point.
      worst = (std::abs(g[i]) < 1e-9 * (1.0 + cand)) ? 0.0 : -kInf;
    }
    lb += worst;
  }
  if (lb > r2) return true;

  return false;  // undecided: treated as potential intersection
}

Ellipsoid minkowski_outer(const Ellipsoid& e1, const Ellipsoid& e2) {
  if (e1.center.size() != e2.center.size()) {
    throw std::invalid_argument("minkowski_outer: dim mismatch");
  }
  if (e2.center.norm() > 1e-12) {
    throw std::invalid_argument("minkowski_outer: E2 must be origin-centered");
  }
  if (e2.radius == 0.0) return e1;
  if (e1.radius == 0.0) {
    return Ellipsoid(e1.center, e2.metric, e2.radius);
  }
  const Eigen::MatrixXd q1 = e1.radius * e1.radius * e1.metric.inverse();
  const Eigen::MatrixXd q2 = e2.radius * e2.radius * e2.metric.inverse();
  const double beta = std::sqrt(q1.trace() / q2.trace());
  const Eigen::MatrixXd q = (1.0 + 1.0 / beta) * q1 + (1.0 + beta) * q2;
  const Eigen::MatrixXd m = MetricMatrix(q).inverse();
  return Ellipsoid(e1.center, MetricMatrix(m), 1.0);
}

Ellipsoid project_ellipsoid(const Ellipsoid& e, const std::vector<int>& axes) {
  const int k = static_cast<int>(axes.size());
  Eigen::MatrixXd shape = e.metric.inverse();  // Q up to radius^2
  Eigen::MatrixXd sub(k, k);
  Eigen::VectorXd c(k);
  for (int i = 0; i < k; ++i) {
    c[i] = e.center[axes[i]];
    for (int j = 0; j < k; ++j) sub(i, j) = shape(axes[i], axes[j]);
  }
  return Ellipsoid(c, MetricMatrix(Eigen::MatrixXd(sub.inverse())), e.radius);
}

}  // namespace corrt
