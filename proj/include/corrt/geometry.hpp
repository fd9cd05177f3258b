#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace corrt {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Axis-aligned box with possibly infinite bounds. Used for state domains,
/// obstacles, goal regions, and control limits.
class AxisBox {
 public:
  AxisBox(Eigen::VectorXd lo, Eigen::VectorXd hi);
  static AxisBox unbounded(int dim);

  int dim() const { return static_cast<int>(lo_.size()); }
  const Eigen::VectorXd& lo() const { return lo_; }
  const Eigen::VectorXd& hi() const { return hi_; }

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const;
  Eigen::VectorXd center() const;
  Eigen::VectorXd widths() const;

  // Uniform sample; throws on unbounded axes.
  Eigen::VectorXd sample(std::mt19937_64& rng) const;

  // Radius of the largest ball contained in the box.
  double inradius() const;

  // Euclidean distance from x to the box (0 if inside).
  double distance(const Eigen::VectorXd& x) const;

  // Embed this box into a higher-dimensional space: bounds apply on `axes`,
  // all other axes unbounded.
  AxisBox lift(int full_dim, const std::vector<int>& axes) const;

  // Componentwise intersection; empty result throws.
  AxisBox intersect(const AxisBox& other) const;

  bool all_finite() const;

 private:
  Eigen::VectorXd lo_, hi_;
};

/// Symmetric positive-definite matrix with cached Cholesky factor (M = R^T R)
/// and eigenvalue bounds. Immutable after construction.
class MetricMatrix {
 public:
  explicit MetricMatrix(const Eigen::MatrixXd& m);
  static MetricMatrix identity(int n);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  const Eigen::MatrixXd& cholesky() const { return chol_; }  // upper-triangular R
  const Eigen::MatrixXd& inverse() const { return inv_; }
  double eig_min() const { return eig_min_; }
  double eig_max() const { return eig_max_; }

 private:
  Eigen::MatrixXd m_, chol_, inv_;
  double eig_min_ = 0.0, eig_max_ = 0.0;
};

/// {x : (x - c)^T M (x - c) <= r^2}
struct Ellipsoid {
  Eigen::VectorXd center;
  MetricMatrix metric;
  double radius = 0.0;

  Ellipsoid(Eigen::VectorXd c, MetricMatrix m, double r);
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  // Half-width of the axis-aligned bounding box along axis i: r * sqrt((M^-1)_ii).
  double extent(int axis) const;
};

/// A contraction metric with its rate and validity domain. `metric` is the
/// matrix distances are measured with (M_c for tracking, W_e for estimation).
/// `tube_metric` defines the ellipsoidal tube outer approximation; it equals
/// `metric` for constant metrics and (W̄_c)^-1 for state-dependent ones with a
/// constant dual bound.
struct MetricSpec {
  MetricMatrix metric;
  double rate = 0.0;
  double rho = 0.0;  // OCM innovation multiplier, 0 for CCMs
  AxisBox domain;
  std::optional<MetricMatrix> tube_metric;

  MetricSpec(MetricMatrix m, double rate_in, double rho_in, AxisBox dom)
      : metric(std::move(m)), rate(rate_in), rho(rho_in), domain(std::move(dom)) {}
  const MetricMatrix& tube() const { return tube_metric ? *tube_metric : metric; }
};

// Riemannian distance under a constant metric: sqrt((p-q)^T M (p-q)).
double riemannian_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                           const MetricMatrix& m);

std::pair<double, double> eigen_bounds(const MetricMatrix& m);

// Exact containment test: every axis extent of E fits in B.
bool ellipsoid_in_box(const Ellipsoid& e, const AxisBox& b);

// Conservative disjointness test: true only when E and B are certified
// disjoint; false when intersecting or undecided.
bool ellipsoid_disjoint_box(const Ellipsoid& e, const AxisBox& b);

// Trace-minimal parametric outer ellipsoid of E1 (+) E2; E2 must be centered
// at the origin.
Ellipsoid minkowski_outer(const Ellipsoid& e1, const Ellipsoid& e2);

// Projection of an ellipsoid onto a coordinate subset: shape Q -> S Q S^T
// where S selects `axes`. Returns the projected ellipsoid (same radius).
Ellipsoid project_ellipsoid(const Ellipsoid& e, const std::vector<int>& axes);

}  // namespace corrt
