#include "corrt/constants.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace corrt {

namespace detail {

GevFit fit_gev_pwm(std::vector<double> maxima) {
  GevFit fit;
  const int m = static_cast<int>(maxima.size());
  if (m < 5) return fit;
  std::sort(maxima.begin(), maxima.end());
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  for (int j = 0; j < m; ++j) {
    const double z = maxima[j];
    b0 += z;
    b1 += z * j / static_cast<double>(m - 1);
    b2 += z * j * (j - 1) /
          static_cast<double>((m - 1) * (m - 2));
  }
  b0 /= m;
  b1 /= m;
  b2 /= m;
  const double denom = 3.0 * b2 - b0;
  if (std::abs(denom) < 1e-300) return fit;
  const double c = (2.0 * b1 - b0) / denom - std::log(2.0) / std::log(3.0);
  const double k = 7.8590 * c + 2.9554 * c * c;  // Hosking's approximation
  if (!std::isfinite(k)) return fit;
  const double gamma_1k = std::tgamma(1.0 + k);
  const double denom2 = gamma_1k * (1.0 - std::pow(2.0, -k));
  if (!std::isfinite(gamma_1k) || std::abs(denom2) < 1e-300) return fit;
  fit.scale = (2.0 * b1 - b0) * k / denom2;
  fit.loc = b0 + fit.scale * (gamma_1k - 1.0) / k;
  fit.shape = k;
  fit.valid = std::isfinite(fit.loc) && std::isfinite(fit.scale) &&
              fit.scale >= 0.0;
  return fit;
}

double gev_quantile(const GevFit& fit, double p) {
  if (std::abs(fit.shape) < 1e-12) {
    return fit.loc - fit.scale * std::log(-std::log(p));
  }
  return fit.loc +
         fit.scale * (1.0 - std::pow(-std::log(p), fit.shape)) / fit.shape;
}

double gev_upper_endpoint(const GevFit& fit) {
  if (fit.shape <= 0.0) return kInf;  // Gumbel/Frechet: unbounded tail
  return fit.loc + fit.scale / fit.shape;
}

}  // namespace detail

EstimatedConstant estimate_sup_evt(
    const std::function<double(std::mt19937_64&)>& value_sampler,
    const EvtConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  EstimatedConstant out;
  out.method = "evt";
  out.delta = cfg.delta;
  out.batches = cfg.batches;
  out.batch_size = cfg.batch_size;
  out.seed = cfg.seed;

  std::vector<double> maxima;
  maxima.reserve(cfg.batches);
  double global_max = 0.0;
  for (int b = 0; b < cfg.batches; ++b) {
    double batch_max = -kInf;
    for (int k = 0; k < cfg.batch_size; ++k) {
      batch_max = std::max(batch_max, value_sampler(rng));
    }
    maxima.push_back(batch_max);
    global_max = std::max(global_max, batch_max);
  }
  out.sample_max = global_max;

  if (global_max <= 0.0) {
    out.value = 0.0;
    out.degenerate = true;
    return out;
  }

  const double spread =
      *std::max_element(maxima.begin(), maxima.end()) -
      *std::min_element(maxima.begin(), maxima.end());
  detail::GevFit fit;
  if (spread > 1e-12 * std::abs(global_max)) {
    fit = detail::fit_gev_pwm(maxima);
  }

  // Near-Gumbel fits have endpoints loc + scale/shape that explode as the
  // shape approaches zero; extrapolation is capped at a fixed multiple of
  // the sample maximum (still an over-estimate whenever the max is within
  // that factor of the supremum).
  const double cap = global_max * (1.0 + 10.0 * cfg.margin);
  double tail_estimate = global_max;
  if (fit.valid && fit.shape > 0.05) {
    // Parametric bootstrap of the upper endpoint; take its delta-quantile.
    std::vector<double> endpoints;
    endpoints.reserve(cfg.bootstrap);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int b = 0; b < cfg.bootstrap; ++b) {
      std::vector<double> resampled(maxima.size());
      double resample_max = -kInf;
      for (auto& z : resampled) {
        z = detail::gev_quantile(fit, unit(rng));
        resample_max = std::max(resample_max, z);
      }
      const detail::GevFit refit = detail::fit_gev_pwm(resampled);
      double ep = detail::gev_upper_endpoint(refit);
      if (!refit.valid || !std::isfinite(ep)) ep = resample_max;
      endpoints.push_back(std::min(ep, cap));
    }
    std::sort(endpoints.begin(), endpoints.end());
    const int idx = std::min(static_cast<int>(endpoints.size()) - 1,
                             static_cast<int>(std::ceil(
                                 cfg.delta * (endpoints.size() - 1))));
    tail_estimate = endpoints[idx];
  } else {
    // Tail fit unavailable (degenerate spread or non-Weibull shape): fall
    // back to the sample maximum; the margin below still inflates it.
    out.degenerate = !fit.valid || fit.shape <= 0.05;
  }

  out.value = std::max(std::min(tail_estimate, cap), global_max) *
              (1.0 + cfg.margin);
  return out;
}

EstimatedConstant estimate_lipschitz_evt(
    const std::function<double(std::mt19937_64&)>& quotient_sampler,
    const EvtConfig& cfg) {
  EstimatedConstant out = estimate_sup_evt(quotient_sampler, cfg);
  out.domain = "difference quotients";
  return out;
}

EstimatedConstant estimate_uniform_eps1(const PerceptionModel& model,
                                        const ObservationMap& map,
                                        const AxisBox& yr_box,
                                        const AxisBox& theta_box, int n,
                                        const EvtConfig& cfg) {
  if (n < 100) throw std::invalid_argument("estimate_uniform_eps1: N >= 100");
  EvtConfig local = cfg;
  local.batches = std::max(5, n / std::max(1, cfg.batch_size));
  auto sampler = [&](std::mt19937_64& rng) {
    const Eigen::VectorXd yr = yr_box.sample(rng);
    const Eigen::VectorXd th = theta_box.sample(rng);
    return perception_error(model, map, yr, th);
  };
  EstimatedConstant out = estimate_sup_evt(sampler, local);
  out.domain = "D_r x D_theta";
  return out;
}

namespace {

// Radius of the largest ball centered at x inside the box avoiding all points.
double empty_ball_radius(const Eigen::MatrixXd& points, const AxisBox& box,
                         const Eigen::VectorXd& x) {
  double r = kInf;
  for (int i = 0; i < box.dim(); ++i) {
    r = std::min(r, x[i] - box.lo()[i]);
    r = std::min(r, box.hi()[i] - x[i]);
  }
  if (points.rows() > 0) {
    const double d2 =
        (points.rowwise() - x.transpose()).rowwise().squaredNorm().minCoeff();
    r = std::min(r, std::sqrt(d2));
  }
  return std::max(0.0, r);
}

struct Cell {
  Eigen::VectorXd lo, hi;
  double ub;
};

}  // namespace

double compute_dispersion(const Eigen::MatrixXd& points, const AxisBox& box,
                          double tol, int max_nodes) {
  if (!box.all_finite()) {
    throw std::invalid_argument("compute_dispersion: box must be bounded");
  }
  if (points.rows() == 0) return box.inradius();
  if (points.cols() != box.dim()) {
    throw std::invalid_argument("compute_dispersion: dim mismatch");
  }

  auto cell_ub = [&](const Cell& c, double f_center) {
    return f_center + 0.5 * (c.hi - c.lo).norm();
  };

  auto cmp = [](const Cell& a, const Cell& b) { return a.ub < b.ub; };
  std::priority_queue<Cell, std::vector<Cell>, decltype(cmp)> queue(cmp);

  Cell root{box.lo(), box.hi(), 0.0};
  double best_lb = empty_ball_radius(points, box, box.center());
  root.ub = cell_ub(root, best_lb);
  queue.push(root);

  int nodes = 0;
  while (!queue.empty() && nodes < max_nodes) {
    const Cell top = queue.top();
    // The queue max dominates every remaining cell; discarded cells were
    // already dominated by best_lb at discard time.
    if (top.ub - best_lb <= tol) break;
    queue.pop();
    ++nodes;

    int axis = 0;
    (top.hi - top.lo).maxCoeff(&axis);
    const double mid = 0.5 * (top.lo[axis] + top.hi[axis]);
    for (int side = 0; side < 2; ++side) {
      Cell child = top;
      (side == 0 ? child.hi : child.lo)[axis] = mid;
      const Eigen::VectorXd center = 0.5 * (child.lo + child.hi);
      const double f = empty_ball_radius(points, box, center);
      best_lb = std::max(best_lb, f);
      child.ub = f + 0.5 * (child.hi - child.lo).norm();
      if (child.ub > best_lb) queue.push(child);
    }
  }
  return queue.empty() ? best_lb : std::max(queue.top().ub, best_lb);
}

EstimatedConstant estimate_L_delta_k(const TrackingController& controller,
                                     const MetricMatrix& w_e,
                                     const DeltaKSampleDomain& dom,
                                     const EvtConfig& cfg,
                                     int* rejected_samples) {
  const PlantModel& plant = controller.plant();
  const MetricMatrix& m_c = controller.ccm().metric;
  int rejected = 0;

  auto quotient = [&](std::mt19937_64& rng) -> double {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int attempt = 0; attempt < 64; ++attempt) {
      const Eigen::VectorXd x_ref = dom.nominal_box.sample(rng);
      const Eigen::VectorXd u_ref = plant.control_box.sample(rng);

      auto ball_point = [&](const Eigen::VectorXd& center,
                            const MetricMatrix& metric, double radius) {
        Eigen::VectorXd dir(plant.n_x);
        for (int i = 0; i < plant.n_x; ++i) dir[i] = gauss(rng);
        dir.normalize();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(metric.matrix());
        const Eigen::VectorXd step =
            es.eigenvectors() *
            es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
            es.eigenvectors().transpose() * dir;
        const double r =
            radius * std::pow(unit(rng), 1.0 / plant.n_x);
        return Eigen::VectorXd(center + r * step);
      };

      const Eigen::VectorXd x = ball_point(x_ref, m_c, dom.c_bar);
      const Eigen::VectorXd xh1 = ball_point(x, w_e, dom.e_bar);
      const Eigen::VectorXd xh2 = ball_point(x, w_e, dom.e_bar);
      const double de = riemannian_distance(xh1, xh2, w_e);
      if (de < 1e-10) continue;  // zero-distance guard
      try {
        const double dk1 = controller.delta_k(xh1, x, x_ref, u_ref);
        const double dk2 = controller.delta_k(xh2, x, x_ref, u_ref);
        return std::abs(dk1 - dk2) / de;
      } catch (const ControlInfeasible&) {
        ++rejected;
        continue;
      }
    }
    return 0.0;
  };

  EstimatedConstant out = estimate_lipschitz_evt(quotient, cfg);
  out.domain = "d_c <= c_bar, d_e <= e_bar";
  if (rejected_samples) *rejected_samples = rejected;
  return out;
}

}  // namespace corrt
