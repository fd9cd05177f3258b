#include "corrt/metric_synthesis.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace corrt {

namespace {

void check_nullspace(const PlantModel& plant) {
  const Eigen::MatrixXd& b = plant.input_matrix;
  const Eigen::MatrixXd& bp = plant.input_nullspace;
  if (bp.cols() == 0) return;
  if (b.cols() > 0 &&
      (bp.transpose() * b).cwiseAbs().maxCoeff() > 1e-10) {
    throw std::invalid_argument(plant.label + ": B_perp not orthogonal to B");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(bp);
  if (qr.rank() < bp.cols()) {
    throw std::invalid_argument(plant.label + ": rank-deficient B_perp");
  }
}

double max_eig_sym(const Eigen::MatrixXd& g, Eigen::VectorXd* top = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  const int n = static_cast<int>(g.rows());
  if (top) *top = es.eigenvectors().col(n - 1);
  return es.eigenvalues()[n - 1];
}

Eigen::MatrixXd ccm_lhs(const Eigen::MatrixXd& w, const Eigen::MatrixXd& a,
                        const Eigen::MatrixXd& bp, double lambda_c) {
  return bp.transpose() *
         (a * w + w * a.transpose() + 2.0 * lambda_c * w) * bp;
}

Eigen::MatrixXd ocm_lhs(const Eigen::MatrixXd& w, const Eigen::MatrixXd& a,
                        const Eigen::MatrixXd& ctc, double rho,
                        double lambda_e) {
  return w * a + a.transpose() * w - rho * ctc + 2.0 * lambda_e * w;
}

// Projection onto {beta_lo I <= W <= beta_hi I, cond(W) <= kappa} by
// eigenvalue clipping (the set is convex; clipping lands inside it).
Eigen::MatrixXd project_spectrum(const Eigen::MatrixXd& w, double beta_lo,
                                 double beta_hi, double kappa) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (w + w.transpose()));
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) ev[i] = std::clamp(ev[i], beta_lo, beta_hi);
  const double floor_ev = ev.maxCoeff() / kappa;
  for (int i = 0; i < ev.size(); ++i) ev[i] = std::max(ev[i], floor_ev);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct FeasibilityResult {
  Eigen::MatrixXd w;
  double margin = -kInf;
};

// Maximize the minimum LMI margin over samples by projected subgradient
// ascent. `lhs` maps (W, sample index) to the symmetric constraint matrix,
// `grad` returns the gradient of v^T LHS v with respect to W. When
// `homogeneous` (CCM case: margin scales linearly with W), a positive margin
// below the stop threshold is rescued by scaling W up within the spectrum box.
template <typename LhsFn, typename GradFn>
FeasibilityResult max_min_margin(const Eigen::MatrixXd& w0, int n_samples,
                                 const LhsFn& lhs, const GradFn& grad,
                                 const SynthesisConfig& cfg, double kappa,
                                 double stop_margin, bool homogeneous = false) {
  Eigen::MatrixXd w = project_spectrum(w0, cfg.beta_lo, cfg.beta_hi, kappa);
  FeasibilityResult best;
  best.w = w;

  auto min_margin = [&](const Eigen::MatrixXd& ww, int* argmin,
                        Eigen::VectorXd* top_vec) {
    double worst = kInf;
    for (int i = 0; i < n_samples; ++i) {
      Eigen::VectorXd v;
      const double m = -max_eig_sym(lhs(ww, i), &v);
      if (m < worst) {
        worst = m;
        if (argmin) *argmin = i;
        if (top_vec) *top_vec = v;
      }
    }
    return worst;
  };

  const double step0 = 0.25 * (cfg.beta_hi - cfg.beta_lo);
  for (int k = 1; k <= cfg.max_iters; ++k) {
    int active = 0;
    Eigen::VectorXd v;
    const double margin = min_margin(w, &active, &v);
    if (margin > best.margin) {
      best.margin = margin;
      best.w = w;
    }
    if (best.margin >= stop_margin) break;
    Eigen::MatrixXd g = grad(w, active, v);
    const double gn = g.norm();
    if (gn < 1e-14) break;
    w = project_spectrum(w - (step0 / std::sqrt(static_cast<double>(k))) * (g / gn),
                         cfg.beta_lo, cfg.beta_hi, kappa);
  }
  if (homogeneous && best.margin > 0.0 && best.margin < stop_margin) {
    const double top = max_eig_sym(best.w);
    const double s =
        std::min(cfg.beta_hi / top, stop_margin / best.margin);
    if (s > 1.0) {
      best.w *= s;
      best.margin *= s;
    }
  }
  return best;
}

}  // namespace

std::vector<Eigen::VectorXd> sample_domain(const AxisBox& box, int count,
                                           uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    Eigen::VectorXd x(box.dim());
    for (int i = 0; i < box.dim(); ++i) {
      const double lo = box.lo()[i], hi = box.hi()[i];
      if (std::isfinite(lo) && std::isfinite(hi)) {
        x[i] = lo + unit(rng) * (hi - lo);
      } else {
        x[i] = 5.0 * gauss(rng);
      }
    }
    out.push_back(x);
  }
  return out;
}

double ccm_lmi_margin(const Eigen::MatrixXd& w, const Eigen::VectorXd& x,
                      const PlantModel& plant, double lambda_c) {
  check_nullspace(plant);
  const Eigen::MatrixXd& bp = plant.input_nullspace;
  if (bp.cols() == 0) return kInf;  // fully actuated: vacuous constraint
  const Eigen::MatrixXd a = plant.jacobian_poly(x);
  return -max_eig_sym(ccm_lhs(w, a, bp, lambda_c));
}

double ocm_lmi_margin(const Eigen::MatrixXd& w_e, const Eigen::VectorXd& xhat,
                      const PlantModel& plant, const Eigen::MatrixXd& c_r,
                      double rho, double lambda_e) {
  const Eigen::MatrixXd a = plant.jacobian_poly(xhat);
  return -max_eig_sym(ocm_lhs(w_e, a, c_r.transpose() * c_r, rho, lambda_e));
}

double ccm_lmi_margin(const MetricMatrix& w, const Eigen::VectorXd& x,
                      const PlantModel& plant, double lambda_c) {
  return ccm_lmi_margin(w.matrix(), x, plant, lambda_c);
}

double ocm_lmi_margin(const MetricMatrix& w_e, const Eigen::VectorXd& xhat,
                      const PlantModel& plant, const Eigen::MatrixXd& c_r,
                      double rho, double lambda_e) {
  return ocm_lmi_margin(w_e.matrix(), xhat, plant, c_r, rho, lambda_e);
}

double verify_ccm(const Eigen::MatrixXd& w, const PlantModel& plant,
                  const AxisBox& d_c, double lambda_c, int samples,
                  uint64_t seed) {
  double worst = kInf;
  for (const auto& x : sample_domain(d_c, samples, seed)) {
    worst = std::min(worst, ccm_lmi_margin(w, x, plant, lambda_c));
  }
  return worst;
}

double verify_ocm(const Eigen::MatrixXd& w_e, const PlantModel& plant,
                  const Eigen::MatrixXd& c_r, const AxisBox& d_e, double rho,
                  double lambda_e, int samples, uint64_t seed) {
  double worst = kInf;
  for (const auto& x : sample_domain(d_e, samples, seed)) {
    worst = std::min(worst, ocm_lmi_margin(w_e, x, plant, c_r, rho, lambda_e));
  }
  return worst;
}

SynthesizedMetric synthesize_ccm(const PlantModel& plant, const AxisBox& d_c,
                                 const SynthesisConfig& cfg) {
  check_nullspace(plant);
  if (cfg.rate_grid.empty()) {
    throw std::invalid_argument("synthesize_ccm: empty rate grid");
  }
  const int n = plant.n_x;
  const Eigen::MatrixXd& bp = plant.input_nullspace;

  // Fully actuated plants satisfy the condition vacuously with W = I.
  if (bp.cols() == 0) {
    SynthesizedMetric out(MetricSpec(
        MetricMatrix::identity(n),
        *std::max_element(cfg.rate_grid.begin(), cfg.rate_grid.end()), 0.0,
        d_c));
    out.feasible = true;
    out.dual = Eigen::MatrixXd::Identity(n, n);
    out.objective = 1.0 / out.spec.rate;
    out.worst_margin = kInf;
    out.verify_margin = kInf;
    out.report = "fully actuated: vacuous CCM condition";
    return out;
  }

  const int n_samples = plant.linear_dynamics ? 1 : cfg.sample_count;
  auto states = sample_domain(d_c, n_samples, cfg.seed);
  std::vector<Eigen::MatrixXd> jacs;
  jacs.reserve(states.size());
  for (const auto& x : states) jacs.push_back(plant.jacobian_poly(x));

  SynthesizedMetric best(
      MetricSpec(MetricMatrix::identity(n), cfg.rate_grid.front(), 0.0, d_c));
  double worst_overall = -kInf;
  std::ostringstream rep;

  for (double lambda : cfg.rate_grid) {
    auto lhs_l = [&](const Eigen::MatrixXd& w, int i) {
      return ccm_lhs(w, jacs[i], bp, lambda);
    };
    auto grad_l = [&](const Eigen::MatrixXd& w, int i, const Eigen::VectorXd& v)
        -> Eigen::MatrixXd {
      (void)w;
      const Eigen::VectorXd z = bp * v;
      const Eigen::VectorXd az = jacs[i].transpose() * z;
      return az * z.transpose() + z * az.transpose() +
             2.0 * lambda * z * z.transpose();
    };
    const double stop = cfg.margin * 1.5 + 1e-9;

    Eigen::MatrixXd warm = Eigen::MatrixXd::Identity(n, n);
    FeasibilityResult at_hi = max_min_margin(warm, n_samples, lhs_l, grad_l,
                                             cfg, cfg.kappa_hi, stop, true);
    worst_overall = std::max(worst_overall, at_hi.margin);
    if (at_hi.margin < cfg.margin) {
      rep << "lambda=" << lambda << ": infeasible (margin " << at_hi.margin
          << ")\n";
      continue;
    }

    // Bisect the condition number downward, keeping the best objective seen.
    double lo = cfg.kappa_lo, hi = cfg.kappa_hi;
    FeasibilityResult found = at_hi;
    while (hi - lo > cfg.kappa_tol) {
      const double mid = 0.5 * (lo + hi);
      FeasibilityResult r = max_min_margin(found.w, n_samples, lhs_l, grad_l,
                                           cfg, mid, stop, true);
      if (r.margin >= cfg.margin) {
        hi = mid;
        found = r;
      } else {
        lo = mid;
      }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(found.w);
    const double cond = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
    const double objective = std::sqrt(cond) / lambda;
    rep << "lambda=" << lambda << ": feasible, kappa=" << cond
        << ", objective=" << objective << "\n";
    if (objective < best.objective) {
      best.feasible = true;
      best.objective = objective;
      best.dual = found.w;
      best.worst_margin = found.margin;
      best.spec = MetricSpec(MetricMatrix(found.w.inverse()), lambda, 0.0, d_c);
    }
  }

  if (!best.feasible) {
    best.worst_margin = worst_overall;
    rep << "infeasible over entire rate grid; best margin " << worst_overall;
    best.report = rep.str();
    return best;
  }

  best.verify_margin =
      verify_ccm(best.dual, plant, d_c, best.spec.rate,
                 cfg.verify_multiplier * n_samples, cfg.seed + 9999);
  rep << "verification margin (x" << cfg.verify_multiplier
      << " fresh samples): " << best.verify_margin << "\n"
      << "note: sampled-LMI verification on polynomialized dynamics, not a "
         "SoS certificate";
  best.report = rep.str();
  return best;
}

SynthesizedMetric synthesize_ocm(const PlantModel& plant, const AxisBox& d_e,
                                 const Eigen::MatrixXd& c_r,
                                 const SynthesisConfig& cfg) {
  if (cfg.rate_grid.empty()) {
    throw std::invalid_argument("synthesize_ocm: empty rate grid");
  }
  const int n = plant.n_x;
  const Eigen::MatrixXd ctc = c_r.transpose() * c_r;
  const int n_samples = plant.linear_dynamics ? 1 : cfg.sample_count;
  auto states = sample_domain(d_e, n_samples, cfg.seed + 17);
  std::vector<Eigen::MatrixXd> jacs;
  jacs.reserve(states.size());
  for (const auto& x : states) jacs.push_back(plant.jacobian_poly(x));

  SynthesizedMetric best(
      MetricSpec(MetricMatrix::identity(n), cfg.rate_grid.front(), 0.0, d_e));
  double worst_overall = -kInf;
  std::ostringstream rep;

  for (double lambda : cfg.rate_grid) {
    auto solve_at = [&](double rho, const Eigen::MatrixXd& warm, double kappa) {
      auto lhs_l = [&](const Eigen::MatrixXd& w, int i) {
        return ocm_lhs(w, jacs[i], ctc, rho, lambda);
      };
      auto grad_l = [&](const Eigen::MatrixXd& w, int i,
                        const Eigen::VectorXd& v) -> Eigen::MatrixXd {
        (void)w;
        const Eigen::VectorXd av = jacs[i] * v;
        return av * v.transpose() + v * av.transpose() +
               2.0 * lambda * v * v.transpose();
      };
      return max_min_margin(warm, n_samples, lhs_l, grad_l, cfg, kappa,
                            cfg.margin * 1.5 + 1e-9);
    };

    // Feasibility is monotone in rho and the feasible set is an interval;
    // golden-section on log rho locates the best-margin point, then bisection
    // finds the smallest feasible rho.
    auto margin_at = [&](double log_rho, Eigen::MatrixXd warm, double kappa) {
      return solve_at(std::exp(log_rho), warm, kappa);
    };

    const double kappa = cfg.kappa_hi;
    double a = std::log(cfg.rho_lo), b = std::log(cfg.rho_hi);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    Eigen::MatrixXd warm = Eigen::MatrixXd::Identity(n, n);
    FeasibilityResult f1 = margin_at(x1, warm, kappa);
    FeasibilityResult f2 = margin_at(x2, f1.w, kappa);
    for (int it = 0; it < 14; ++it) {
      if (f1.margin < f2.margin) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + gr * (b - a);
        f2 = margin_at(x2, f1.w, kappa);
      } else {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - gr * (b - a);
        f1 = margin_at(x1, f2.w, kappa);
      }
    }
    const double log_rho_peak = (f1.margin > f2.margin) ? x1 : x2;
    FeasibilityResult peak = (f1.margin > f2.margin) ? f1 : f2;
    worst_overall = std::max(worst_overall, peak.margin);
    if (peak.margin < cfg.margin) {
      rep << "lambda=" << lambda << ": infeasible for all rho (margin "
          << peak.margin << ")\n";
      continue;
    }

    double lo = std::log(cfg.rho_lo), hi = log_rho_peak;
    FeasibilityResult at_min = peak;
    double log_rho_min = log_rho_peak;
    for (int it = 0; it < 20; ++it) {
      const double mid = 0.5 * (lo + hi);
      FeasibilityResult r = margin_at(mid, at_min.w, kappa);
      if (r.margin >= cfg.margin) {
        hi = mid;
        at_min = r;
        log_rho_min = mid;
      } else {
        lo = mid;
      }
    }
    const double rho = std::exp(log_rho_min);

    // Tighten conditioning at (slightly above) the minimal feasible rho.
    struct Candidate {
      FeasibilityResult r;
      double rho;
    };
    std::vector<Candidate> candidates{{at_min, rho}};
    const double rho_slack = std::min(rho * 1.2, cfg.rho_hi);
    double klo = cfg.kappa_lo, khi = cfg.kappa_hi;
    FeasibilityResult kfound = at_min;
    bool kfeasible = false;
    while (khi - klo > cfg.kappa_tol) {
      const double mid = 0.5 * (klo + khi);
      FeasibilityResult r = solve_at(rho_slack, kfound.w, mid);
      if (r.margin >= cfg.margin) {
        khi = mid;
        kfound = r;
        kfeasible = true;
      } else {
        klo = mid;
      }
    }
    if (kfeasible) candidates.push_back({kfound, rho_slack});

    for (const auto& cand : candidates) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cand.r.w);
      const double w_min = es.eigenvalues().minCoeff();
      const double w_max = es.eigenvalues().maxCoeff();
      const double objective = (w_max / std::sqrt(w_min)) * cand.rho / lambda;
      rep << "lambda=" << lambda << ": feasible, rho=" << cand.rho
          << ", objective=" << objective << "\n";
      if (objective < best.objective) {
        best.feasible = true;
        best.objective = objective;
        best.dual = cand.r.w;
        best.worst_margin = cand.r.margin;
        best.spec = MetricSpec(MetricMatrix(cand.r.w), lambda, cand.rho, d_e);
      }
    }
  }

  if (!best.feasible) {
    best.worst_margin = worst_overall;
    rep << "infeasible over entire rate grid; best margin " << worst_overall;
    best.report = rep.str();
    return best;
  }

  best.verify_margin =
      verify_ocm(best.dual, plant, c_r, d_e, best.spec.rho, best.spec.rate,
                 cfg.verify_multiplier * n_samples, cfg.seed + 4242);
  rep << "verification margin (x" << cfg.verify_multiplier
      << " fresh samples): " << best.verify_margin << "\n"
      << "note: sampled-LMI verification on polynomialized dynamics, not a "
         "SoS certificate";
  best.report = rep.str();
  return best;
}

}  // namespace corrt
