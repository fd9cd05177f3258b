#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "corrt/geometry.hpp"

namespace corrt {

/// Boolean row-selector C_r picking the directly invertible state indices.
struct ReducedSelector {
  Eigen::MatrixXd c_r;
  std::vector<int> indices;

  ReducedSelector(int n_x, std::vector<int> idx);
  int n_r() const { return static_cast<int>(indices.size()); }
  int n_x() const { return static_cast<int>(c_r.cols()); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return c_r * x; }
};

/// Raster observation generator standing in for rendered camera images; the
/// marker fades outside the window, so inversion error grows off the data
/// domain.
///
/// Single-plane mode: a w x h image of soft box obstacles placed by theta,
/// drawn over a Gaussian robot marker with a heading tick; obstacles can
/// occlude the marker.
///
/// Multi-plane mode (RGB-D-like): four w x h planes — marker splat,
/// splat * (1+cos heading)/2, splat * (1+sin heading)/2, and the obstacle
/// occupancy. Occlusion, when enabled, dims the marker planes.
struct RasterConfig {
  int width = 32;
  int height = 32;
  double window_x_lo = 0.0, window_x_hi = 1.0;
  double window_y_lo = 0.0, window_y_hi = 1.0;
  double marker_sigma = 0.3;
  double tick_offset = 0.6;   // distance of the heading tick from the marker
  double tick_sigma = 0.18;
  double edge_softness = 0.08;  // obstacle boundary smoothing, world units
  bool marker_on_top = false;   // draw the marker over obstacles (no occlusion)
  bool multi_plane = false;
  double obstacle_intensity = 1.0;
  int pos_x_index = 0;          // indices into the reduced state
  int pos_y_index = 1;
  int heading_index = 2;  // -1: no heading tick / heading planes

  struct ObstacleTemplate {
    double lo_x, lo_y, hi_x, hi_y;  // base box
    int theta_index = -1;           // component of theta shifting the box
    int shift_axis = 1;             // 0: x, 1: y
    double shift_scale = 1.0;
  };
  std::vector<ObstacleTemplate> obstacles;
};

/// Smooth random embedding y = tanh(G [yr; theta] + b) with a seeded,
/// well-conditioned G (orthonormal rows scaled by `gain`). With
/// `nonlinearity=false` the map is affine and exactly invertible.
struct EmbedConfig {
  int n_y = 64;
  double gain = 1.0;
  bool nonlinearity = true;
  uint64_t seed = 12345;
};

class ObservationMap {
 public:
  enum class Kind { kRaster, kEmbed };

  static ObservationMap raster(RasterConfig cfg, int n_r, int n_p);
  static ObservationMap embed(EmbedConfig cfg, int n_r, int n_p);

  Kind kind() const { return kind_; }
  int n_y() const { return n_y_; }
  int n_r() const { return n_r_; }
  int n_p() const { return n_p_; }

  // Noiseless h(yr, theta).
  Eigen::VectorXd render(const Eigen::VectorXd& yr,
                         const Eigen::VectorXd& theta) const;

  // h + B_y w_y with the diagonal 0/1 noise mask.
  Eigen::VectorXd observe(const Eigen::VectorXd& yr,
                          const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& w_y) const;

  void set_noise_mask(Eigen::VectorXd mask);
  const Eigen::VectorXd& noise_mask() const { return noise_mask_; }
  double noise_mask_max_singular() const;  // sigma_bar(B_y)

 private:
  ObservationMap() = default;
  Kind kind_ = Kind::kEmbed;
  int n_y_ = 0, n_r_ = 0, n_p_ = 0;
  RasterConfig raster_;
  Eigen::MatrixXd embed_g_;
  Eigen::VectorXd embed_b_;
  bool embed_nonlinear_ = true;
  Eigen::VectorXd noise_mask_;
};

/// Noiseless observation-state-parameter triplets sampled uniformly from
/// the given boxes; per-point inversion errors are filled in after fitting.
struct Dataset {
  Eigen::MatrixXd y;       // N x n_y
  Eigen::MatrixXd yr;      // N x n_r
  Eigen::MatrixXd theta;   // N x n_p
  Eigen::VectorXd errors;  // N, e_i after fit (zero-initialized)
  uint64_t seed = 0;
  AxisBox yr_box = AxisBox::unbounded(0);
  AxisBox theta_box = AxisBox::unbounded(0);

  int size() const { return static_cast<int>(yr.rows()); }
  // Concatenated (yr_i, theta_i) row.
  Eigen::VectorXd point(int i) const;
};

Dataset generate_dataset(const ObservationMap& map, const AxisBox& yr_box,
                         const AxisBox& theta_box, int n, uint64_t seed);

void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

/// Ridge regression over random Fourier features of [y; theta], with a
/// linear + bias tail so exactly invertible affine maps fit exactly.
struct RffConfig {
  int features = 512;
  double ridge = 1e-6;
  double lengthscale = 1.0;  // relative to the median pairwise distance
  uint64_t seed = 99;
};

class PerceptionModel {
 public:
  PerceptionModel() = default;

  Eigen::VectorXd eval(const Eigen::VectorXd& y,
                       const Eigen::VectorXd& theta) const;
  Eigen::VectorXd features(const Eigen::VectorXd& z) const;

  int n_r() const { return static_cast<int>(weights_.cols()); }
  double train_mse() const { return train_mse_; }
  const RffConfig& config() const { return cfg_; }

  friend PerceptionModel fit_inverse(const Dataset& ds, const RffConfig& cfg);
  friend void save_model(const std::string& path, const PerceptionModel& m);
  friend PerceptionModel load_model(const std::string& path);

 private:
  RffConfig cfg_;
  Eigen::MatrixXd omega_;      // D x n_z
  Eigen::VectorXd phase_;      // D
  Eigen::VectorXd in_center_;  // n_z standardization
  Eigen::VectorXd in_scale_;
  Eigen::MatrixXd weights_;  // (D + n_z + 1) x n_r
  double train_mse_ = 0.0;
};

// Closed-form ridge fit; also fills ds.errors in a const_cast-free way by
// returning them through the dataset the caller owns.
PerceptionModel fit_inverse(const Dataset& ds, const RffConfig& cfg);
void fill_errors(Dataset& ds, const PerceptionModel& model);

void save_model(const std::string& path, const PerceptionModel& m);
PerceptionModel load_model(const std::string& path);

// epsilon(yr, theta) = || model(h(yr,theta), theta) - yr ||, noiseless.
double perception_error(const PerceptionModel& model, const ObservationMap& map,
                        const Eigen::VectorXd& yr, const Eigen::VectorXd& theta);

}  // namespace corrt
