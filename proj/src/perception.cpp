#include "corrt/perception.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace corrt {

using nlohmann::json;

ReducedSelector::ReducedSelector(int n_x, std::vector<int> idx)
    : indices(std::move(idx)) {
  c_r = Eigen::MatrixXd::Zero(static_cast<int>(indices.size()), n_x);
  for (size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] < 0 || indices[r] >= n_x) {
      throw std::invalid_argument("ReducedSelector: index out of range");
    }
    c_r(static_cast<int>(r), indices[r]) = 1.0;
  }
}

namespace {

double soft_step(double t, double softness) {
  return 1.0 / (1.0 + std::exp(-t / softness));
}

Eigen::MatrixXd seeded_orthonormal_rows(int rows, int cols, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) g(i, j) = gauss(rng);
  if (rows >= cols) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
    return q;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g.transpose());
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(cols, rows);
  return q.transpose();
}

}  // namespace

ObservationMap ObservationMap::raster(RasterConfig cfg, int n_r, int n_p) {
  if (cfg.pos_x_index >= n_r || cfg.pos_y_index >= n_r ||
      cfg.heading_index >= n_r) {
    throw std::invalid_argument("raster: marker indices out of range");
  }
  ObservationMap m;
  m.kind_ = Kind::kRaster;
  m.raster_ = std::move(cfg);
  const int planes = m.raster_.multi_plane ? 4 : 1;
  m.n_y_ = planes * m.raster_.width * m.raster_.height;
  m.n_r_ = n_r;
  m.n_p_ = n_p;
  m.noise_mask_ = Eigen::VectorXd::Ones(m.n_y_);
  return m;
}

ObservationMap ObservationMap::embed(EmbedConfig cfg, int n_r, int n_p) {
  ObservationMap m;
  m.kind_ = Kind::kEmbed;
  m.n_y_ = cfg.n_y;
  m.n_r_ = n_r;
  m.n_p_ = n_p;
  const int n_z = n_r + n_p;
  m.embed_g_ = cfg.gain * seeded_orthonormal_rows(cfg.n_y, n_z, cfg.seed);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  m.embed_b_ = Eigen::VectorXd::Zero(cfg.n_y);
  for (int i = 0; i < cfg.n_y; ++i) m.embed_b_[i] = u(rng);
  m.embed_nonlinear_ = cfg.nonlinearity;
  m.noise_mask_ = Eigen::VectorXd::Ones(cfg.n_y);
  return m;
}

Eigen::VectorXd ObservationMap::render(const Eigen::VectorXd& yr,
                                       const Eigen::VectorXd& theta) const {
  if (yr.size() != n_r_ || theta.size() != n_p_) {
    throw std::invalid_argument("ObservationMap::render: dim mismatch");
  }
  if (kind_ == Kind::kEmbed) {
    Eigen::VectorXd z(n_r_ + n_p_);
    z << yr, theta;
    Eigen::VectorXd out = embed_g_ * z + embed_b_;
    if (embed_nonlinear_) out = out.array().tanh();
    return out;
  }

  const RasterConfig& rc = raster_;
  Eigen::VectorXd img = Eigen::VectorXd::Zero(n_y_);
  const double px = yr[rc.pos_x_index];
  const double py = yr[rc.pos_y_index];
  const double heading = rc.heading_index >= 0 ? yr[rc.heading_index] : 0.0;
  const double tx = px + rc.tick_offset * std::cos(heading);
  const double ty = py + rc.tick_offset * std::sin(heading);
  const double inv2s2 = 1.0 / (2.0 * rc.marker_sigma * rc.marker_sigma);
  const double inv2t2 = 1.0 / (2.0 * rc.tick_sigma * rc.tick_sigma);
  const int plane = rc.width * rc.height;

  for (int iy = 0; iy < rc.height; ++iy) {
    const double wy = rc.window_y_lo + (rc.window_y_hi - rc.window_y_lo) *
                                           (iy + 0.5) / rc.height;
    for (int ix = 0; ix < rc.width; ++ix) {
      const double wx = rc.window_x_lo + (rc.window_x_hi - rc.window_x_lo) *
                                             (ix + 0.5) / rc.width;
      const int px_id = iy * rc.width + ix;
      const double splat =
          std::exp(-((wx - px) * (wx - px) + (wy - py) * (wy - py)) * inv2s2);
      double occ = 0.0;
      for (const auto& ob : rc.obstacles) {
        double lox = ob.lo_x, hix = ob.hi_x, loy = ob.lo_y, hiy = ob.hi_y;
        if (ob.theta_index >= 0) {
          const double shift = ob.shift_scale * theta[ob.theta_index];
          if (ob.shift_axis == 0) {
            lox += shift;
            hix += shift;
          } else {
            loy += shift;
            hiy += shift;
          }
        }
        const double inside = rc.obstacle_intensity *
                              soft_step(wx - lox, rc.edge_softness) *
                              soft_step(hix - wx, rc.edge_softness) *
                              soft_step(wy - loy, rc.edge_softness) *
                              soft_step(hiy - wy, rc.edge_softness);
        occ = std::max(occ, inside);
      }

      if (rc.multi_plane) {
        const double visible = rc.marker_on_top ? 1.0 : (1.0 - occ);
        const double base = visible * splat;
        img[px_id] = base;
        if (rc.heading_index >= 0) {
          img[plane + px_id] = base * 0.5 * (1.0 + std::cos(heading));
          img[2 * plane + px_id] = base * 0.5 * (1.0 + std::sin(heading));
        }
        img[3 * plane + px_id] = occ;
        continue;
      }

      double marker = splat;
      if (rc.heading_index >= 0) {
        marker += 0.8 * std::exp(-((wx - tx) * (wx - tx) +
                                   (wy - ty) * (wy - ty)) *
                                 inv2t2);
      }
      const double mk = std::min(1.0, marker);
      // Draw order decides occlusion: obstacles hide the marker unless the
      // marker is configured on top.
      img[px_id] =
          rc.marker_on_top ? mk + (1.0 - mk) * occ : occ + (1.0 - occ) * mk;
    }
  }
  return img;
}

Eigen::VectorXd ObservationMap::observe(const Eigen::VectorXd& yr,
                                        const Eigen::VectorXd& theta,
                                        const Eigen::VectorXd& w_y) const {
  Eigen::VectorXd y = render(yr, theta);
  if (w_y.size() > 0) {
    if (w_y.size() != n_y_) {
      throw std::invalid_argument("ObservationMap::observe: noise dim mismatch");
    }
    y += noise_mask_.cwiseProduct(w_y);
  }
  return y;
}

void ObservationMap::set_noise_mask(Eigen::VectorXd mask) {
  if (mask.size() != n_y_) {
    throw std::invalid_argument("set_noise_mask: dim mismatch");
  }
  for (int i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0.0 && mask[i] != 1.0) {
      throw std::invalid_argument("set_noise_mask: mask must be 0/1");
    }
  }
  noise_mask_ = std::move(mask);
}

double ObservationMap::noise_mask_max_singular() const {
  return noise_mask_.size() == 0 ? 0.0 : noise_mask_.maxCoeff();
}

Eigen::VectorXd Dataset::point(int i) const {
  Eigen::VectorXd p(yr.cols() + theta.cols());
  p << yr.row(i).transpose(), theta.row(i).transpose();
  return p;
}

Dataset generate_dataset(const ObservationMap& map, const AxisBox& yr_box,
                         const AxisBox& theta_box, int n, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_dataset: N >= 1 required");
  if (!yr_box.all_finite() || !theta_box.all_finite()) {
    throw std::invalid_argument("generate_dataset: boxes must be bounded");
  }
  for (int i = 0; i < yr_box.dim(); ++i) {
    if (yr_box.widths()[i] <= 0.0) {
      throw std::invalid_argument("generate_dataset: empty box");
    }
  }
  Dataset ds;
  ds.seed = seed;
  ds.yr_box = yr_box;
  ds.theta_box = theta_box;
  ds.yr.resize(n, yr_box.dim());
  ds.theta.resize(n, theta_box.dim());
  ds.y.resize(n, map.n_y());
  ds.errors = Eigen::VectorXd::Zero(n);
  std::mt19937_64 rng(seed);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd yr = yr_box.sample(rng);
    const Eigen::VectorXd th = theta_box.sample(rng);
    ds.yr.row(i) = yr.transpose();
    ds.theta.row(i) = th.transpose();
    ds.y.row(i) = map.render(yr, th).transpose();
  }
  return ds;
}

namespace {

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  }
}

Eigen::MatrixXd read_matrix(std::ifstream& in, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      double v;
      in.read(reinterpret_cast<char*>(&v), sizeof(double));
      m(i, j) = v;
    }
  }
  if (!in) throw std::runtime_error("read_matrix: truncated file");
  return m;
}

json box_to_json(const AxisBox& b) {
  json j;
  j["lo"] = std::vector<double>(b.lo().data(), b.lo().data() + b.dim());
  j["hi"] = std::vector<double>(b.hi().data(), b.hi().data() + b.dim());
  return j;
}

AxisBox box_from_json(const json& j) {
  const auto lo = j.at("lo").get<std::vector<double>>();
  const auto hi = j.at("hi").get<std::vector<double>>();
  return AxisBox(Eigen::Map<const Eigen::VectorXd>(lo.data(), lo.size()),
                 Eigen::Map<const Eigen::VectorXd>(hi.data(), hi.size()));
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& ds) {
  json header;
  header["schema"] = 1;
  header["n"] = ds.size();
  header["n_r"] = ds.yr.cols();
  header["n_p"] = ds.theta.cols();
  header["n_y"] = ds.y.cols();
  header["seed"] = ds.seed;
  header["yr_box"] = box_to_json(ds.yr_box);
  header["theta_box"] = box_to_json(ds.theta_box);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  const std::string h = header.dump();
  const uint64_t hlen = h.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  write_matrix(out, ds.yr);
  write_matrix(out, ds.theta);
  write_matrix(out, ds.y);
  write_matrix(out, ds.errors);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string h(hlen, '\0');
  in.read(h.data(), static_cast<std::streamsize>(hlen));
  const json header = json::parse(h);
  if (header.at("schema").get<int>() != 1) {
    throw std::runtime_error("load_dataset: unsupported schema");
  }
  const int n = header.at("n").get<int>();
  const int n_r = header.at("n_r").get<int>();
  const int n_p = header.at("n_p").get<int>();
  const int n_y = header.at("n_y").get<int>();
  Dataset ds;
  ds.seed = header.at("seed").get<uint64_t>();
  ds.yr_box = box_from_json(header.at("yr_box"));
  ds.theta_box = box_from_json(header.at("theta_box"));
  ds.yr = read_matrix(in, n, n_r);
  ds.theta = read_matrix(in, n, n_p);
  ds.y = read_matrix(in, n, n_y);
  ds.errors = read_matrix(in, n, 1);
  return ds;
}

Eigen::VectorXd PerceptionModel::features(const Eigen::VectorXd& z) const {
  const Eigen::VectorXd zs =
      (z - in_center_).cwiseQuotient(in_scale_);
  const int d = static_cast<int>(omega_.rows());
  Eigen::VectorXd phi(d + zs.size() + 1);
  phi.head(d) =
      (std::sqrt(2.0 / d) * ((omega_ * zs + phase_).array().cos())).matrix();
  phi.segment(d, zs.size()) = zs;
  phi[d + zs.size()] = 1.0;
  return phi;
}

Eigen::VectorXd PerceptionModel::eval(const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& theta) const {
  Eigen::VectorXd z(y.size() + theta.size());
  z << y, theta;
  return weights_.transpose() * features(z);
}

PerceptionModel fit_inverse(const Dataset& ds, const RffConfig& cfg) {
  if (ds.size() < 1) throw std::invalid_argument("fit_inverse: empty dataset");
  const int n = ds.size();
  const int n_z = static_cast<int>(ds.y.cols() + ds.theta.cols());
  const int d = cfg.features;

  PerceptionModel m;
  m.cfg_ = cfg;
  m.cfg_.ridge = std::max(cfg.ridge, 1e-8);

  Eigen::MatrixXd z(n, n_z);
  z << ds.y, ds.theta;
  m.in_center_ = z.colwise().mean();
  Eigen::VectorXd var =
      (z.rowwise() - m.in_center_.transpose()).array().square().colwise().mean();
  Eigen::VectorXd std = var.array().sqrt();
  // Floor the per-channel scale: channels nearly constant in training must
  // not amplify runtime noise through the standardization.
  const double floor = std::max(1e-6, 0.25 * std.mean());
  m.in_scale_ = std.cwiseMax(floor);

  Eigen::MatrixXd zs = (z.rowwise() - m.in_center_.transpose());
  zs.array().rowwise() /= m.in_scale_.transpose().array();

  // Bandwidth from the median pairwise distance of a standardized subsample.
  std::mt19937_64 rng(cfg.seed);
  const int probe = std::min(n, 256);
  std::vector<double> dists;
  dists.reserve(probe * 4);
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int k = 0; k < probe * 4; ++k) {
    const int i = pick(rng), j = pick(rng);
    if (i == j) continue;
    dists.push_back((zs.row(i) - zs.row(j)).norm());
  }
  std::sort(dists.begin(), dists.end());
  const double med = dists.empty() ? 1.0 : dists[dists.size() / 2];
  const double bandwidth = std::max(1e-9, cfg.lengthscale * med);

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uphase(0.0, 2.0 * M_PI);
  m.omega_.resize(d, n_z);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < n_z; ++j) m.omega_(i, j) = gauss(rng) / bandwidth;
  m.phase_.resize(d);
  for (int i = 0; i < d; ++i) m.phase_[i] = uphase(rng);

  // Normal equations accumulated blockwise: [cos block | standardized
  // inputs | 1] features without materializing the full feature matrix.
  const int dim = d + n_z + 1;
  Eigen::MatrixXd gram = static_cast<double>(n) * m.cfg_.ridge *
                         Eigen::MatrixXd::Identity(dim, dim);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(dim, ds.yr.cols());
  const int block = 2048;
  for (int start = 0; start < n; start += block) {
    const int rows = std::min(block, n - start);
    Eigen::MatrixXd phi(rows, dim);
    phi.block(0, 0, rows, d) =
        (std::sqrt(2.0 / d) *
         ((zs.middleRows(start, rows) * m.omega_.transpose()).rowwise() +
          m.phase_.transpose())
             .array()
             .cos())
            .matrix();
    phi.block(0, d, rows, n_z) = zs.middleRows(start, rows);
    phi.col(dim - 1).setOnes();
    gram.noalias() += phi.transpose() * phi;
    rhs.noalias() += phi.transpose() * ds.yr.middleRows(start, rows);
  }
  m.weights_ = Eigen::LDLT<Eigen::MatrixXd>(gram).solve(rhs);

  double sq = 0.0;
  for (int start = 0; start < n; start += block) {
    const int rows = std::min(block, n - start);
    Eigen::MatrixXd phi(rows, dim);
    phi.block(0, 0, rows, d) =
        (std::sqrt(2.0 / d) *
         ((zs.middleRows(start, rows) * m.omega_.transpose()).rowwise() +
          m.phase_.transpose())
             .array()
             .cos())
            .matrix();
    phi.block(0, d, rows, n_z) = zs.middleRows(start, rows);
    phi.col(dim - 1).setOnes();
    sq += (phi * m.weights_ - ds.yr.middleRows(start, rows)).squaredNorm();
  }
  m.train_mse_ = sq / n;
  return m;
}

void fill_errors(Dataset& ds, const PerceptionModel& model) {
  for (int i = 0; i < ds.size(); ++i) {
    const Eigen::VectorXd pred =
        model.eval(ds.y.row(i).transpose(), ds.theta.row(i).transpose());
    ds.errors[i] = (pred - ds.yr.row(i).transpose()).norm();
  }
}

void save_model(const std::string& path, const PerceptionModel& m) {
  json header;
  header["schema"] = 1;
  header["features"] = m.cfg_.features;
  header["ridge"] = m.cfg_.ridge;
  header["lengthscale"] = m.cfg_.lengthscale;
  header["seed"] = m.cfg_.seed;
  header["n_z"] = m.omega_.cols();
  header["n_r"] = m.weights_.cols();
  header["train_mse"] = m.train_mse_;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);
  const std::string h = header.dump();
  const uint64_t hlen = h.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  write_matrix(out, m.omega_);
  write_matrix(out, m.phase_);
  write_matrix(out, m.in_center_);
  write_matrix(out, m.in_scale_);
  write_matrix(out, m.weights_);
}

PerceptionModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string h(hlen, '\0');
  in.read(h.data(), static_cast<std::streamsize>(hlen));
  const json header = json::parse(h);
  PerceptionModel m;
  m.cfg_.features = header.at("features").get<int>();
  m.cfg_.ridge = header.at("ridge").get<double>();
  m.cfg_.lengthscale = header.at("lengthscale").get<double>();
  m.cfg_.seed = header.at("seed").get<uint64_t>();
  m.train_mse_ = header.at("train_mse").get<double>();
  const int n_z = header.at("n_z").get<int>();
  const int n_r = header.at("n_r").get<int>();
  m.omega_ = read_matrix(in, m.cfg_.features, n_z);
  m.phase_ = read_matrix(in, m.cfg_.features, 1);
  m.in_center_ = read_matrix(in, n_z, 1);
  m.in_scale_ = read_matrix(in, n_z, 1);
  m.weights_ = read_matrix(in, m.cfg_.features + n_z + 1, n_r);
  return m;
}

double perception_error(const PerceptionModel& model, const ObservationMap& map,
                        const Eigen::VectorXd& yr,
                        const Eigen::VectorXd& theta) {
  return (model.eval(map.render(yr, theta), theta) - yr).norm();
}

}  // namespace corrt
