#include "truncgen/toy_world.hpp"

#include <algorithm>
#include <cmath>

#include "truncgen/errors.hpp"
#include "truncgen/hash.hpp"
#include "truncgen/rng.hpp"

namespace truncgen {

ToyWorldSpec ToyWorldSpec::standard() {
  ToyWorldSpec s;
  s.mapper_weight.resize(5, 4);
  // clang-format off
  s.mapper_weight <<
      0.015, 0.0,   0.005,  0.0,
      0.0,   0.015, 0.0,    0.005,
      0.0,   0.0,   0.25,   0.025,
      0.0,   0.0,  -0.025,  0.25,
      0.05,  0.0,   0.0,    0.15;
  // clang-format on
  s.class_offsets = Eigen::MatrixXd::Zero(3, 5);
  s.class_offsets(0, 0) = -0.03;
  s.class_offsets(2, 0) = 0.03;
  s.slope = Eigen::Vector3d(-20.0, 0.0, 20.0);
  s.offset = Eigen::Vector3d(-0.3, 0.0, -0.7);
  return s;
}

double ToyWorldSpec::boundary_x(int j, int k) const {
  const double ds = slope[k] - slope[j];
  if (ds == 0.0) throw InvalidArgument("boundary_x: parallel class scores");
  return 0.5 + (offset[j] - offset[k]) / ds;
}

nlohmann::json ToyWorldSpec::to_json() const {
  auto matrix = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(row);
    }
    return rows;
  };
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {
      {"schema_version", 1},
      {"latent_dim", latent_dim},
      {"style_dim", style_dim},
      {"num_layers", num_layers},
      {"num_classes", num_classes},
      {"image_shape", {image.height, image.width, image.channels}},
      {"mapper", {{"weight", matrix(mapper_weight)}, {"class_offsets", matrix(class_offsets)}}},
      {"synthesis",
       {{"coarse_end", coarse_end},
        {"middle_row", middle_row},
        {"fine_row", fine_row},
        {"base_sigma", base_sigma},
        {"min_sigma", min_sigma},
        {"max_sigma", max_sigma},
        {"base_amplitude", base_amplitude},
        {"min_amplitude", min_amplitude},
        {"max_amplitude", max_amplitude},
        {"noise_strength", noise_strength},
        {"noise_seed", noise_seed}}},
      {"classifier", {{"pool", pool}, {"slope", vec(slope)}, {"offset", vec(offset)}}},
  };
}

ToyGenerator::ToyGenerator(ToyWorldSpec spec) : spec_(std::move(spec)) {
  if (spec_.mapper_weight.rows() != spec_.style_dim || spec_.mapper_weight.cols() != spec_.latent_dim)
    throw InvalidArgument("toy mapper weight shape mismatch");
  if (spec_.class_offsets.rows() != spec_.num_classes || spec_.class_offsets.cols() != spec_.style_dim)
    throw InvalidArgument("toy class offsets shape mismatch");
  if (spec_.style_dim < 5 || spec_.fine_row >= spec_.num_layers || spec_.middle_row >= spec_.num_layers ||
      spec_.coarse_end < 1 || spec_.coarse_end > spec_.num_layers)
    throw InvalidArgument("toy synthesis band layout invalid");
  noise_ = Eigen::ArrayXd::Zero(spec_.image.size());
  if (spec_.noise_strength != 0.0) {
    NormalStream normal(spec_.noise_seed);
    for (Eigen::Index i = 0; i < noise_.size(); ++i) noise_[i] = spec_.noise_strength * normal();
  }
}

StyleVector ToyGenerator::map_w(const Eigen::VectorXd& z, int class_label) const {
  check_latent(z, class_label);
  return spec_.mapper_weight * z + spec_.class_offsets.row(class_label).transpose();
}

BlobParams ToyGenerator::blob_params(const StyleCode& w) const {
  check_style(w);
  const auto coarse = w.topRows(spec_.coarse_end).colwise().mean();
  BlobParams p{};
  p.cx = 0.5 + coarse(0);
  p.cy = 0.5 + coarse(1);
  p.sx = std::clamp(spec_.base_sigma * (1.0 + w(spec_.middle_row, 2)), spec_.min_sigma, spec_.max_sigma);
  p.sy = std::clamp(spec_.base_sigma * (1.0 + w(spec_.middle_row, 3)), spec_.min_sigma, spec_.max_sigma);
  p.amplitude = std::clamp(spec_.base_amplitude + w(spec_.fine_row, 4), spec_.min_amplitude, spec_.max_amplitude);
  return p;
}

Image ToyGenerator::synthesize(const StyleCode& w) const {
  const BlobParams p = blob_params(w);
  Image img(spec_.image);
  const int h = spec_.image.height;
  const int wd = spec_.image.width;
  for (int y = 0; y < h; ++y) {
    const double py = (y + 0.5) / h;
    const double gy = (py - p.cy) * (py - p.cy) / (2.0 * p.sy * p.sy);
    for (int x = 0; x < wd; ++x) {
      const double px = (x + 0.5) / wd;
      const double gx = (px - p.cx) * (px - p.cx) / (2.0 * p.sx * p.sx);
      const double v = p.amplitude * std::exp(-(gx + gy));
      for (int c = 0; c < spec_.image.channels; ++c) img.at(y, x, c) = v;
    }
  }
  img.pixels += noise_;
  img.clamp();
  return img;
}

std::string ToyGenerator::fingerprint() const { return sha256_hex(spec_.to_json().dump()); }

ToyClassifier::ToyClassifier(ToyWorldSpec spec) : spec_(std::move(spec)) {
  if (spec_.slope.size() != spec_.num_classes || spec_.offset.size() != spec_.num_classes)
    throw InvalidArgument("toy classifier weights do not match class count");
  if (spec_.image.height % spec_.pool != 0 || spec_.image.width % spec_.pool != 0)
    throw InvalidArgument("toy classifier pool must divide the image size");
  const int ph = spec_.image.height / spec_.pool;
  const int pw = spec_.image.width / spec_.pool;
  weights_.resize(spec_.num_classes, ph * pw);
  for (int k = 0; k < spec_.num_classes; ++k)
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < pw; ++x) {
        const double px = (x + 0.5) / pw;
        weights_(k, y * pw + x) = spec_.slope[k] * (px - 0.5) + spec_.offset[k];
      }
}

Eigen::VectorXd ToyClassifier::logits(const Image& image) const {
  check_image(image);
  const int ph = spec_.image.height / spec_.pool;
  const int pw = spec_.image.width / spec_.pool;
  const Eigen::ArrayXXd lum = luminance(image);
  Eigen::VectorXd pooled(ph * pw);
  for (int y = 0; y < ph; ++y)
    for (int x = 0; x < pw; ++x) pooled[y * pw + x] = lum.block(y * spec_.pool, x * spec_.pool, spec_.pool, spec_.pool).mean();
  return weights_ * pooled;
}

Prediction ToyClassifier::classify(const Image& image) const { return make_prediction(softmax(logits(image))); }

std::string ToyClassifier::fingerprint() const { return sha256_hex(spec_.to_json().dump()); }

}  // namespace truncgen
