#include "truncgen/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "truncgen/errors.hpp"
#include "truncgen/rng.hpp"

namespace truncgen {

namespace {

void require_same_shape(const Image& x, const Image& y, const char* what) {
  if (!(x.shape == y.shape))
    throw InvalidArgument(std::string(what) + ": shape mismatch " + to_string(x.shape) + " vs " + to_string(y.shape));
}

double window_ssim(const Eigen::ArrayXXd& a, const Eigen::ArrayXXd& b) {
  constexpr double c1 = (kSsimK1 * kSsimDynamicRange) * (kSsimK1 * kSsimDynamicRange);
  constexpr double c2 = (kSsimK2 * kSsimDynamicRange) * (kSsimK2 * kSsimDynamicRange);
  const double n = static_cast<double>(a.size());
  const double mu_a = a.sum() / n;
  const double mu_b = b.sum() / n;
  const Eigen::ArrayXXd da = a - mu_a;
  const Eigen::ArrayXXd db = b - mu_b;
  const double var_a = (da * da).sum() / n;
  const double var_b = (db * db).sum() / n;
  const double cov = (da * db).sum() / n;
  return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

Eigen::ArrayXXd pool2(const Eigen::ArrayXXd& in) {
  const Eigen::Index h = std::max<Eigen::Index>(in.rows() / 2, 1);
  const Eigen::Index w = std::max<Eigen::Index>(in.cols() / 2, 1);
  if (in.rows() < 2 || in.cols() < 2) return in;
  Eigen::ArrayXXd out(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) out(y, x) = in.block(2 * y, 2 * x, 2, 2).mean();
  return out;
}

}  // namespace

double ssim(const Image& x, const Image& y) {
  require_same_shape(x, y, "ssim");
  const Eigen::ArrayXXd lx = luminance(x);
  const Eigen::ArrayXXd ly = luminance(y);
  const Eigen::Index rows = lx.rows();
  const Eigen::Index cols = lx.cols();
  double sum = 0.0;
  int windows = 0;
  for (Eigen::Index r = 0; r < rows; r += kSsimWindow) {
    for (Eigen::Index c = 0; c < cols; c += kSsimWindow) {
      const Eigen::Index h = std::min<Eigen::Index>(kSsimWindow, rows - r);
      const Eigen::Index w = std::min<Eigen::Index>(kSsimWindow, cols - c);
      sum += window_ssim(lx.block(r, c, h, w), ly.block(r, c, h, w));
      ++windows;
    }
  }
  return windows == 0 ? 1.0 : sum / windows;
}

double l2(const Image& x, const Image& y) {
  require_same_shape(x, y, "l2");
  if (x.pixels.size() == 0) return 0.0;
  return std::sqrt((x.pixels - y.pixels).square().mean());
}

SimilarityReading similarity(const Image& reference, const Image& candidate) {
  return SimilarityReading{ssim(reference, candidate), l2(reference, candidate)};
}

PyramidEmbedder::PyramidEmbedder(int levels, int output_dim, std::uint64_t seed)
    : levels_(levels), output_dim_(output_dim), seed_(seed) {
  if (levels_ < 1 || output_dim_ < 1) throw InvalidArgument("PyramidEmbedder: levels and output_dim must be >= 1");
}

std::string PyramidEmbedder::id() const {
  return "pyramid-rademacher/levels=" + std::to_string(levels_) + "/dim=" + std::to_string(output_dim_) +
         "/seed=" + std::to_string(seed_);
}

Eigen::VectorXd PyramidEmbedder::pyramid_features(const Image& image) const {
  std::vector<double> features;
  for (int c = 0; c < image.shape.channels; ++c) {
    Eigen::ArrayXXd plane(image.shape.height, image.shape.width);
    for (int y = 0; y < image.shape.height; ++y)
      for (int x = 0; x < image.shape.width; ++x) plane(y, x) = image.at(y, x, c);
    for (int level = 0; level < levels_; ++level) {
      if (level > 0) plane = pool2(plane);
      const double scale = 1.0 / std::sqrt(static_cast<double>(plane.size()));
      for (Eigen::Index y = 0; y < plane.rows(); ++y)
        for (Eigen::Index x = 0; x < plane.cols(); ++x) features.push_back(plane(y, x) * scale);
    }
  }
  return Eigen::Map<Eigen::VectorXd>(features.data(), static_cast<Eigen::Index>(features.size()));
}

Eigen::VectorXd PyramidEmbedder::embed(const Image& image) const {
  const Eigen::VectorXd features = pyramid_features(image);
  const double scale = 1.0 / std::sqrt(static_cast<double>(output_dim_));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(output_dim_);
  for (int i = 0; i < output_dim_; ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < features.size(); ++j) {
      const bool negative = (mix64(derive_seed({seed_, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)})) >> 63) != 0;
      acc += negative ? -features[j] : features[j];
    }
    out[i] = acc * scale;
  }
  return out;
}

Eigen::VectorXd unit_normalized(const Eigen::VectorXd& v) {
  const double n = v.norm();
  return n > 0.0 ? Eigen::VectorXd(v / n) : Eigen::VectorXd(v);
}

double embedding_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw InvalidArgument("embedding_distance: length mismatch");
  return (unit_normalized(a) - unit_normalized(b)).norm();
}

double perceptual_distance(const Image& x, const Image& y, const PerceptualEmbedder& embedder) {
  return embedding_distance(embedder.embed(x), embedder.embed(y));
}

Diversity mean_pairwise_diversity(const std::vector<Eigen::VectorXd>& embeddings) {
  Diversity d;
  if (embeddings.size() < 2) return d;
  double sum = 0.0;
  for (std::size_t i = 0; i < embeddings.size(); ++i)
    for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
      sum += embedding_distance(embeddings[i], embeddings[j]);
      ++d.pairs;
    }
  d.value = sum / static_cast<double>(d.pairs);
  d.defined = true;
  return d;
}

Diversity mean_pairwise_diversity(const std::vector<Image>& images, const PerceptualEmbedder& embedder) {
  std::vector<Eigen::VectorXd> embeddings;
  embeddings.reserve(images.size());
  for (const auto& img : images) embeddings.push_back(embedder.embed(img));
  return mean_pairwise_diversity(embeddings);
}

}  // namespace truncgen
