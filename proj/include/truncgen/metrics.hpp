#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "truncgen/image.hpp"

namespace truncgen {

/// SSIM windowing: non-overlapping square tiles, uniformly weighted. Edge
/// tiles are truncated rather than dropped so every pixel contributes.
inline constexpr int kSsimWindow = 8;
inline constexpr double kSsimDynamicRange = 1.0;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

struct SimilarityReading {
  double ssim = 1.0;
  double l2 = 0.0;
};

/// Mean structural similarity over kSsimWindow tiles of the luminance plane.
double ssim(const Image& x, const Image& y);

/// Root-mean-square pixel difference over all pixels and channels.
double l2(const Image& x, const Image& y);

SimilarityReading similarity(const Image& reference, const Image& candidate);

class PerceptualEmbedder {
 public:
  virtual ~PerceptualEmbedder() = default;
  virtual Eigen::VectorXd embed(const Image& image) const = 0;
  /// Stable identifier recorded in logs next to stored embeddings.
  virtual std::string id() const = 0;
};

/// Default embedder: a 2x2 average-pooling pyramid of the image, each level
/// scaled by 1/sqrt(level size), concatenated and projected by a fixed
/// Rademacher matrix whose signs come from mix64(derive_seed({seed, row, col})).
class PyramidEmbedder final : public PerceptualEmbedder {
 public:
  explicit PyramidEmbedder(int levels = 3, int output_dim = 64, std::uint64_t seed = 0x5eed);

  Eigen::VectorXd embed(const Image& image) const override;
  std::string id() const override;

  /// Concatenated pyramid features before projection.
  Eigen::VectorXd pyramid_features(const Image& image) const;

 private:
  int levels_;
  int output_dim_;
  std::uint64_t seed_;
};

/// Scales to unit Euclidean norm; a zero vector stays zero.
Eigen::VectorXd unit_normalized(const Eigen::VectorXd& v);

double embedding_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

double perceptual_distance(const Image& x, const Image& y, const PerceptualEmbedder& embedder);

struct Diversity {
  double value = 0.0;
  std::size_t pairs = 0;
  /// false when fewer than two items were supplied (value is then 0).
  bool defined = false;
};

/// Mean embedding_distance over all unordered pairs, summed in (i, j) order.
Diversity mean_pairwise_diversity(const std::vector<Eigen::VectorXd>& embeddings);
Diversity mean_pairwise_diversity(const std::vector<Image>& images, const PerceptualEmbedder& embedder);

}  // namespace truncgen
