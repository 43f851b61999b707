#pragma once

// Deterministic stand-in for a class-conditional style-based generator and
// an image classifier, small enough to reason about in closed form.
//
// Generator: w = A z + b_c (broadcast to all layers). Synthesis draws one
// Gaussian blob whose parameters are read from layer bands:
//   coarse rows [0, 2): centre   cx = 0.5 + mean(row[0]), cy = 0.5 + mean(row[1])
//   middle row  2     : spreads  sx = clamp(s0 (1 + row[2])), sy = clamp(s0 (1 + row[3]))
//   fine row    3     : peak     a  = clamp(a0 + row[4])
// Classifier: 2x2 average pooling, then logits_k = sum_p (alpha_k (x_p - 0.5)
// + gamma_k) d(p). Because the weights are affine in x, the decision depends
// only on the blob's horizontal centre of mass, so class boundaries are
// vertical lines at x = 0.5 + (gamma_j - gamma_k) / (alpha_k - alpha_j).

#include <cstdint>
#include <string>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "truncgen/backend.hpp"

namespace truncgen {

struct ToyWorldSpec {
  int latent_dim = 4;
  int style_dim = 5;
  int num_layers = 4;
  int num_classes = 3;
  ImageShape image{32, 32, 1};

  Eigen::MatrixXd mapper_weight;  // style_dim x latent_dim
  Eigen::MatrixXd class_offsets;  // num_classes x style_dim

  int coarse_end = 2;  // rows [0, coarse_end) drive the centre
  int middle_row = 2;  // drives the spreads
  int fine_row = 3;    // drives the peak intensity
  double base_sigma = 0.10;
  double min_sigma = 0.04;
  double max_sigma = 0.20;
  double base_amplitude = 0.75;
  double min_amplitude = 0.05;
  double max_amplitude = 1.0;

  int pool = 2;
  Eigen::VectorXd slope;   // alpha_k
  Eigen::VectorXd offset;  // gamma_k

  /// Frozen additive synthesis noise (0 disables it).
  double noise_strength = 0.0;
  std::uint64_t noise_seed = 0;

  static ToyWorldSpec standard();

  /// Horizontal boundary between classes j and k (where their logits tie).
  double boundary_x(int j, int k) const;

  nlohmann::json to_json() const;
};

struct BlobParams {
  double cx, cy, sx, sy, amplitude;
};

class ToyGenerator final : public GeneratorBackend {
 public:
  explicit ToyGenerator(ToyWorldSpec spec = ToyWorldSpec::standard());

  int latent_dim() const override { return spec_.latent_dim; }
  int style_dim() const override { return spec_.style_dim; }
  int num_layers() const override { return spec_.num_layers; }
  int num_classes() const override { return spec_.num_classes; }
  ImageShape image_shape() const override { return spec_.image; }

  StyleVector map_w(const Eigen::VectorXd& z, int class_label) const override;
  Image synthesize(const StyleCode& w) const override;
  std::string fingerprint() const override;

  BlobParams blob_params(const StyleCode& w) const;
  const ToyWorldSpec& spec() const { return spec_; }

 private:
  ToyWorldSpec spec_;
  Eigen::ArrayXd noise_;
};

class ToyClassifier final : public ClassifierBackend {
 public:
  explicit ToyClassifier(ToyWorldSpec spec = ToyWorldSpec::standard());

  int num_classes() const override { return spec_.num_classes; }
  ImageShape input_shape() const override { return spec_.image; }
  Prediction classify(const Image& image) const override;
  std::string fingerprint() const override;

  Eigen::VectorXd logits(const Image& image) const;

 private:
  ToyWorldSpec spec_;
  Eigen::MatrixXd weights_;  // num_classes x pooled pixels
};

}  // namespace truncgen
