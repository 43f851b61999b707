#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "truncgen/image.hpp"
#include "truncgen/latent.hpp"

namespace truncgen {

/// Classifier output with the derived top-1/top-2 summary. Ties resolve to
/// the lowest class index.
struct Prediction {
  Eigen::VectorXd probs;
  int top_class = 0;
  double top_conf = 0.0;
  double margin = 0.0;
  bool tied = false;  // another class shares top_conf exactly
};

Prediction make_prediction(const Eigen::VectorXd& probs);
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;

  virtual int latent_dim() const = 0;
  virtual int style_dim() const = 0;
  virtual int num_layers() const = 0;
  virtual int num_classes() const = 0;
  virtual ImageShape image_shape() const = 0;

  /// Class-conditional mapping into W (one vector, broadcast over layers).
  virtual StyleVector map_w(const Eigen::VectorXd& z, int class_label) const = 0;
  /// Synthesis from a per-layer style code; output clamped into [0, 1].
  virtual Image synthesize(const StyleCode& w) const = 0;
  /// Content hash of the constants or model files backing this generator.
  virtual std::string fingerprint() const = 0;

  StyleCode map(const LatentSeed& seed) const;

 protected:
  void check_latent(const Eigen::VectorXd& z, int class_label) const;
  void check_style(const StyleCode& w) const;
};

class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;
  virtual int num_classes() const = 0;
  virtual ImageShape input_shape() const = 0;
  virtual Prediction classify(const Image& image) const = 0;
  virtual std::string fingerprint() const = 0;

 protected:
  void check_image(const Image& image) const;
};

struct RenderResult {
  Image image;
  StyleCode style;
};

/// Per-class mean styles estimated by Monte-Carlo over the mapper.
std::vector<MeanStyle> estimate_class_mean_styles(const GeneratorBackend& generator, std::int64_t num_samples,
                                                  std::uint64_t rng_seed);

/// Renders latent seeds at a truncation level against class-conditional mean
/// styles. Results are cached per (seed, class, psi, cutoff); the cache is
/// safe for concurrent use.
class Renderer {
 public:
  Renderer(const GeneratorBackend& generator, std::vector<MeanStyle> class_means);

  const GeneratorBackend& generator() const { return generator_; }
  const MeanStyle& mean_style(int class_label) const;
  const std::vector<MeanStyle>& mean_styles() const { return means_; }

  /// map(z) for `style_class`, truncated toward that class's mean style.
  StyleCode truncated_style(const LatentSeed& seed, int style_class, double psi, int cutoff) const;

  /// synthesize(truncate(map(z), w_bar[class], psi, cutoff)) together with the style code.
  RenderResult render(const LatentSeed& seed, double psi, int cutoff) const;

  std::size_t cache_size() const;
  std::size_t render_calls() const;

 private:
  using Key = std::tuple<std::int64_t, int, std::uint64_t, int>;

  const GeneratorBackend& generator_;
  std::vector<MeanStyle> means_;
  mutable std::shared_mutex mutex_;
  mutable std::map<Key, RenderResult> cache_;
  mutable std::size_t synth_calls_ = 0;
};

}  // namespace truncgen
