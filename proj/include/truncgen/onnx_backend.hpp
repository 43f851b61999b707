#pragma once

// Backends over model files in the ONNX exchange format, evaluated by a small
// built-in CPU interpreter (float tensors, a common feed-forward op subset).
//
// A manifest JSON next to the graphs declares files, tensor names and dims:
//   {
//     "mapper":     {"file": "mapper.onnx", "inputs": ["z", "c"], "output": "w"},
//     "synthesis":  {"file": "synthesis.onnx", "input": "w_plus", "output": "image",
//                    "output_range": [-1, 1]},
//     "classifier": {"file": "classifier.onnx", "input": "image", "output": "logits"},
//     "dims": {"latent_dim": 8, "style_dim": 16, "num_layers": 6, "num_classes": 10,
//              "image": [28, 28, 1]}
//   }
// Layouts: z [1, latent_dim]; c one-hot [1, num_classes]; w [1, style_dim];
// w_plus [1, num_layers, style_dim]; images NCHW [1, C, H, W].

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "truncgen/backend.hpp"
#include "truncgen/metrics.hpp"

namespace truncgen::onnx {

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::int64_t numel() const;
  static Tensor zeros(std::vector<std::int64_t> shape);
};

/// A loaded graph. Initializers are kept as constants; run() evaluates the
/// nodes in file order (ONNX requires topological order).
class Model {
 public:
  static Model load(const std::filesystem::path& path);
  static Model from_bytes(const std::string& bytes, const std::string& label = "<memory>");

  std::map<std::string, Tensor> run(const std::map<std::string, Tensor>& inputs,
                                    const std::vector<std::string>& outputs) const;
  Tensor run1(const std::map<std::string, Tensor>& inputs, const std::string& output) const;

  const std::vector<std::string>& input_names() const { return inputs_; }
  const std::vector<std::string>& output_names() const { return outputs_; }
  const std::string& sha256() const { return sha256_; }

  struct Impl;

 private:
  std::shared_ptr<const Impl> impl_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::string sha256_;
};

struct GraphSpec {
  std::filesystem::path file;
  std::vector<std::string> inputs;
  std::string output;
};

struct Manifest {
  GraphSpec mapper;
  GraphSpec synthesis;
  GraphSpec classifier;
  int latent_dim = 0;
  int style_dim = 0;
  int num_layers = 0;
  int num_classes = 0;
  ImageShape image;
  double output_lo = 0.0;
  double output_hi = 1.0;
  bool classifier_outputs_probs = false;
};

Manifest load_manifest(const std::filesystem::path& path);

class OnnxGenerator final : public GeneratorBackend {
 public:
  explicit OnnxGenerator(const Manifest& manifest);

  int latent_dim() const override { return m_.latent_dim; }
  int style_dim() const override { return m_.style_dim; }
  int num_layers() const override { return m_.num_layers; }
  int num_classes() const override { return m_.num_classes; }
  ImageShape image_shape() const override { return m_.image; }

  StyleVector map_w(const Eigen::VectorXd& z, int class_label) const override;
  Image synthesize(const StyleCode& w) const override;
  std::string fingerprint() const override;

 private:
  Manifest m_;
  Model mapper_;
  Model synthesis_;
};

class OnnxClassifier final : public ClassifierBackend {
 public:
  explicit OnnxClassifier(const Manifest& manifest);

  int num_classes() const override { return m_.num_classes; }
  ImageShape input_shape() const override { return m_.image; }
  Prediction classify(const Image& image) const override;
  std::string fingerprint() const override;

 private:
  Manifest m_;
  Model model_;
};

/// Perceptual embedder from a feature graph: image NCHW in [0, 1] -> [1, D].
class OnnxEmbedder final : public PerceptualEmbedder {
 public:
  OnnxEmbedder(const std::filesystem::path& file, std::string input, std::string output);

  Eigen::VectorXd embed(const Image& image) const override;
  std::string id() const override;

 private:
  Model model_;
  std::string input_;
  std::string output_;
};

Tensor image_to_nchw(const Image& image);
Image nchw_to_image(const Tensor& t, const ImageShape& shape, double lo, double hi);

}  // namespace truncgen::onnx
