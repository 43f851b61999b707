#include "truncgen/backend.hpp"

#include <bit>
#include <cmath>
#include <mutex>

#include "truncgen/errors.hpp"
#include "truncgen/rng.hpp"

namespace truncgen {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  if (logits.size() == 0) throw BackendContractError("softmax: empty logits");
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

Prediction make_prediction(const Eigen::VectorXd& probs) {
  if (probs.size() == 0) throw BackendContractError("prediction over zero classes");
  Prediction p;
  p.probs = probs;
  int best = 0;
  for (int k = 1; k < probs.size(); ++k)
    if (probs[k] > probs[best]) best = k;
  double second = 0.0;
  bool have_second = false;
  for (int k = 0; k < probs.size(); ++k) {
    if (k == best) continue;
    if (!have_second || probs[k] > second) {
      second = probs[k];
      have_second = true;
    }
  }
  p.top_class = best;
  p.top_conf = probs[best];
  p.margin = have_second ? probs[best] - second : probs[best];
  p.tied = have_second && second == probs[best];
  return p;
}

StyleCode GeneratorBackend::map(const LatentSeed& seed) const {
  return broadcast_style(map_w(seed.z, seed.class_label), num_layers());
}

void GeneratorBackend::check_latent(const Eigen::VectorXd& z, int class_label) const {
  if (z.size() != latent_dim())
    throw BackendContractError("latent length " + std::to_string(z.size()) + " != declared " +
                               std::to_string(latent_dim()));
  if (!z.allFinite()) throw BackendContractError("latent contains non-finite values");
  if (class_label < 0 || class_label >= num_classes())
    throw BackendContractError("class label " + std::to_string(class_label) + " out of range");
}

void GeneratorBackend::check_style(const StyleCode& w) const {
  if (w.rows() != num_layers() || w.cols() != style_dim())
    throw BackendContractError("style code shape " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                               " != declared " + std::to_string(num_layers()) + "x" + std::to_string(style_dim()));
  if (!w.allFinite()) throw BackendContractError("style code contains non-finite values");
}

void ClassifierBackend::check_image(const Image& image) const {
  if (!(image.shape == input_shape()))
    throw BackendContractError("classifier input " + to_string(image.shape) + " != declared " +
                               to_string(input_shape()));
}

std::vector<MeanStyle> estimate_class_mean_styles(const GeneratorBackend& generator, std::int64_t num_samples,
                                                  std::uint64_t rng_seed) {
  std::vector<MeanStyle> means;
  for (int c = 0; c < generator.num_classes(); ++c) {
    auto mapper = [&](const Eigen::VectorXd& z) { return generator.map_w(z, c); };
    means.push_back(estimate_mean_style<double>(mapper, generator.latent_dim(), num_samples,
                                                derive_seed({rng_seed, static_cast<std::uint64_t>(c)})));
  }
  return means;
}

Renderer::Renderer(const GeneratorBackend& generator, std::vector<MeanStyle> class_means)
    : generator_(generator), means_(std::move(class_means)) {
  if (static_cast<int>(means_.size()) != generator_.num_classes())
    throw InvalidArgument("Renderer: need one mean style per class");
  for (const auto& m : means_)
    if (m.w_bar.size() != generator_.style_dim()) throw InvalidArgument("Renderer: mean style length mismatch");
}

const MeanStyle& Renderer::mean_style(int class_label) const {
  if (class_label < 0 || class_label >= static_cast<int>(means_.size()))
    throw InvalidArgument("class label out of range");
  return means_[class_label];
}

StyleCode Renderer::truncated_style(const LatentSeed& seed, int style_class, double psi, int cutoff) const {
  LatentSeed s = seed;
  s.class_label = style_class;
  return truncate(generator_.map(s), mean_style(style_class), psi, cutoff);
}

RenderResult Renderer::render(const LatentSeed& seed, double psi, int cutoff) const {
  const Key key{seed.seed_id, seed.class_label, std::bit_cast<std::uint64_t>(psi), cutoff};
  {
    std::shared_lock lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  RenderResult result;
  result.style = truncated_style(seed, seed.class_label, psi, cutoff);
  result.image = generator_.synthesize(result.style);
  result.image.provenance = psi == 1.0 ? Provenance::Baseline : Provenance::Truncated;
  std::unique_lock lock(mutex_);
  ++synth_calls_;
  cache_.insert_or_assign(key, result);
  return result;
}

std::size_t Renderer::cache_size() const {
  std::shared_lock lock(mutex_);
  return cache_.size();
}

std::size_t Renderer::render_calls() const {
  std::shared_lock lock(mutex_);
  return synth_calls_;
}

}  // namespace truncgen
