#pragma once

// Latent-space algebra for style-based generators: truncation toward the
// mean style, layer-cutoff truncation, per-layer style mixing and Monte-Carlo
// estimation of the mean style.
//
// A style code is a dense (num_layers x style_dim) matrix; row i is the style
// vector fed to synthesis layer i. Every function here is pure.

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "truncgen/errors.hpp"
#include "truncgen/rng.hpp"

namespace truncgen {

template <typename Scalar>
using StyleCodeT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using StyleVectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using StyleCode = StyleCodeT<double>;
using StyleVector = StyleVectorT<double>;

template <typename Scalar>
struct MeanStyleT {
  StyleVectorT<Scalar> w_bar;
  std::int64_t sample_count = 0;
};
using MeanStyle = MeanStyleT<double>;

struct LatentSeed {
  std::int64_t seed_id = 0;
  Eigen::VectorXd z;
  int class_label = 0;
};

enum class TruncationMode { None, Fixed, Adaptive };

std::string to_string(TruncationMode mode);
TruncationMode truncation_mode_from_string(const std::string& s);

/// psi budgets of the fixed sweep: {1.0, 0.9, ..., 0.5}.
std::vector<double> fixed_schedule();
/// Finer adaptive descent: {1.0, 0.95, 0.90, 0.85, 0.80, 0.75, 0.70, 0.60, 0.50}.
std::vector<double> adaptive_schedule();

/// Throws InvalidArgument unless the schedule is non-empty, strictly
/// descending, starts at 1.0 and stays within (0, 1].
void validate_schedule(const std::vector<double>& schedule);

struct TruncationPolicy {
  TruncationMode mode = TruncationMode::None;
  double psi = 1.0;
  std::vector<double> schedule{1.0};
  int cutoff = 1;

  void validate(int num_layers) const;
};

/// w' = w_bar + psi * (w - w_bar) on rows [0, cutoff); rows >= cutoff are
/// copied untouched. psi == 1 returns the input unchanged.
template <typename Scalar>
StyleCodeT<Scalar> truncate(const StyleCodeT<Scalar>& w, const MeanStyleT<Scalar>& mean, Scalar psi,
                            int cutoff) {
  if (w.cols() != mean.w_bar.size())
    throw InvalidArgument("truncate: style_dim " + std::to_string(w.cols()) + " != w_bar length " +
                          std::to_string(mean.w_bar.size()));
  if (!(psi > Scalar(0) && psi <= Scalar(1)))
    throw InvalidArgument("truncate: psi must lie in (0, 1]");
  if (cutoff < 1 || cutoff > w.rows())
    throw InvalidArgument("truncate: cutoff " + std::to_string(cutoff) + " outside [1, " +
                          std::to_string(w.rows()) + "]");
  StyleCodeT<Scalar> out = w;
  if (psi == Scalar(1)) return out;
  auto head = out.topRows(cutoff);
  head = ((w.topRows(cutoff).rowwise() - mean.w_bar.transpose()) * psi).rowwise() +
         mean.w_bar.transpose();
  return out;
}

/// Convex combination of source and rival rows on the selected layers.
template <typename Scalar>
StyleCodeT<Scalar> style_mix(const StyleCodeT<Scalar>& source, const StyleCodeT<Scalar>& rival,
                             const std::set<int>& layers, Scalar lambda) {
  if (source.rows() != rival.rows() || source.cols() != rival.cols())
    throw InvalidArgument("style_mix: source and rival shapes differ");
  if (!(lambda >= Scalar(0) && lambda <= Scalar(1)))
    throw InvalidArgument("style_mix: lambda must lie in [0, 1]");
  for (int layer : layers)
    if (layer < 0 || layer >= source.rows())
      throw InvalidArgument("style_mix: layer index " + std::to_string(layer) + " out of range");

  StyleCodeT<Scalar> out = source;
  for (int layer : layers) {
    if (lambda == Scalar(0)) continue;
    if (lambda == Scalar(1)) {
      out.row(layer) = rival.row(layer);
    } else {
      out.row(layer) = (Scalar(1) - lambda) * source.row(layer) + lambda * rival.row(layer);
    }
  }
  return out;
}

/// Repeats one W-space vector across every synthesis layer.
template <typename Scalar>
StyleCodeT<Scalar> broadcast_style(const StyleVectorT<Scalar>& w, int num_layers) {
  return w.transpose().replicate(num_layers, 1);
}

/// Mean of mapper(z) over num_samples standard-normal latents drawn from
/// NormalStream(rng_seed). `mapper` maps a latent vector to a W-space vector.
/// Uses the running-mean update m += (w - m) / n, which is exact for
/// constant mappers.
template <typename Scalar, typename Mapper>
MeanStyleT<Scalar> estimate_mean_style(Mapper&& mapper, Eigen::Index latent_dim,
                                       std::int64_t num_samples, std::uint64_t rng_seed) {
  if (num_samples < 1) throw InvalidArgument("estimate_mean_style: num_samples must be >= 1");
  if (latent_dim < 1) throw InvalidArgument("estimate_mean_style: latent_dim must be >= 1");
  NormalStream normal(rng_seed);
  MeanStyleT<Scalar> mean;
  for (std::int64_t i = 0; i < num_samples; ++i) {
    const StyleVectorT<Scalar> w = mapper(normal.template vector<Scalar>(latent_dim));
    if (i == 0) {
      mean.w_bar = w;
      continue;
    }
    if (w.size() != mean.w_bar.size()) throw BackendContractError("mapper output length changed");
    mean.w_bar += (w - mean.w_bar) / static_cast<Scalar>(i + 1);
  }
  mean.sample_count = num_samples;
  return mean;
}

}  // namespace truncgen
