#pragma once

// Boundary search procedures over a rendered latent seed:
//  * style_mix_search   - per budget, bisect the mixing weight toward a rival
//  * first_flip_search  - descend a psi schedule until the prediction flips
//  * adaptive_salvage   - descend a psi schedule until the baseline gate passes
//  * truncation_sweep   - psi x cutoff grid for inspection

#include <optional>
#include <set>
#include <vector>

#include "truncgen/backend.hpp"
#include "truncgen/gates.hpp"
#include "truncgen/records.hpp"

namespace truncgen {

struct SearchContext {
  const Renderer& renderer;
  const ClassifierBackend& classifier;
  GateConfig gates;
  int cutoff = 1;
};

struct Rival {
  int class_label = 0;
  double confidence = 0.0;
};

/// Top-K non-source classes with non-zero probability, by descending
/// confidence (ties: lower class index first).
std::vector<Rival> select_rivals(const Prediction& pred, int source_class, int k);

struct BisectionStep {
  double lo = 0.0;
  double hi = 1.0;
  double mid = 0.5;
  bool mid_passed = false;
};

struct Bisection {
  bool bracketed = false;  // predicate held at 1
  double hi = 1.0;
  std::vector<BisectionStep> steps;
};

/// Smallest x in [0, 1] satisfying a predicate assumed monotone (false below
/// a threshold, true above). Probes x = 1 first; if that fails nothing is
/// bracketed. Otherwise keeps lo failing (or 0) and hi passing, halving the
/// bracket `steps` times, and returns hi.
template <typename Predicate>
Bisection bisect_smallest(Predicate&& passes, int steps) {
  Bisection out;
  if (!passes(1.0)) return out;
  out.bracketed = true;
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double mid = 0.5 * (lo + hi);
    const bool ok = passes(mid);
    out.steps.push_back(BisectionStep{lo, hi, mid, ok});
    if (ok) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  out.hi = hi;
  return out;
}

/// A frontier plus the images it references (ids are assigned on persistence).
struct FrontierCandidate {
  FrontierRecord record;
  Image source;
  Image candidate;
};

struct StyleMixParams {
  std::vector<double> budgets;
  int top_k = 2;
  std::set<int> layers{0, 1};
  int steps = 10;
  /// psi of the accepted reference render (1.0, or psi* for salvaged seeds).
  double reference_psi = 1.0;
  /// Re-rank rivals on each x_b instead of the reference render.
  bool rerank_per_budget = false;
};

struct RivalAttempt {
  int rival = 0;
  Bisection bisection;
};

struct BudgetOutcome {
  double budget = 1.0;
  GateOutcome source_gate;
  std::vector<RivalAttempt> attempts;
  std::optional<FrontierCandidate> frontier;
};

struct StyleMixResult {
  Prediction reference;
  std::vector<Rival> rivals;
  std::vector<BudgetOutcome> budgets;

  std::vector<FrontierCandidate> frontiers() const;
};

/// Requires the reference render to pass baseline_accept. For each budget b
/// the truncated source x_b must pass the classifier gate; then rivals are
/// tried in order and the first that yields a flipping, screen-passing mix
/// records a frontier for (seed, b).
StyleMixResult style_mix_search(const SearchContext& ctx, const LatentSeed& seed, const StyleMixParams& params);

struct FirstFlipResult {
  bool skipped = false;  // argmax wrong at the reference psi
  Prediction reference;
  std::vector<double> rendered;  // psi values rendered, in order
  std::optional<FrontierCandidate> frontier;
};

/// Renders the reference psi, then every schedule value strictly below it
/// in order, stopping at the first psi whose argmax differs from the source
/// class. The flip is screened against the reference render.
FirstFlipResult first_flip_search(const SearchContext& ctx, const LatentSeed& seed, const std::vector<double>& schedule,
                                  double reference_psi = 1.0);

/// Descends the schedule (1.0 first) and stops at the first psi whose render
/// passes baseline_accept. Every attempt is kept.
SalvageResult adaptive_salvage(const SearchContext& ctx, const LatentSeed& seed, const std::vector<double>& schedule);

struct SweepGrid {
  std::vector<double> psis;
  std::vector<int> cutoffs;
  std::vector<std::vector<Image>> images;  // [cutoff index][psi index]
};

SweepGrid truncation_sweep(const Renderer& renderer, const LatentSeed& seed, const std::vector<double>& psis,
                           const std::vector<int>& cutoffs);

}  // namespace truncgen
