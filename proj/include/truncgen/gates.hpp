#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "truncgen/backend.hpp"
#include "truncgen/image.hpp"
#include "truncgen/metrics.hpp"

namespace truncgen {

struct GateConfig {
  double p_min = 0.90;
  double delta = 0.50;
  double tau_ssim = 0.95;
  double tau_l2 = 0.20;
  /// Re-check the top-2 margin on every truncated source render, not only
  /// on the psi = 1.0 baseline.
  bool recheck_margin_each_budget = true;

  void validate() const;
};

void to_json(nlohmann::json& j, const GateConfig& g);
void from_json(const nlohmann::json& j, GateConfig& g);

enum class GateCondition { WrongClass, LowConfidence, LowMargin, LowSsim, HighL2 };

std::string to_string(GateCondition c);
GateCondition gate_condition_from_string(const std::string& s);

/// Whether the classifier part of a gate was evaluated.
enum class ClassifierGate { Applied, NotApplicable };

struct GateOutcome {
  bool passed = true;
  std::vector<GateCondition> failed;
  ClassifierGate classifier_gate = ClassifierGate::Applied;
  std::optional<SimilarityReading> similarity;
  std::optional<Prediction> prediction;

  bool failed_on(GateCondition c) const;
};

void to_json(nlohmann::json& j, const GateOutcome& g);
void from_json(const nlohmann::json& j, GateOutcome& g);

/// argmax == c, p(1) >= p_min and p(1) - p(2) >= delta.
GateOutcome baseline_accept(const Prediction& pred, int source_class, const GateConfig& g);

/// Gate applied to a truncated source render x_b. The margin condition is
/// included only when g.recheck_margin_each_budget is set.
GateOutcome budget_accept(const Prediction& pred, int source_class, const GateConfig& g);

/// What the screened candidate is meant to be.
enum class CandidateKind {
  IntendedFlip,  // classifier gate skipped, recorded as not applicable
  Preserving,    // classifier gate evaluated with the source acceptance conditions
};

/// Pure decision from recorded readings; screen() is this plus the measurement.
GateOutcome decide_screen(const SimilarityReading& reading, const Prediction& pred_candidate, int source_class,
                          const GateConfig& g, CandidateKind kind);

/// Similarity passes iff ssim >= tau_ssim and l2 <= tau_l2 (closed thresholds).
GateOutcome screen(const Image& reference, const Image& candidate, const Prediction& pred_candidate,
                   int source_class, const GateConfig& g, CandidateKind kind);

}  // namespace truncgen
