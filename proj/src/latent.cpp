#include "truncgen/latent.hpp"

namespace truncgen {

std::string to_string(TruncationMode mode) {
  switch (mode) {
    case TruncationMode::None: return "none";
    case TruncationMode::Fixed: return "fixed";
    case TruncationMode::Adaptive: return "adaptive";
  }
  return "none";
}

TruncationMode truncation_mode_from_string(const std::string& s) {
  if (s == "none") return TruncationMode::None;
  if (s == "fixed") return TruncationMode::Fixed;
  if (s == "adaptive") return TruncationMode::Adaptive;
  throw InvalidArgument("unknown truncation mode '" + s + "'");
}

std::vector<double> fixed_schedule() { return {1.0, 0.9, 0.8, 0.7, 0.6, 0.5}; }

std::vector<double> adaptive_schedule() { return {1.0, 0.95, 0.90, 0.85, 0.80, 0.75, 0.70, 0.60, 0.50}; }

void validate_schedule(const std::vector<double>& schedule) {
  if (schedule.empty()) throw InvalidArgument("schedule is empty");
  if (schedule.front() != 1.0) throw InvalidArgument("schedule must start at 1.0");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] > 0.0 && schedule[i] <= 1.0)) throw InvalidArgument("schedule values must lie in (0, 1]");
    if (i > 0 && !(schedule[i] < schedule[i - 1])) throw InvalidArgument("schedule must be strictly descending");
  }
}

void TruncationPolicy::validate(int num_layers) const {
  if (cutoff < 1 || cutoff > num_layers)
    throw InvalidArgument("cutoff " + std::to_string(cutoff) + " outside [1, " + std::to_string(num_layers) + "]");
  switch (mode) {
    case TruncationMode::None:
      if (psi != 1.0) throw InvalidArgument("mode none requires psi = 1.0");
      break;
    case TruncationMode::Fixed:
      if (!(psi > 0.0 && psi <= 1.0)) throw InvalidArgument("psi must lie in (0, 1]");
      validate_schedule(schedule);
      break;
    case TruncationMode::Adaptive:
      validate_schedule(schedule);
      break;
  }
}

}  // namespace truncgen
