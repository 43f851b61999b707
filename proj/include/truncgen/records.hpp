#pragma once

// Log record types and their JSON form. Every record carries
// "schema_version"; files are JSON arrays of records.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "truncgen/gates.hpp"

namespace truncgen {

inline constexpr int kRecordSchemaVersion = 1;

enum class Method { StyleMix, FirstFlip, AdaptiveSalvage };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct FrontierRecord {
  Method method = Method::StyleMix;
  std::string dataset;
  std::string setting;
  std::int64_t seed_id = 0;
  int class_label = 0;
  std::optional<int> rival;
  double budget = 1.0;  // psi of the source render x_b (first-flip: reference psi)
  std::optional<double> lambda;
  std::optional<double> psi_star;          // first-flip psi at which the prediction flipped
  std::optional<double> salvage_psi_star;  // set when the seed was salvaged
  int cutoff = 1;
  int steps = 0;

  std::string source_image_id;
  std::string source_image_path;
  std::string candidate_image_id;
  std::string candidate_image_path;

  GateOutcome source_gate;  // classifier gate on the source render
  GateOutcome screen;       // similarity screen of candidate vs source

  std::vector<double> embedding;  // candidate embedding, for diversity
  std::string embedder_id;
  GateConfig gates;

  int candidate_class() const;
  bool fault_revealing() const { return candidate_class() != class_label; }
};

void to_json(nlohmann::json& j, const FrontierRecord& r);
void from_json(const nlohmann::json& j, FrontierRecord& r);

struct SalvageAttempt {
  double psi = 1.0;
  GateOutcome outcome;
};

struct SalvageResult {
  std::int64_t seed_id = 0;
  int class_label = 0;
  std::optional<double> psi_star;
  std::vector<SalvageAttempt> attempts;
  std::string setting;
  GateConfig gates;
};

void to_json(nlohmann::json& j, const SalvageResult& r);
void from_json(const nlohmann::json& j, SalvageResult& r);

enum class SeedOutcome {
  Frontier,          // at least one screened frontier recorded
  NoFrontier,        // accepted, searched, nothing recorded
  Discarded,         // failed the baseline gate and was not salvaged
  SkippedMisclassified,  // first-flip: argmax wrong at the reference psi
};

std::string to_string(SeedOutcome o);
SeedOutcome seed_outcome_from_string(const std::string& s);

/// One drawn seed, as consumed by one setting.
struct SeedUsage {
  std::int64_t seed_id = 0;
  int class_label = 0;
  int batch = 0;
  SeedOutcome outcome = SeedOutcome::NoFrontier;
  std::optional<double> accept_psi;  // psi at which the seed entered the search
  bool salvaged = false;
  int frontiers = 0;
  std::string setting;
};

void to_json(nlohmann::json& j, const SeedUsage& r);
void from_json(const nlohmann::json& j, SeedUsage& r);

/// Sort key (seed_id, method, budget) used before writing logs.
void sort_records(std::vector<FrontierRecord>& records);
void sort_records(std::vector<SalvageResult>& records);

template <typename T>
nlohmann::json records_to_json(const std::vector<T>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) arr.push_back(r);
  return arr;
}

template <typename T>
std::vector<T> records_from_json(const nlohmann::json& arr) {
  std::vector<T> out;
  for (const auto& j : arr) out.push_back(j.get<T>());
  return out;
}

}  // namespace truncgen
