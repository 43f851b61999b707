#include "truncgen/records.hpp"

#include <algorithm>
#include <tuple>

#include "truncgen/errors.hpp"

namespace truncgen {

std::string to_string(Method m) {
  switch (m) {
    case Method::StyleMix: return "style_mix";
    case Method::FirstFlip: return "first_flip";
    case Method::AdaptiveSalvage: return "adaptive_salvage";
  }
  return "style_mix";
}

Method method_from_string(const std::string& s) {
  if (s == "style_mix") return Method::StyleMix;
  if (s == "first_flip") return Method::FirstFlip;
  if (s == "adaptive_salvage") return Method::AdaptiveSalvage;
  throw InvalidArgument("unknown method '" + s + "'");
}

int FrontierRecord::candidate_class() const {
  if (!screen.prediction) throw InvalidArgument("frontier record has no candidate prediction");
  return screen.prediction->top_class;
}

namespace {

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

void check_version(const nlohmann::json& j) {
  const int v = j.value("schema_version", 0);
  if (v != kRecordSchemaVersion)
    throw InvalidArgument("unsupported record schema_version " + std::to_string(v));
}

}  // namespace

void to_json(nlohmann::json& j, const FrontierRecord& r) {
  j = nlohmann::json::object();
  j["schema_version"] = kRecordSchemaVersion;
  j["method"] = to_string(r.method);
  j["dataset"] = r.dataset;
  j["setting"] = r.setting;
  j["seed_id"] = r.seed_id;
  j["class"] = r.class_label;
  j["rival"] = optional_json(r.rival);
  j["budget"] = r.budget;
  j["lambda"] = optional_json(r.lambda);
  j["psi_star"] = optional_json(r.psi_star);
  j["salvage_psi_star"] = optional_json(r.salvage_psi_star);
  j["cutoff"] = r.cutoff;
  j["steps"] = r.steps;
  j["images"] = {{"source", {{"id", r.source_image_id}, {"path", r.source_image_path}}},
                 {"candidate", {{"id", r.candidate_image_id}, {"path", r.candidate_image_path}}}};
  j["source_gate"] = r.source_gate;
  j["screen"] = r.screen;
  j["embedding"] = r.embedding;
  j["embedder"] = r.embedder_id;
  j["gates"] = r.gates;
}

void from_json(const nlohmann::json& j, FrontierRecord& r) {
  check_version(j);
  r = FrontierRecord{};
  r.method = method_from_string(j.at("method").get<std::string>());
  r.dataset = j.value("dataset", "");
  r.setting = j.value("setting", "");
  r.seed_id = j.at("seed_id").get<std::int64_t>();
  r.class_label = j.at("class").get<int>();
  r.rival = optional_from<int>(j, "rival");
  r.budget = j.at("budget").get<double>();
  r.lambda = optional_from<double>(j, "lambda");
  r.psi_star = optional_from<double>(j, "psi_star");
  r.salvage_psi_star = optional_from<double>(j, "salvage_psi_star");
  r.cutoff = j.value("cutoff", 1);
  r.steps = j.value("steps", 0);
  const auto& images = j.at("images");
  r.source_image_id = images.at("source").value("id", "");
  r.source_image_path = images.at("source").value("path", "");
  r.candidate_image_id = images.at("candidate").at("id").get<std::string>();
  r.candidate_image_path = images.at("candidate").value("path", "");
  r.source_gate = j.at("source_gate").get<GateOutcome>();
  r.screen = j.at("screen").get<GateOutcome>();
  r.embedding = j.value("embedding", std::vector<double>{});
  r.embedder_id = j.value("embedder", "");
  if (j.contains("gates")) r.gates = j.at("gates").get<GateConfig>();
}

void to_json(nlohmann::json& j, const SalvageResult& r) {
  j = nlohmann::json::object();
  j["schema_version"] = kRecordSchemaVersion;
  j["method"] = to_string(Method::AdaptiveSalvage);
  j["setting"] = r.setting;
  j["seed_id"] = r.seed_id;
  j["class"] = r.class_label;
  j["psi_star"] = optional_json(r.psi_star);
  nlohmann::json attempts = nlohmann::json::array();
  for (const auto& a : r.attempts) attempts.push_back({{"psi", a.psi}, {"outcome", a.outcome}});
  j["attempts"] = attempts;
  j["gates"] = r.gates;
}

void from_json(const nlohmann::json& j, SalvageResult& r) {
  check_version(j);
  r = SalvageResult{};
  r.setting = j.value("setting", "");
  r.seed_id = j.at("seed_id").get<std::int64_t>();
  r.class_label = j.at("class").get<int>();
  r.psi_star = optional_from<double>(j, "psi_star");
  for (const auto& a : j.at("attempts"))
    r.attempts.push_back(SalvageAttempt{a.at("psi").get<double>(), a.at("outcome").get<GateOutcome>()});
  if (j.contains("gates")) r.gates = j.at("gates").get<GateConfig>();
}

std::string to_string(SeedOutcome o) {
  switch (o) {
    case SeedOutcome::Frontier: return "frontier";
    case SeedOutcome::NoFrontier: return "no_frontier";
    case SeedOutcome::Discarded: return "discarded";
    case SeedOutcome::SkippedMisclassified: return "skipped_misclassified";
  }
  return "no_frontier";
}

SeedOutcome seed_outcome_from_string(const std::string& s) {
  for (auto o : {SeedOutcome::Frontier, SeedOutcome::NoFrontier, SeedOutcome::Discarded,
                 SeedOutcome::SkippedMisclassified})
    if (to_string(o) == s) return o;
  throw InvalidArgument("unknown seed outcome '" + s + "'");
}

void to_json(nlohmann::json& j, const SeedUsage& r) {
  j = {{"schema_version", kRecordSchemaVersion},
       {"setting", r.setting},
       {"seed_id", r.seed_id},
       {"class", r.class_label},
       {"batch", r.batch},
       {"outcome", to_string(r.outcome)},
       {"accept_psi", optional_json(r.accept_psi)},
       {"salvaged", r.salvaged},
       {"frontiers", r.frontiers}};
}

void from_json(const nlohmann::json& j, SeedUsage& r) {
  check_version(j);
  r = SeedUsage{};
  r.setting = j.value("setting", "");
  r.seed_id = j.at("seed_id").get<std::int64_t>();
  r.class_label = j.at("class").get<int>();
  r.batch = j.value("batch", 0);
  r.outcome = seed_outcome_from_string(j.at("outcome").get<std::string>());
  r.accept_psi = optional_from<double>(j, "accept_psi");
  r.salvaged = j.value("salvaged", false);
  r.frontiers = j.value("frontiers", 0);
}

void sort_records(std::vector<FrontierRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const FrontierRecord& a, const FrontierRecord& b) {
    return std::tuple(a.seed_id, a.class_label, to_string(a.method), a.budget) <
           std::tuple(b.seed_id, b.class_label, to_string(b.method), b.budget);
  });
}

void sort_records(std::vector<SalvageResult>& records) {
  std::stable_sort(records.begin(), records.end(), [](const SalvageResult& a, const SalvageResult& b) {
    return std::tuple(a.seed_id, a.class_label) < std::tuple(b.seed_id, b.class_label);
  });
}

}  // namespace truncgen
