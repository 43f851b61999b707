#pragma once

// Campaign orchestration: config, deterministic seed lists, per-setting
// execution with a draw-until-quota loop, persistence of images and JSON
// logs, and loading a run directory back for reporting.
//
// Run directory layout:
//   config.json            resolved config (echo of every threshold)
//   mean_style.json        per-class mean styles
//   run.json               settings summary, provenance, log digest, timestamp
//   <setting>/frontiers.json, seeds.json, salvage.json
//   images/<setting>/*.png
//   report.txt, report.csv, report.json

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "truncgen/backend.hpp"
#include "truncgen/gates.hpp"
#include "truncgen/latent.hpp"
#include "truncgen/metrics.hpp"
#include "truncgen/records.hpp"
#include "truncgen/report.hpp"
#include "truncgen/search.hpp"

namespace truncgen {

inline constexpr int kConfigSchemaVersion = 1;

enum class Technique { StyleMix, FirstFlip };

std::string to_string(Technique t);
Technique technique_from_string(const std::string& s);
/// Table label: "Style-Mixing" / "Truncation-Only".
std::string technique_label(Technique t);

struct BackendConfig {
  std::string kind = "toy";  // "toy" or "onnx"
  std::string manifest;      // onnx: path to the manifest JSON
  double noise_strength = 0.0;
  std::uint64_t noise_seed = 0;
};

struct EmbedderConfig {
  std::string kind = "pyramid";  // "pyramid" or "onnx"
  int levels = 3;
  int dim = 64;
  std::uint64_t seed = 0x5eed;
  std::string model;  // onnx: embedding graph
  std::string input = "image";
  std::string output = "features";
};

struct CampaignConfig {
  std::string dataset = "toy";
  std::string dataset_label = "Toy";
  BackendConfig backend;
  EmbedderConfig embedder;

  Technique technique = Technique::StyleMix;
  TruncationMode mode = TruncationMode::Fixed;
  /// Fixed mode: one setting per psi.
  std::vector<double> psis{1.0, 0.9, 0.8, 0.7, 0.6, 0.5};
  /// Descent schedule for salvage and first-flip. Empty selects the preset
  /// for the mode (fixed -> {1.0 .. 0.5 step 0.1}, adaptive -> finer).
  std::vector<double> schedule;
  std::optional<int> cutoff;  // unset: every layer

  int top_k = 2;
  std::vector<int> layers{0, 1};
  int steps = 10;
  bool rerank_per_budget = false;
  GateConfig gates;

  int seeds_per_class = 30;
  int max_batches = 50;
  int quota = 25;
  std::uint64_t rng_seed = 0;
  std::int64_t mean_style_samples = 10000;
  int workers = 0;  // 0: hardware concurrency
  std::string output_dir = "out";
  int required_annotators = 2;

  /// Directory relative paths in the config resolve against.
  std::filesystem::path base_dir;

  std::vector<double> effective_schedule() const;
  void validate() const;
};

CampaignConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const CampaignConfig& cfg);
CampaignConfig load_config(const std::filesystem::path& path);

/// One experiment arm over the shared seed list.
struct Setting {
  std::string key;    // directory-safe, e.g. "psi_090"
  std::string label;  // table label, e.g. "ψ=0.9"
  TruncationMode mode = TruncationMode::None;
  double psi = 1.0;
};

std::vector<Setting> settings_for(const CampaignConfig& cfg);

struct Backends {
  std::unique_ptr<GeneratorBackend> generator;
  std::unique_ptr<ClassifierBackend> classifier;
  std::unique_ptr<PerceptualEmbedder> embedder;
};

/// Toy or model-file backends, validated against each other.
Backends load_backends(const CampaignConfig& cfg);

/// Latent for (class, seed_id): NormalStream(derive_seed({rng_seed, class, seed_id})).
LatentSeed make_seed(std::uint64_t rng_seed, int class_label, std::int64_t seed_id, int latent_dim);

/// Seed of the per-class mean-style estimate of a campaign.
std::uint64_t mean_style_seed(std::uint64_t rng_seed);

/// Seeds of one draw batch in processing order: class-major, then seed id.
/// Batch b holds seed ids [b * per_class, (b + 1) * per_class) of every class.
std::vector<LatentSeed> seed_batch(std::uint64_t rng_seed, int batch, int per_class, int num_classes,
                                   int latent_dim);

/// Opaque image id: "img_" + 16 hex digits of sha256(dataset|technique|setting|filename).
std::string image_id_for(const std::string& dataset, const std::string& technique, const std::string& setting_key,
                         const std::string& filename);

/// {dataset}_c{class}_seed{seed}_psi{round(psi*100), 3 digits}.png
std::string image_filename(const std::string& dataset, int class_label, std::int64_t seed_id, double psi,
                           std::optional<int> rival = std::nullopt);

/// Everything one seed contributed to one setting, before persistence.
struct SeedWork {
  SeedUsage usage;
  std::vector<FrontierCandidate> frontiers;
  std::optional<SalvageResult> salvage;
};

/// Runs one seed through one setting (baseline gate, optional salvage,
/// technique search). Pure apart from the renderer cache.
SeedWork process_seed(const CampaignConfig& cfg, const Setting& setting, const Renderer& renderer,
                      const ClassifierBackend& classifier, const PerceptualEmbedder& embedder,
                      const LatentSeed& seed);

struct SettingSummary {
  Setting setting;
  std::int64_t seeds_consumed = 0;
  std::int64_t frontiers = 0;
  std::int64_t salvage_attempts = 0;
  int batches = 0;
  bool quota_reached = false;
};

struct RunResult {
  std::filesystem::path dir;
  std::vector<SettingSummary> settings;
  CampaignReport report;
  std::string log_digest;
  nlohmann::json provenance;
  bool interrupted = false;
};

struct RunHooks {
  std::function<void(const std::string& message)> progress;
  /// Polled between seeds; when set, logs gathered so far are flushed and
  /// the run is marked interrupted.
  const std::atomic<bool>* cancel = nullptr;
};

/// Executes every setting of the config and persists logs, images and an
/// awaiting-annotation report under cfg.output_dir.
RunResult run_campaign(const CampaignConfig& cfg, const RunHooks& hooks = {});
RunResult run_campaign(const CampaignConfig& cfg, const Backends& backends, const RunHooks& hooks = {});

struct LoadedRun {
  nlohmann::json run;
  std::vector<SettingLog> settings;
};

LoadedRun load_run(const std::filesystem::path& dir);

/// sha256 over config.json, mean_style.json, the per-setting logs and every
/// image, in path order. run.json (which holds timestamps), the report files
/// and annotation/ are excluded.
std::string compute_log_digest(const std::filesystem::path& dir);

/// Canonical JSON text used for every log file (2-space indent, trailing newline).
std::string dump_json(const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace truncgen
