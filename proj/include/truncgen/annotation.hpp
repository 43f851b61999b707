#pragma once

// Blind human validation: a verdict store with per-annotator seeded task
// order and an append-only JSONL log, plus the local HTTP service over it.
//
// Endpoints (JSON payloads carry "schema_version"):
//   GET  /api/task?annotator=<id>[&mode=consensus]  next task or {"done": true}
//   GET  /api/image/<image_id>                      PNG bytes, pixels only
//   POST /api/verdict                               {"image_id", "answer": "yes"|"no", "consensus"}
//   GET  /api/export                                all verdicts, canonical order
//   GET  /api/progress                              answered / total counts
// Requests authenticate with "Authorization: Bearer <token>" (or ?token=
// for image fetches). Errors: 400 malformed, 401 auth, 404 unknown image,
// 409 duplicate or out-of-protocol verdict.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "truncgen/report.hpp"

namespace truncgen {

inline constexpr int kAnnotationSchemaVersion = 1;

struct AnnotationItem {
  std::string image_id;
  int class_label = 0;
  std::filesystem::path png;
};

/// What an annotator sees: the image id, its source class and a position.
struct AnnotationTask {
  std::string image_id;
  int class_label = 0;
  int presentation_order = 0;  // index in this annotator's shuffle
  int total = 0;
};

nlohmann::json task_to_json(const AnnotationTask& t);

/// Frontier candidates (and optionally their sources) of every setting in
/// the given run directories.
std::vector<AnnotationItem> annotation_items_from_runs(const std::vector<std::filesystem::path>& run_dirs,
                                                       bool include_sources = false);

/// Fisher-Yates over [0, n) driven by raw mt19937_64 outputs: for i from
/// n-1 down to 1, swap i with e() % (i + 1).
std::vector<int> seeded_permutation(int n, std::uint64_t seed);

/// Shuffle sub-seed of an annotator: derive_seed({seed, first 8 bytes of sha256(id)}).
std::uint64_t annotator_seed(std::uint64_t shuffle_seed, const std::string& annotator_id);

/// Verdicts from an export (JSON array) or a store log (one JSON object per line).
std::vector<Verdict> load_verdict_file(const std::filesystem::path& path);

class AnnotationStore {
 public:
  /// `tokens` maps bearer token -> annotator id. Verdicts already present in
  /// `verdict_log` are replayed (and must be consistent with the items).
  AnnotationStore(std::vector<AnnotationItem> items, std::map<std::string, std::string> tokens,
                  std::filesystem::path verdict_log, std::uint64_t shuffle_seed, int required_annotators = 2);

  /// Annotator id for a token; throws AuthError.
  std::string authenticate(const std::string& token) const;
  bool has_annotator(const std::string& annotator_id) const;

  /// Next unanswered task in the annotator's shuffle, or nullopt when done.
  /// In consensus mode, the next image whose verdicts disagree and that has
  /// no consensus verdict yet.
  std::optional<AnnotationTask> next_task(const std::string& annotator_id, bool consensus_mode = false) const;

  /// Appends a verdict. Throws AuthError, NotFound (unknown image) or
  /// Conflict (duplicate answer, or a consensus verdict without a prior
  /// disagreement).
  Verdict submit(const std::string& annotator_id, const std::string& image_id, bool answer, bool consensus = false);

  /// Sorted by (image_id, annotator_id, sequence).
  std::vector<Verdict> export_verdicts() const;
  nlohmann::json export_json() const;

  nlohmann::json progress() const;

  /// Image ids whose regular verdicts disagree, with no consensus yet.
  std::vector<std::string> unresolved_images() const;

  /// PNG re-encoded from decoded pixels, so no file metadata survives.
  std::vector<std::uint8_t> image_png(const std::string& image_id) const;

  std::vector<std::string> task_order(const std::string& annotator_id) const;
  /// Sub-seeds per annotator, for external regeneration of the shuffles.
  nlohmann::json session_json() const;

  std::size_t size() const { return items_.size(); }

 private:
  void apply(const Verdict& v);
  Verdict check(const std::string& annotator_id, const std::string& image_id, bool answer, bool consensus) const;
  bool disagreed_locked(const std::string& image_id) const;
  bool resolved_locked(const std::string& image_id) const;

  std::vector<AnnotationItem> items_;  // sorted by image_id
  std::map<std::string, std::size_t> index_;
  std::map<std::string, std::string> tokens_;
  std::map<std::string, std::vector<std::string>> order_;  // annotator -> image ids
  std::filesystem::path log_path_;
  std::uint64_t shuffle_seed_;
  int required_annotators_;

  mutable std::shared_mutex mutex_;
  std::vector<Verdict> verdicts_;
  std::map<std::string, std::map<std::string, bool>> answers_;  // image -> annotator -> regular answer
  std::map<std::string, bool> consensus_;                       // image -> latest consensus answer
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds any free port
  std::filesystem::path ui_dir;  // optional static files mounted at /
};

class AnnotationServer {
 public:
  AnnotationServer(AnnotationStore& store, ServerOptions options);
  ~AnnotationServer();

  /// Binds the socket; returns the bound port.
  int bind();
  /// Serves until stop(); call bind() first.
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace truncgen
