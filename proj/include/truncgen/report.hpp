#pragma once

// Human verdicts, consensus resolution and the per-setting report table.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "truncgen/records.hpp"

namespace truncgen {

inline constexpr int kVerdictSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

struct Verdict {
  std::string image_id;
  std::string annotator_id;
  bool answer = false;     // "yes" / "no"
  bool consensus = false;  // revision recorded after a disagreement
  std::string timestamp;
  std::int64_t sequence = 0;  // store-assigned append index
};

void to_json(nlohmann::json& j, const Verdict& v);
void from_json(const nlohmann::json& j, Verdict& v);

std::vector<Verdict> verdicts_from_json(const nlohmann::json& arr);

enum class Resolution {
  Valid,       // consensus yes, or every required annotator said yes
  Invalid,     // consensus no, or all required annotators answered and one said no
  Unresolved,  // yes/no split with no consensus verdict (counted invalid)
  Incomplete,  // fewer than the required annotators answered (counted invalid)
  Missing,     // no verdict at all (counted invalid)
};

std::string to_string(Resolution r);

/// Latest consensus verdict wins; otherwise valid iff `required_annotators`
/// distinct annotators answered and all said yes.
Resolution resolve(const std::vector<Verdict>& verdicts_for_image, int required_annotators = 2);

/// One (dataset, technique, setting) slice of a campaign's logs.
struct SettingLog {
  std::string dataset;
  std::string technique;  // display label, e.g. "Style-Mixing"
  std::string setting;    // display label, e.g. "ψ=0.9"
  std::string key;        // directory name
  int quota = 25;
  std::vector<SeedUsage> seeds;
  std::vector<FrontierRecord> frontiers;
  std::vector<SalvageResult> salvage;
};

struct SettingReport {
  std::string dataset;
  std::string technique;
  std::string setting;
  std::string key;

  std::int64_t seeds = 0;      // distinct (seed, class) pairs consumed
  std::int64_t frontiers = 0;  // screened frontiers logged
  std::int64_t salvaged = 0;
  std::int64_t annotated = 0;  // frontiers with at least one verdict
  std::int64_t validated = 0;
  std::int64_t validated_faults = 0;
  std::int64_t unresolved = 0;
  std::int64_t incomplete = 0;
  std::int64_t missing = 0;
  int quota = 25;

  double human_val_rate = 0.0;        // validated / quota
  Diversity diversity;                // over validated embeddings
  double fault_rate = 0.0;            // validated faults / seeds
  double fault_rate_validated = 0.0;  // validated faults / validated
  std::optional<double> efficiency;   // seeds / validated

  bool awaiting_annotation = true;
  std::vector<std::string> flags;
};

struct CampaignReport {
  std::vector<SettingReport> settings;
  nlohmann::json provenance = nlohmann::json::object();
};

/// Rates for one setting. Frontiers are joined to verdicts by candidate image id.
SettingReport aggregate_rates(const SettingLog& log, const std::map<std::string, std::vector<Verdict>>& by_image,
                              int required_annotators = 2);

/// Joins verdicts to the logs of every setting; throws DanglingVerdicts
/// listing image ids that no logged frontier references.
CampaignReport merge_verdicts(const std::vector<SettingLog>& logs, const std::vector<Verdict>& verdicts,
                              int required_annotators = 2);

/// num/den as a percentage truncated (not rounded) to three significant
/// figures, e.g. 12/518 -> "2.31%", 25/93 -> "26.8%". Exact integer arithmetic.
std::string format_percent_sig3(std::int64_t num, std::int64_t den);
/// num/den as a whole percentage, truncated.
std::string format_percent_int(std::int64_t num, std::int64_t den);
std::string format_fixed(double value, int decimals);

/// Column order of the rendered table.
const std::vector<std::string>& report_columns();
std::vector<std::string> report_row(const SettingReport& s);

std::string render_text(const CampaignReport& report);
std::string render_csv(const CampaignReport& report);
nlohmann::json report_to_json(const CampaignReport& report);

}  // namespace truncgen
