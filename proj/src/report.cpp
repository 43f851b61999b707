#include "truncgen/report.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "truncgen/errors.hpp"

namespace truncgen {

void to_json(nlohmann::json& j, const Verdict& v) {
  j = {{"schema_version", kVerdictSchemaVersion},
       {"image_id", v.image_id},
       {"annotator", v.annotator_id},
       {"answer", v.answer ? "yes" : "no"},
       {"consensus", v.consensus},
       {"timestamp", v.timestamp},
       {"sequence", v.sequence}};
}

void from_json(const nlohmann::json& j, Verdict& v) {
  const int version = j.value("schema_version", 0);
  if (version != kVerdictSchemaVersion)
    throw InvalidArgument("unsupported verdict schema_version " + std::to_string(version));
  v = Verdict{};
  v.image_id = j.at("image_id").get<std::string>();
  v.annotator_id = j.at("annotator").get<std::string>();
  const std::string answer = j.at("answer").get<std::string>();
  if (answer != "yes" && answer != "no") throw InvalidArgument("verdict answer must be \"yes\" or \"no\"");
  v.answer = answer == "yes";
  v.consensus = j.value("consensus", false);
  v.timestamp = j.value("timestamp", "");
  v.sequence = j.value("sequence", std::int64_t{0});
}

std::vector<Verdict> verdicts_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw InvalidArgument("verdict file must hold a JSON array");
  std::vector<Verdict> out;
  for (const auto& j : arr) out.push_back(j.get<Verdict>());
  return out;
}

std::string to_string(Resolution r) {
  switch (r) {
    case Resolution::Valid: return "valid";
    case Resolution::Invalid: return "invalid";
    case Resolution::Unresolved: return "unresolved";
    case Resolution::Incomplete: return "incomplete";
    case Resolution::Missing: return "missing";
  }
  return "missing";
}

Resolution resolve(const std::vector<Verdict>& verdicts, int required_annotators) {
  if (verdicts.empty()) return Resolution::Missing;
  const Verdict* consensus = nullptr;
  for (const auto& v : verdicts)
    if (v.consensus && (!consensus || v.sequence >= consensus->sequence)) consensus = &v;
  if (consensus) return consensus->answer ? Resolution::Valid : Resolution::Invalid;

  std::map<std::string, bool> answers;
  for (const auto& v : verdicts) answers.emplace(v.annotator_id, v.answer);
  bool any_yes = false;
  bool any_no = false;
  for (const auto& [annotator, yes] : answers) (yes ? any_yes : any_no) = true;
  if (static_cast<int>(answers.size()) < required_annotators) return Resolution::Incomplete;
  if (any_yes && any_no) return Resolution::Unresolved;
  return any_yes ? Resolution::Valid : Resolution::Invalid;
}

SettingReport aggregate_rates(const SettingLog& log, const std::map<std::string, std::vector<Verdict>>& by_image,
                              int required_annotators) {
  SettingReport s;
  s.dataset = log.dataset;
  s.technique = log.technique;
  s.setting = log.setting;
  s.key = log.key;
  s.quota = log.quota;

  std::set<std::pair<std::int64_t, int>> distinct;
  for (const auto& u : log.seeds) {
    distinct.emplace(u.seed_id, u.class_label);
    if (u.salvaged) ++s.salvaged;
  }
  s.seeds = static_cast<std::int64_t>(distinct.size());
  s.frontiers = static_cast<std::int64_t>(log.frontiers.size());

  static const std::vector<Verdict> none;
  std::vector<Eigen::VectorXd> embeddings;
  std::set<std::string> embedders;
  bool missing_embedding = false;
  for (const auto& f : log.frontiers) {
    auto it = by_image.find(f.candidate_image_id);
    const auto& vs = it == by_image.end() ? none : it->second;
    if (!vs.empty()) ++s.annotated;
    switch (resolve(vs, required_annotators)) {
      case Resolution::Valid: break;
      case Resolution::Invalid: continue;
      case Resolution::Unresolved: ++s.unresolved; continue;
      case Resolution::Incomplete: ++s.incomplete; continue;
      case Resolution::Missing: ++s.missing; continue;
    }
    ++s.validated;
    if (f.fault_revealing()) ++s.validated_faults;
    if (f.embedding.empty()) {
      missing_embedding = true;
    } else {
      embeddings.push_back(Eigen::Map<const Eigen::VectorXd>(f.embedding.data(), f.embedding.size()));
      embedders.insert(f.embedder_id);
    }
  }

  s.awaiting_annotation = s.annotated == 0;
  s.human_val_rate = s.quota > 0 ? static_cast<double>(s.validated) / s.quota : 0.0;
  s.fault_rate = s.seeds > 0 ? static_cast<double>(s.validated_faults) / s.seeds : 0.0;
  s.fault_rate_validated = s.validated > 0 ? static_cast<double>(s.validated_faults) / s.validated : 0.0;
  if (s.validated > 0) s.efficiency = static_cast<double>(s.seeds) / s.validated;
  if (!missing_embedding) s.diversity = mean_pairwise_diversity(embeddings);

  if (s.awaiting_annotation) s.flags.push_back("awaiting_annotation");
  if (s.missing > 0 && !s.awaiting_annotation) s.flags.push_back("missing_verdicts:" + std::to_string(s.missing));
  if (s.unresolved > 0) s.flags.push_back("unresolved:" + std::to_string(s.unresolved));
  if (s.incomplete > 0) s.flags.push_back("incomplete:" + std::to_string(s.incomplete));
  if (!s.diversity.defined) s.flags.push_back("diversity_undefined");
  if (missing_embedding) s.flags.push_back("missing_embeddings");
  if (embedders.size() > 1) s.flags.push_back("mixed_embedders");
  if (s.seeds == 0) s.flags.push_back("no_seeds");
  return s;
}

CampaignReport merge_verdicts(const std::vector<SettingLog>& logs, const std::vector<Verdict>& verdicts,
                              int required_annotators) {
  std::set<std::string> known;
  for (const auto& log : logs)
    for (const auto& f : log.frontiers) known.insert(f.candidate_image_id);

  std::set<std::string> dangling;
  std::map<std::string, std::vector<Verdict>> by_image;
  for (const auto& v : verdicts) {
    if (!known.count(v.image_id)) {
      dangling.insert(v.image_id);
      continue;
    }
    by_image[v.image_id].push_back(v);
  }
  if (!dangling.empty()) throw DanglingVerdicts({dangling.begin(), dangling.end()});

  CampaignReport report;
  for (const auto& log : logs) report.settings.push_back(aggregate_rates(log, by_image, required_annotators));
  return report;
}

std::string format_percent_sig3(std::int64_t num, std::int64_t den) {
  if (den <= 0 || num < 0) throw InvalidArgument("format_percent_sig3: need num >= 0 and den > 0");
  using i128 = __int128;
  const i128 scaled = static_cast<i128>(num) * 100;  // percent = scaled / den
  if (scaled == 0) return "0.00%";
  // Leading decimal exponent e of scaled/den.
  int e = 0;
  i128 p = 1;
  if (scaled >= static_cast<i128>(den)) {
    while (scaled >= p * 10 * den) {
      p *= 10;
      ++e;
    }
  } else {
    while (scaled * p < static_cast<i128>(den)) {
      p *= 10;
      --e;
    }
  }
  const int decimals = std::max(0, 2 - e);
  i128 pow10 = 1;
  for (int i = 0; i < decimals; ++i) pow10 *= 10;
  const i128 value = scaled * pow10 / den;
  std::string digits = std::to_string(static_cast<long long>(value));
  if (decimals == 0) return digits + "%";
  if (digits.size() < static_cast<std::size_t>(decimals) + 1) digits.insert(0, decimals + 1 - digits.size(), '0');
  const std::size_t point = digits.size() - decimals;
  std::string out = digits.substr(0, point) + "." + digits.substr(point);
  return out + "%";
}

std::string format_percent_int(std::int64_t num, std::int64_t den) {
  if (den <= 0 || num < 0) throw InvalidArgument("format_percent_int: need num >= 0 and den > 0");
  return std::to_string(num * 100 / den) + "%";
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> columns{
      "Dataset",   "Technique",  "Setting",    "Seeds",      "Human-val", "Human-Val. Rate",
      "Diversity", "Fault Rate", "Efficiency", "Fault Rate (validated)"};
  return columns;
}

std::vector<std::string> report_row(const SettingReport& s) {
  const std::string na = "n/a";
  return {s.dataset,
          s.technique,
          s.setting,
          std::to_string(s.seeds),
          std::to_string(s.validated),
          s.quota > 0 ? format_percent_int(s.validated, s.quota) : na,
          s.diversity.defined ? format_fixed(s.diversity.value, 3) : na,
          s.seeds > 0 ? format_percent_sig3(s.validated_faults, s.seeds) : na,
          s.efficiency ? format_fixed(*s.efficiency, 2) : na,
          s.validated > 0 ? format_percent_sig3(s.validated_faults, s.validated) : na};
}

namespace {

// Display width in code points (labels contain "ψ").
std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char ch : s)
    if ((ch & 0xC0) != 0x80) ++n;
  return n;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string render_text(const CampaignReport& report) {
  std::vector<std::vector<std::string>> rows{report_columns()};
  for (const auto& s : report.settings) rows.push_back(report_row(s));
  std::vector<std::size_t> width(report_columns().size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], display_width(row[i]));

  std::ostringstream out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      const std::string& cell = rows[r][i];
      const std::string pad(width[i] - display_width(cell), ' ');
      if (i > 0) out << "  ";
      // Text columns left-aligned, numbers right-aligned.
      if (i < 3) {
        out << cell << (i + 1 < rows[r].size() ? pad : "");
      } else {
        out << pad << cell;
      }
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    }
  }
  for (const auto& s : report.settings)
    if (!s.flags.empty()) {
      out << "# " << s.dataset << " / " << s.technique << " / " << s.setting << ":";
      for (const auto& f : s.flags) out << ' ' << f;
      out << '\n';
    }
  return out.str();
}

std::string render_csv(const CampaignReport& report) {
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_field(cells[i]);
    out << '\n';
  };
  line(report_columns());
  for (const auto& s : report.settings) line(report_row(s));
  return out.str();
}

nlohmann::json report_to_json(const CampaignReport& report) {
  nlohmann::json settings = nlohmann::json::array();
  for (const auto& s : report.settings) {
    nlohmann::json j = {{"dataset", s.dataset},
                        {"technique", s.technique},
                        {"setting", s.setting},
                        {"key", s.key},
                        {"seeds", s.seeds},
                        {"frontiers", s.frontiers},
                        {"salvaged", s.salvaged},
                        {"annotated", s.annotated},
                        {"validated", s.validated},
                        {"validated_faults", s.validated_faults},
                        {"unresolved", s.unresolved},
                        {"incomplete", s.incomplete},
                        {"missing", s.missing},
                        {"quota", s.quota},
                        {"human_val_rate", s.human_val_rate},
                        {"diversity", s.diversity.defined ? nlohmann::json(s.diversity.value) : nlohmann::json()},
                        {"diversity_pairs", s.diversity.pairs},
                        {"fault_rate", s.fault_rate},
                        {"fault_rate_validated", s.fault_rate_validated},
                        {"efficiency", s.efficiency ? nlohmann::json(*s.efficiency) : nlohmann::json()},
                        {"awaiting_annotation", s.awaiting_annotation},
                        {"flags", s.flags}};
    const auto row = report_row(s);
    nlohmann::json printed = nlohmann::json::object();
    for (std::size_t i = 3; i < row.size(); ++i) printed[report_columns()[i]] = row[i];
    j["printed"] = printed;
    settings.push_back(std::move(j));
  }
  return {{"schema_version", kReportSchemaVersion},
          {"denominators",
           {{"human_val_rate", "validated / quota"},
            {"fault_rate", "validated fault-revealing / seeds consumed"},
            {"fault_rate_validated", "validated fault-revealing / validated"},
            {"efficiency", "seeds consumed / validated"},
            {"diversity", "mean pairwise embedding distance over validated candidates"}}},
          {"settings", settings},
          {"provenance", report.provenance}};
}

}  // namespace truncgen
