#include <gtest/gtest.h>

#include <algorithm>

#include "support.hpp"
#include "published_rows.hpp"
#include "truncgen/annotation.hpp"
#include "truncgen/campaign.hpp"
#include "truncgen/report.hpp"

using namespace truncgen;

namespace {

Verdict verdict(const std::string& image, const std::string& who, bool yes, bool consensus = false,
                std::int64_t seq = 0) {
  Verdict v;
  v.image_id = image;
  v.annotator_id = who;
  v.answer = yes;
  v.consensus = consensus;
  v.sequence = seq;
  return v;
}

FrontierRecord frontier(const std::string& id, int cls, int predicted) {
  FrontierRecord f;
  f.class_label = cls;
  f.candidate_image_id = id;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
  p[predicted] = 1.0;
  f.screen.prediction = make_prediction(p);
  f.embedding = {static_cast<double>(cls), 1.0};
  f.embedder_id = "e";
  return f;
}

SeedUsage usage(std::int64_t seed, int cls) {
  SeedUsage u;
  u.seed_id = seed;
  u.class_label = cls;
  return u;
}

std::vector<SettingLog> published_logs() {
  std::vector<SettingLog> logs;
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(tgtest::fixture("published")))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs)
    for (auto& s : load_run(d).settings) logs.push_back(std::move(s));
  return logs;
}

const SettingReport& find(const CampaignReport& r, const std::string& dataset, const std::string& setting) {
  for (const auto& s : r.settings)
    if (s.dataset == dataset && s.setting == setting) return s;
  throw std::runtime_error("row not found: " + dataset + " / " + setting);
}

}  // namespace

TEST(Resolve, ConsensusRule) {
  EXPECT_EQ(resolve({}), Resolution::Missing);
  EXPECT_EQ(resolve({verdict("a", "x", true)}), Resolution::Incomplete);
  EXPECT_EQ(resolve({verdict("a", "x", true), verdict("a", "y", true)}), Resolution::Valid);
  EXPECT_EQ(resolve({verdict("a", "x", false), verdict("a", "y", false)}), Resolution::Invalid);
  EXPECT_EQ(resolve({verdict("a", "x", true), verdict("a", "y", false)}), Resolution::Unresolved);
  EXPECT_EQ(resolve({verdict("a", "x", true, false, 0), verdict("a", "y", false, false, 1),
                     verdict("a", "y", true, true, 2)}),
            Resolution::Valid);
  EXPECT_EQ(resolve({verdict("a", "x", true, true, 5), verdict("a", "y", false, true, 6)}), Resolution::Invalid);
  EXPECT_EQ(resolve({verdict("a", "x", true)}, 1), Resolution::Valid);
}

TEST(Report, PercentFormatting) {
  EXPECT_EQ(format_percent_sig3(12, 518), "2.31%");
  EXPECT_EQ(format_percent_sig3(25, 93), "26.8%");
  EXPECT_EQ(format_percent_sig3(15, 161), "9.31%");
  EXPECT_EQ(format_percent_sig3(16, 118), "13.5%");
  EXPECT_EQ(format_percent_sig3(19, 499), "3.80%");
  EXPECT_EQ(format_percent_sig3(1, 2), "50.0%");
  EXPECT_EQ(format_percent_sig3(2, 2), "100%");
  EXPECT_EQ(format_percent_sig3(0, 7), "0.00%");
  EXPECT_EQ(format_percent_sig3(1, 3000), "0.0333%");
  EXPECT_EQ(format_percent_int(15, 25), "60%");
  EXPECT_EQ(format_percent_int(11, 25), "44%");
  EXPECT_EQ(format_fixed(0.2524, 3), "0.252");
  EXPECT_THROW(format_percent_sig3(1, 0), InvalidArgument);
}

TEST(Report, TwoSeedsBothValidatedOneFault) {
  SettingLog log;
  log.quota = 2;
  log.seeds = {usage(0, 0), usage(1, 1)};
  log.frontiers = {frontier("i0", 0, 2), frontier("i1", 1, 1)};
  const std::vector<Verdict> vs{verdict("i0", "a", true), verdict("i0", "b", true), verdict("i1", "a", true),
                                verdict("i1", "b", true)};
  const CampaignReport r = merge_verdicts({log}, vs);
  const auto row = report_row(r.settings[0]);
  EXPECT_EQ(row[4], "2");
  EXPECT_EQ(row[5], "100%");
  EXPECT_EQ(row[7], "50.0%");
  EXPECT_EQ(row[8], "1.00");
  EXPECT_TRUE(r.settings[0].flags.empty());
}

TEST(Report, EmptyRecordSetIsZeroFilledAndFlagged) {
  SettingLog log;
  const SettingReport s = aggregate_rates(log, {});
  EXPECT_EQ(s.seeds, 0);
  EXPECT_EQ(s.validated, 0);
  EXPECT_EQ(s.human_val_rate, 0.0);
  EXPECT_FALSE(s.efficiency.has_value());
  EXPECT_TRUE(s.awaiting_annotation);
  for (const char* f : {"awaiting_annotation", "diversity_undefined", "no_seeds"})
    EXPECT_NE(std::find(s.flags.begin(), s.flags.end(), f), s.flags.end()) << f;
  const auto row = report_row(s);
  EXPECT_EQ(row[6], "n/a");
  EXPECT_EQ(row[7], "n/a");
}

TEST(Report, ZeroVerdictsAwaitAnnotation) {
  auto logs = published_logs();
  const CampaignReport r = merge_verdicts(logs, {});
  ASSERT_EQ(r.settings.size(), 24u);
  for (const auto& s : r.settings) {
    EXPECT_TRUE(s.awaiting_annotation);
    EXPECT_EQ(s.flags.front(), "awaiting_annotation");
  }
}

TEST(Report, SplitWithoutConsensusIsInvalidAndFlagged) {
  SettingLog log;
  log.seeds = {usage(0, 0)};
  log.frontiers = {frontier("i0", 0, 1)};
  const CampaignReport r = merge_verdicts({log}, {verdict("i0", "a", true), verdict("i0", "b", false)});
  EXPECT_EQ(r.settings[0].validated, 0);
  EXPECT_EQ(r.settings[0].unresolved, 1);
  EXPECT_NE(std::find(r.settings[0].flags.begin(), r.settings[0].flags.end(), "unresolved:1"),
            r.settings[0].flags.end());
}

TEST(Report, DanglingVerdictsListed) {
  SettingLog log;
  log.frontiers = {frontier("i0", 0, 1)};
  try {
    merge_verdicts({log}, {verdict("i0", "a", true), verdict("ghost2", "a", true), verdict("ghost1", "b", false)});
    FAIL() << "expected DanglingVerdicts";
  } catch (const DanglingVerdicts& e) {
    EXPECT_EQ(e.ids(), (std::vector<std::string>{"ghost1", "ghost2"}));
  }
}

TEST(Report, DistinctSeedClassPairsCounted) {
  SettingLog log;
  log.seeds = {usage(0, 0), usage(0, 0), usage(0, 1), usage(3, 1)};
  EXPECT_EQ(aggregate_rates(log, {}).seeds, 3);
}

TEST(Report, SpotRowsFromFixture) {
  const CampaignReport r = merge_verdicts(published_logs(), load_verdict_file(tgtest::fixture("published/verdicts.json")));
  struct Spot {
    std::string dataset, setting;
    std::vector<std::string> want;
  };
  const std::vector<Spot> spots{
      {"MNIST", "Adaptive", {"161", "15", "60%", "0.252", "9.31%"}},
      {"Fashion MNIST", "Gradual trunc.", {"93", "25", "100%", "0.227", "26.8%"}},
      {"CIFAR-10", "ψ=0.5", {"118", "16", "64%", "0.338", "13.5%"}},
  };
  for (const auto& s : spots) {
    const auto row = report_row(find(r, s.dataset, s.setting));
    EXPECT_EQ(std::vector<std::string>(row.begin() + 3, row.begin() + 8), s.want) << s.dataset << " " << s.setting;
  }
}

TEST(Report, EveryPublishedRowReproduced) {
  const CampaignReport r = merge_verdicts(published_logs(), load_verdict_file(tgtest::fixture("published/verdicts.json")));
  for (const auto& t : tgtest::published_rows()) {
    const auto row = report_row(find(r, t.dataset, t.setting));
    EXPECT_EQ(row[3], t.seeds) << t.dataset << " " << t.setting;
    EXPECT_EQ(row[4], t.validated) << t.dataset << " " << t.setting;
    EXPECT_EQ(row[5], t.rate) << t.dataset << " " << t.setting;
    EXPECT_EQ(row[6], t.diversity) << t.dataset << " " << t.setting;
    EXPECT_EQ(row[7], t.fault_rate) << t.dataset << " " << t.setting;
  }
}

TEST(Report, RenderedFormsAgree) {
  const CampaignReport r = merge_verdicts(published_logs(), load_verdict_file(tgtest::fixture("published/verdicts.json")));
  const std::string csv = render_csv(r);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 25);
  EXPECT_NE(csv.find("Fashion MNIST,Truncation-Only,Gradual trunc.,93,25,100%,0.227,26.8%,3.72,100%"),
            std::string::npos);
  const std::string text = render_text(r);
  EXPECT_NE(text.find("0.252"), std::string::npos);
  const nlohmann::json j = report_to_json(r);
  EXPECT_EQ(j["settings"].size(), 24u);
}

TEST(Verdict, JsonRoundTripAndValidation) {
  const Verdict v = verdict("img_1", "ann", true, true, 7);
  const Verdict back = nlohmann::json(v).get<Verdict>();
  EXPECT_EQ(back.image_id, "img_1");
  EXPECT_TRUE(back.answer);
  EXPECT_TRUE(back.consensus);
  EXPECT_EQ(back.sequence, 7);
  EXPECT_THROW((nlohmann::json{{"schema_version", 2}, {"image_id", "a"}, {"annotator", "b"}, {"answer", "yes"}}
                    .get<Verdict>()),
               InvalidArgument);
  EXPECT_THROW((nlohmann::json{{"schema_version", 1}, {"image_id", "a"}, {"annotator", "b"}, {"answer", "maybe"}}
                    .get<Verdict>()),
               InvalidArgument);
  EXPECT_THROW(verdicts_from_json(nlohmann::json::object()), InvalidArgument);
}

TEST(Verdict, FileAcceptsArrayAndJsonLines) {
  tgtest::TempDir dir;
  const Verdict v = verdict("img_1", "ann", false, false, 3);
  write_text(dir / "a.json", nlohmann::json::array({nlohmann::json(v)}).dump());
  write_text(dir / "b.jsonl", nlohmann::json(v).dump() + "\n\n" + nlohmann::json(v).dump() + "\n");
  EXPECT_EQ(load_verdict_file(dir / "a.json").size(), 1u);
  EXPECT_EQ(load_verdict_file(dir / "b.jsonl").size(), 2u);
  write_text(dir / "c.jsonl", nlohmann::json(v).dump() + "\n{oops\n");
  try {
    load_verdict_file(dir / "c.jsonl");
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
  EXPECT_THROW(load_verdict_file(dir / "missing.json"), NotFound);
}
