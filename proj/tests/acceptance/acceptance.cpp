// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "published_rows.hpp"
#include "truncgen/annotation.hpp"
#include "truncgen/campaign.hpp"
#include "truncgen/gates.hpp"
#include "truncgen/metrics.hpp"
#include "truncgen/search.hpp"
#include "truncgen/toy_world.hpp"

namespace fs = std::filesystem;
using namespace truncgen;

namespace {

nlohmann::json load(const std::string& rel) {
  std::ifstream in(fs::path(TRUNCGEN_FIXTURES) / rel);
  if (!in) throw std::runtime_error("missing fixture " + rel);
  return nlohmann::json::parse(in);
}

Eigen::VectorXd vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Image image(const nlohmann::json& shape, const nlohmann::json& pixels) {
  Image img(ImageShape{shape[0].get<int>(), shape[1].get<int>(), shape[2].get<int>()});
  const auto v = pixels.get<std::vector<double>>();
  for (std::size_t i = 0; i < v.size(); ++i) img.pixels[static_cast<Eigen::Index>(i)] = v[i];
  return img;
}

/// Outcome of one criterion: pass flag plus a short measured summary.
struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) detail = "first failure: " + what;
    ok = ok && cond;
  }
};

struct Criterion {
  std::string name;
  double budget_s;  // 0: no runtime bound
  std::function<Check()> run;
};

struct Toy {
  ToyGenerator gen;
  ToyClassifier clf;
  Renderer renderer{gen, estimate_class_mean_styles(gen, 10000, mean_style_seed(0))};
};

const Toy& toy() {
  static const Toy t;
  return t;
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream ss;
  ss.precision(prec);
  ss << v;
  return ss.str();
}

Check truncation_algebra() {
  Check c;
  std::mt19937_64 e(20240601);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int layers = 1 + static_cast<int>(e() % 8);
    const int dim = 1 + static_cast<int>(e() % 16);
    const int cutoff = 1 + static_cast<int>(e() % layers);
    StyleCode w(layers, dim);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(e);
    MeanStyle mean{StyleVector(dim), 1};
    for (int i = 0; i < dim; ++i) mean.w_bar[i] = 0.5 * n(e);
    const double a = u(e), b = u(e);

    c.require(truncate(w, mean, 1.0, cutoff) == w, "psi=1 not bitwise identity");
    const StyleCode t = truncate(w, mean, a, cutoff);
    c.require(t.bottomRows(layers - cutoff) == w.bottomRows(layers - cutoff), "rows past cutoff changed");
    for (int r = 0; r < cutoff; ++r) {
      const double before = (w.row(r) - mean.w_bar.transpose()).norm();
      const double after = (t.row(r) - mean.w_bar.transpose()).norm();
      if (before < 1e-12) continue;
      const double err = std::abs(after / before - a);
      worst = std::max(worst, err);
      c.require(err <= 1e-9, "contraction ratio off by " + fmt(err));
    }
    const StyleCode nested = truncate(t, mean, b, cutoff);
    const StyleCode direct = truncate(w, mean, a * b, cutoff);
    const double err = (nested - direct).cwiseAbs().maxCoeff();
    worst = std::max(worst, err);
    c.require(err <= 1e-9, "nesting off by " + fmt(err));
  }
  if (c.ok) c.detail = "1000 cases, max deviation " + fmt(worst);
  return c;
}

Check style_mix_oracle() {
  Check c;
  const auto fx = load("style_mix.json");
  const auto& t = toy();
  const SearchContext ctx{t.renderer, t.clf, GateConfig{}, fx["cutoff"]};
  const double tol = std::ldexp(1.0, -fx["steps"].get<int>());
  double worst = 0.0;
  for (const auto& cs : fx["cases"]) {
    const LatentSeed seed = make_seed(0, cs["class"], cs["seed_id"].get<std::int64_t>(), t.gen.latent_dim());
    StyleMixParams p;
    p.budgets = {cs["budget"].get<double>()};
    p.top_k = fx["top_k"];
    p.steps = fx["steps"];
    p.layers = {0, 1};
    const auto fr = style_mix_search(ctx, seed, p).frontiers();
    c.require(fr.size() == 1, "seed " + cs["seed_id"].dump() + " gave " + std::to_string(fr.size()) + " frontiers");
    if (fr.size() != 1) continue;
    const double err = std::abs(*fr[0].record.lambda - cs["lambda_star"].get<double>());
    worst = std::max(worst, err);
    c.require(err <= tol, "lambda off by " + fmt(err));
    c.require(*fr[0].record.rival == cs["rival"].get<int>(), "rival differs");
    c.require(fr[0].record.screen.passed, "frontier did not pass the screen");
  }
  if (c.ok) c.detail = std::to_string(fx["cases"].size()) + " seeds, max |dlambda| " + fmt(worst) + " <= " + fmt(tol);
  return c;
}

Check first_flip_oracle() {
  Check c;
  const auto fx = load("first_flip.json");
  const auto& t = toy();
  const SearchContext ctx{t.renderer, t.clf, GateConfig{}, fx["cutoff"]};
  const auto schedule = fx["schedule"].get<std::vector<double>>();
  c.require(schedule == adaptive_schedule(), "fixture schedule differs from the adaptive preset");
  int matched = 0, flips = 0;
  for (const auto& cs : fx["cases"]) {
    const LatentSeed seed = make_seed(0, cs["class"], cs["seed_id"].get<std::int64_t>(), t.gen.latent_dim());
    const FirstFlipResult r = first_flip_search(ctx, seed, schedule);
    const std::string expected = cs["expected"];
    bool ok;
    if (expected == "skip") {
      ok = r.skipped && !r.frontier;
    } else if (expected == "none") {
      ok = !r.skipped && !r.frontier && r.rendered == schedule;
    } else {
      const double star = cs["psi_star"];
      ++flips;
      ok = r.frontier && *r.frontier->record.psi_star == star;
      for (double psi : r.rendered) {
        c.require(psi >= star, "render below psi* for seed " + cs["seed_id"].dump());
        ok = ok && psi >= star;
      }
    }
    matched += ok;
    c.require(ok, "seed " + cs["seed_id"].dump() + " disagrees with the exhaustive oracle");
  }
  if (c.ok)
    c.detail = std::to_string(matched) + "/" + std::to_string(fx["cases"].size()) + " seeds match (" +
               std::to_string(flips) + " flips), no renders below psi*";
  return c;
}

Check salvage_points() {
  Check c;
  const auto fx = load("salvage.json");
  const ToyGenerator gen;
  const ToyClassifier clf;
  const auto schedule = fx["schedule"].get<std::vector<double>>();
  std::set<double> recovered;
  bool floor_discard = false;
  for (const auto& cs : fx["cases"]) {
    std::vector<MeanStyle> means;
    for (const auto& m : cs["means"]) means.push_back(MeanStyle{vec(m), 1});
    const Renderer renderer(gen, means);
    const SearchContext ctx{renderer, clf, GateConfig{}, fx["cutoff"]};
    const SalvageResult r = adaptive_salvage(ctx, LatentSeed{cs["seed_id"], vec(cs["z"]), cs["class"]}, schedule);
    if (cs["psi_star"].is_null()) {
      c.require(!r.psi_star && r.attempts.size() == schedule.size() && r.attempts.back().psi == 0.5,
                "seed failing at the floor was not discarded");
      floor_discard = !r.psi_star;
    } else {
      const double want = cs["psi_star"];
      c.require(r.psi_star && *r.psi_star == want, "expected psi*=" + fmt(want));
      if (r.psi_star && *r.psi_star == want) recovered.insert(want);
    }
  }
  c.require(recovered.size() == schedule.size(), "not every schedule point was recovered");
  c.require(floor_discard, "no floor case");
  if (c.ok) c.detail = std::to_string(recovered.size()) + "/9 schedule points recovered, floor case discarded";
  return c;
}

Check gate_thresholds() {
  Check c;
  const GateConfig g;
  const Prediction p = make_prediction(Eigen::Vector3d(0.1, 0.85, 0.05));
  auto passes = [&](double s, double l) {
    return decide_screen(SimilarityReading{s, l}, p, 0, g, CandidateKind::IntendedFlip).passed;
  };
  c.require(passes(0.95, 0.2), "exact 0.95/0.2 rejected");
  c.require(!passes(std::nextafter(0.95, 0.0), 0.2), "ssim just below 0.95 accepted");
  c.require(!passes(0.95, std::nextafter(0.2, 1.0)), "l2 just above 0.2 accepted");
  c.require(passes(1.0, 0.0), "perfect reading rejected");
  std::mt19937_64 e(7);
  std::uniform_real_distribution<double> us(0.85, 1.0), ul(0.0, 0.35), step(0.0, 0.05);
  for (int k = 0; k < 10000; ++k) {
    const double s = us(e), l = ul(e);
    const bool pass = passes(s, l);
    c.require(pass == (s >= 0.95 && l <= 0.2), "reading (" + fmt(s) + ", " + fmt(l) + ") misjudged");
    if (pass) {
      const double s2 = std::min(1.0, s + step(e)), l2v = std::max(0.0, l - step(e));
      c.require(passes(s2, l2v), "improving a passing reading made it fail");
    }
  }
  if (c.ok) c.detail = "closed boundaries hold, 10000 readings monotone";
  return c;
}

Check metric_correctness() {
  Check c;
  std::mt19937_64 e(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random_image = [&](ImageShape s) {
    Image x(s);
    for (Eigen::Index i = 0; i < x.pixels.size(); ++i) x.pixels[i] = u(e);
    return x;
  };
  for (ImageShape s : {ImageShape{32, 32, 1}, ImageShape{28, 28, 1}, ImageShape{32, 32, 3}, ImageShape{5, 13, 3}}) {
    const Image x = random_image(s);
    c.require(ssim(x, x) == 1.0, "ssim(x, x) != 1 for " + to_string(s));
  }
  for (int k = 0; k < 1000; ++k) {
    const ImageShape s{8 + static_cast<int>(e() % 9), 8 + static_cast<int>(e() % 9), e() % 2 ? 3 : 1};
    const Image x = random_image(s), y = random_image(s), z = random_image(s);
    c.require(l2(x, x) == 0.0, "l2(x, x) != 0");
    c.require(l2(x, y) >= 0.0, "negative l2");
    c.require(std::abs(l2(x, y) - l2(y, x)) <= 1e-9, "l2 not symmetric");
    c.require(l2(x, z) <= l2(x, y) + l2(y, z) + 1e-9, "triangle inequality violated");
  }
  const auto fx = load("ssim_pairs.json");
  double worst = 0.0;
  for (const auto& p : fx["pairs"]) {
    const double err = std::abs(ssim(image(p["shape"], p["x"]), image(p["shape"], p["y"])) - p["ssim"].get<double>());
    worst = std::max(worst, err);
    c.require(err <= 1e-3, "ssim pair " + p["kind"].get<std::string>() + " off by " + fmt(err));
  }
  if (c.ok) c.detail = "1000 l2 triples, 20 SSIM pairs max deviation " + fmt(worst);
  return c;
}

Check report_arithmetic() {
  Check c;
  const fs::path root = fs::path(TRUNCGEN_FIXTURES) / "published";
  std::vector<fs::path> dirs;
  for (const auto& d : fs::directory_iterator(root))
    if (d.is_directory()) dirs.push_back(d.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<SettingLog> logs;
  for (const auto& d : dirs)
    for (auto& s : load_run(d).settings) logs.push_back(std::move(s));
  const CampaignReport r = merge_verdicts(logs, load_verdict_file(root / "verdicts.json"));
  int matched = 0;
  for (const auto& want : tgtest::published_rows()) {
    const SettingReport* found = nullptr;
    for (const auto& s : r.settings)
      if (s.dataset == want.dataset && s.setting == want.setting) found = &s;
    c.require(found != nullptr, "missing row " + want.dataset + " " + want.setting);
    if (!found) continue;
    const auto row = report_row(*found);
    const std::vector<std::string> got(row.begin() + 3, row.begin() + 8);
    const std::vector<std::string> printed{want.seeds, want.validated, want.rate, want.diversity, want.fault_rate};
    c.require(got == printed, want.dataset + " " + want.setting + " printed differently");
    matched += got == printed;
  }
  if (c.ok)
    c.detail = std::to_string(matched) + "/" + std::to_string(tgtest::published_rows().size()) + " rows reproduced";
  return c;
}

struct ToyRuns {
  RunResult first, second;
};

CampaignConfig toy_campaign(const fs::path& out) {
  CampaignConfig cfg;
  cfg.technique = Technique::StyleMix;
  cfg.mode = TruncationMode::Fixed;
  cfg.psis = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5};
  cfg.seeds_per_class = 30;
  cfg.max_batches = 4;
  cfg.quota = 25;
  cfg.rng_seed = 0;
  cfg.output_dir = out.string();
  return cfg;
}

const fs::path& scratch() {
  static const fs::path p = fs::temp_directory_path() / ("truncgen_acceptance_" + std::to_string(::getpid()));
  return p;
}

std::optional<ToyRuns>& toy_runs() {
  static std::optional<ToyRuns> runs;
  return runs;
}

Check determinism() {
  Check c;
  CampaignConfig a = toy_campaign(scratch() / "a");
  CampaignConfig b = toy_campaign(scratch() / "b");
  ToyRuns runs{run_campaign(a), run_campaign(b)};
  c.require(!runs.first.log_digest.empty(), "empty digest");
  c.require(runs.first.log_digest == runs.second.log_digest, "log digests differ");
  c.require(compute_log_digest(a.output_dir) == runs.first.log_digest, "digest not recomputable from disk");
  if (c.ok) c.detail = "digest " + runs.first.log_digest.substr(0, 16) + " on both runs";
  toy_runs() = std::move(runs);
  return c;
}

Check diversity_trend() {
  Check c;
  if (!toy_runs()) {
    c.require(false, "toy campaign did not run");
    return c;
  }
  const LoadedRun run = load_run(toy_runs()->first.dir);
  std::vector<double> values;
  for (const std::string key : {"none", "psi_090", "psi_080", "psi_070", "psi_060", "psi_050"}) {
    const SettingLog* log = nullptr;
    for (const auto& s : run.settings)
      if (s.key == key) log = &s;
    c.require(log != nullptr, "no setting " + key);
    if (!log) return c;
    std::vector<Eigen::VectorXd> emb;
    for (const auto& f : log->frontiers) emb.push_back(vec(nlohmann::json(f.embedding)));
    const Diversity d = mean_pairwise_diversity(emb);
    c.require(d.defined, "fewer than two frontiers in " + key);
    values.push_back(d.value);
  }
  int inversions = 0;
  for (std::size_t i = 1; i < values.size(); ++i) inversions += values[i] > values[i - 1];
  std::string series;
  for (double v : values) series += (series.empty() ? "" : " ") + fmt(v);
  c.require(inversions <= 1, std::to_string(inversions) + " inversions in [" + series + "]");
  if (c.ok) c.detail = "diversity psi 1.0..0.5: [" + series + "], " + std::to_string(inversions) + " inversion(s)";
  return c;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"truncation-algebra", 5, truncation_algebra},
      {"style-mix-vs-grid-oracle", 30, style_mix_oracle},
      {"first-flip-vs-exhaustive-oracle", 30, first_flip_oracle},
      {"adaptive-salvage-schedule-points", 0, salvage_points},
      {"gate-thresholds", 0, gate_thresholds},
      {"metric-correctness", 0, metric_correctness},
      {"report-arithmetic", 5, report_arithmetic},
      {"determinism", 120, determinism},
      {"toy-diversity-trend", 0, diversity_trend},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Check c;
    try {
      c = cr.run();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.budget_s > 0 && secs >= cr.budget_s) {
      c.ok = false;
      c.detail += " (runtime over " + fmt(cr.budget_s) + " s)";
    }
    failed += !c.ok;
    std::printf("%s %s: %s [%.2f s]\n", c.ok ? "PASS" : "FAIL", cr.name.c_str(), c.detail.c_str(), secs);
  }
  std::error_code ec;
  fs::remove_all(scratch(), ec);
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
