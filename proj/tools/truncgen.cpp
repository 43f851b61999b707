// truncgen: campaign runner, report builder, truncation sweep and
// annotation server.

#include <atomic>
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "truncgen/annotation.hpp"
#include "truncgen/campaign.hpp"
#include "truncgen/errors.hpp"
#include "truncgen/search.hpp"

namespace fs = std::filesystem;
using namespace truncgen;

namespace {

std::atomic<bool> g_cancel{false};
AnnotationServer* g_server = nullptr;

void on_signal(int) {
  g_cancel.store(true);
  if (g_server) g_server->stop();
}

struct GenerateArgs {
  std::string config;
  std::string technique;
  std::string mode;
  std::vector<double> psis;
  std::optional<int> cutoff;
  std::optional<int> seeds_per_class;
  std::optional<int> max_batches;
  std::optional<int> quota;
  std::string out;
  std::optional<int> workers;
  std::optional<std::uint64_t> rng_seed;
  bool quiet = false;
};

void add_config_options(CLI::App* cmd, GenerateArgs& a) {
  cmd->add_option("-c,--config", a.config, "campaign config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--technique", a.technique, "style_mix or first_flip")
      ->check(CLI::IsMember({"style_mix", "first_flip"}));
  cmd->add_option("--mode", a.mode, "truncation mode")->check(CLI::IsMember({"none", "fixed", "adaptive"}));
  cmd->add_option("--psi", a.psis, "fixed truncation levels")->delimiter(',');
  cmd->add_option("--cutoff", a.cutoff, "truncate layers below this index");
  cmd->add_option("--seeds-per-class", a.seeds_per_class, "seeds per class in each draw batch");
  cmd->add_option("--max-batches", a.max_batches, "draw batches before giving up on the quota");
  cmd->add_option("--quota", a.quota, "frontiers collected per setting");
  cmd->add_option("-o,--out", a.out, "output directory");
  cmd->add_option("--workers", a.workers, "worker threads (0: all cores)");
  cmd->add_option("--rng-seed", a.rng_seed, "campaign seed");
}

CampaignConfig resolve_config(const GenerateArgs& a) {
  CampaignConfig cfg = a.config.empty() ? CampaignConfig{} : load_config(a.config);
  if (!a.technique.empty()) cfg.technique = technique_from_string(a.technique);
  if (!a.mode.empty()) cfg.mode = truncation_mode_from_string(a.mode);
  if (!a.psis.empty()) cfg.psis = a.psis;
  if (a.cutoff) cfg.cutoff = a.cutoff;
  if (a.seeds_per_class) cfg.seeds_per_class = *a.seeds_per_class;
  if (a.max_batches) cfg.max_batches = *a.max_batches;
  if (a.quota) cfg.quota = *a.quota;
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (a.workers) cfg.workers = *a.workers;
  if (a.rng_seed) cfg.rng_seed = *a.rng_seed;
  cfg.validate();
  return cfg;
}

int cmd_generate(const GenerateArgs& a) {
  const CampaignConfig cfg = resolve_config(a);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  RunHooks hooks;
  hooks.cancel = &g_cancel;
  if (!a.quiet) hooks.progress = [](const std::string& m) { std::cerr << "[truncgen] " << m << '\n'; };
  const RunResult r = run_campaign(cfg, hooks);
  std::cout << render_text(r.report);
  std::cout << "log digest: " << r.log_digest << '\n';
  std::cout << "output: " << r.dir.string() << '\n';
  if (r.interrupted) {
    std::cerr << "interrupted; partial logs flushed\n";
    return 130;
  }
  return 0;
}

struct ReportArgs {
  std::vector<std::string> runs;
  std::string verdicts;
  std::string csv;
  std::string json;
  int required = 2;
};

int cmd_report(const ReportArgs& a) {
  std::vector<SettingLog> logs;
  for (const auto& dir : a.runs) {
    auto run = load_run(dir);
    for (auto& s : run.settings) logs.push_back(std::move(s));
  }
  std::vector<Verdict> verdicts;
  if (!a.verdicts.empty()) verdicts = load_verdict_file(a.verdicts);
  CampaignReport report;
  try {
    report = merge_verdicts(logs, verdicts, a.required);
  } catch (const DanglingVerdicts& e) {
    std::cerr << "error: " << e.ids().size() << " verdict(s) reference unknown images:\n";
    for (const auto& id : e.ids()) std::cerr << "  " << id << '\n';
    return 1;
  }
  std::cout << render_text(report);
  if (!a.csv.empty()) write_text(a.csv, render_csv(report));
  if (!a.json.empty()) write_text(a.json, dump_json(report_to_json(report)));
  return 0;
}

struct SweepArgs {
  GenerateArgs cfg;
  int class_label = 0;
  std::int64_t seed_id = 0;
  std::vector<double> psis{1.0, 0.9, 0.8, 0.7, 0.6, 0.5};
  std::vector<int> cutoffs;
  std::string png = "sweep.png";
};

int cmd_sweep(const SweepArgs& a) {
  const CampaignConfig cfg = resolve_config(a.cfg);
  const Backends b = load_backends(cfg);
  const GeneratorBackend& gen = *b.generator;
  if (a.class_label < 0 || a.class_label >= gen.num_classes()) throw InvalidArgument("--class out of range");
  std::vector<int> cutoffs = a.cutoffs;
  if (cutoffs.empty()) cutoffs.push_back(gen.num_layers());
  const Renderer renderer(gen, estimate_class_mean_styles(gen, cfg.mean_style_samples, mean_style_seed(cfg.rng_seed)));
  const LatentSeed seed = make_seed(cfg.rng_seed, a.class_label, a.seed_id, gen.latent_dim());
  const SweepGrid grid = truncation_sweep(renderer, seed, a.psis, cutoffs);
  write_png(tile_images(grid.images), a.png);
  std::cout << "rows (cutoff):";
  for (int c : grid.cutoffs) std::cout << ' ' << c;
  std::cout << "\ncolumns (psi):";
  for (double p : grid.psis) std::cout << ' ' << p;
  std::cout << "\nwrote " << a.png << '\n';
  return 0;
}

struct ServeArgs {
  std::vector<std::string> runs;
  std::string tokens;
  std::string log = "annotation/verdicts.jsonl";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::uint64_t shuffle_seed = 0;
  int required = 2;
  bool include_sources = false;
  std::string ui_dir;
  std::string session;
};

int cmd_serve(const ServeArgs& a) {
  // tokens file: {"<annotator id>": "<bearer token>", ...}
  const nlohmann::json tj = read_json(a.tokens);
  if (!tj.is_object()) throw InvalidArgument("tokens file must map annotator ids to tokens");
  std::map<std::string, std::string> tokens;
  for (const auto& [annotator, token] : tj.items()) {
    if (!tokens.emplace(token.get<std::string>(), annotator).second)
      throw InvalidArgument("token shared by more than one annotator");
  }
  std::vector<fs::path> runs(a.runs.begin(), a.runs.end());
  AnnotationStore store(annotation_items_from_runs(runs, a.include_sources), tokens, a.log, a.shuffle_seed,
                        a.required);
  if (!a.session.empty()) write_text(a.session, dump_json(store.session_json()));
  ServerOptions opts;
  opts.host = a.host;
  opts.port = a.port;
  opts.ui_dir = a.ui_dir;
  AnnotationServer server(store, opts);
  const int port = server.bind();
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "serving " << store.size() << " images on http://" << a.host << ':' << port << '\n';
  server.serve();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"truncation-guided frontier generation"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "run a campaign and write logs, images and a report");
  add_config_options(generate, gen);
  generate->add_flag("-q,--quiet", gen.quiet, "no progress messages");

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "merge run logs with verdicts into the results table");
  report->add_option("runs", rep.runs, "run directories")->required()->check(CLI::ExistingDirectory);
  report->add_option("--verdicts", rep.verdicts, "verdict export or log")->check(CLI::ExistingFile);
  report->add_option("--csv", rep.csv, "write the table as CSV");
  report->add_option("--json", rep.json, "write the report as JSON");
  report->add_option("--required-annotators", rep.required, "annotators needed per image");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "render one seed over a psi x cutoff grid");
  add_config_options(sweep, sw.cfg);
  sweep->add_option("--class", sw.class_label, "seed class");
  sweep->add_option("--seed-id", sw.seed_id, "seed index within the class");
  sweep->add_option("--psis", sw.psis, "grid columns")->delimiter(',');
  sweep->add_option("--cutoffs", sw.cutoffs, "grid rows (default: every layer)")->delimiter(',');
  sweep->add_option("--png", sw.png, "output image");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "blind annotation service over run directories");
  serve->add_option("runs", sv.runs, "run directories")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--tokens", sv.tokens, "JSON map of annotator id to bearer token")
      ->required()
      ->check(CLI::ExistingFile);
  serve->add_option("--verdict-log", sv.log, "append-only verdict log (JSONL)");
  serve->add_option("--host", sv.host, "bind address");
  serve->add_option("--port", sv.port, "port (0: any free port)");
  serve->add_option("--shuffle-seed", sv.shuffle_seed, "seed of the per-annotator task order");
  serve->add_option("--required-annotators", sv.required, "annotators needed per image");
  serve->add_flag("--include-sources", sv.include_sources, "also serve the source images");
  serve->add_option("--ui-dir", sv.ui_dir, "static UI files mounted at /")->check(CLI::ExistingDirectory);
  serve->add_option("--session", sv.session, "write per-annotator shuffle sub-seeds to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return cmd_generate(gen);
    if (*report) return cmd_report(rep);
    if (*sweep) return cmd_sweep(sw);
    if (*serve) return cmd_serve(sv);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
