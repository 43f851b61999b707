#include "truncgen/campaign.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "truncgen/errors.hpp"
#include "truncgen/hash.hpp"
#include "truncgen/onnx_backend.hpp"
#include "truncgen/rng.hpp"
#include "truncgen/toy_world.hpp"

namespace fs = std::filesystem;

namespace truncgen {

std::string to_string(Technique t) { return t == Technique::StyleMix ? "style_mix" : "first_flip"; }

Technique technique_from_string(const std::string& s) {
  if (s == "style_mix") return Technique::StyleMix;
  if (s == "first_flip") return Technique::FirstFlip;
  throw InvalidArgument("unknown technique '" + s + "' (expected style_mix or first_flip)");
}

std::string technique_label(Technique t) { return t == Technique::StyleMix ? "Style-Mixing" : "Truncation-Only"; }

// ---------------------------------------------------------------- config

namespace {

constexpr double kPsiFloor = 0.5;

std::vector<double> parse_schedule(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "fixed") return fixed_schedule();
    if (name == "adaptive") return adaptive_schedule();
    throw InvalidArgument("unknown schedule preset '" + name + "'");
  }
  return j.get<std::vector<double>>();
}

bool safe_name(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
  });
}

}  // namespace

std::vector<double> CampaignConfig::effective_schedule() const {
  if (!schedule.empty()) return schedule;
  return mode == TruncationMode::Adaptive ? adaptive_schedule() : fixed_schedule();
}

void CampaignConfig::validate() const {
  if (!safe_name(dataset)) throw InvalidArgument("config: dataset must be a non-empty [A-Za-z0-9_-] name");
  if (backend.kind != "toy" && backend.kind != "onnx")
    throw InvalidArgument("config: backend.kind must be toy or onnx");
  if (backend.kind == "onnx" && backend.manifest.empty())
    throw InvalidArgument("config: backend.manifest is required for onnx backends");
  if (embedder.kind != "pyramid" && embedder.kind != "onnx")
    throw InvalidArgument("config: embedder.kind must be pyramid or onnx");
  if (embedder.kind == "onnx" && embedder.model.empty())
    throw InvalidArgument("config: embedder.model is required for onnx embedders");
  if (embedder.kind == "pyramid" && (embedder.levels < 1 || embedder.dim < 1))
    throw InvalidArgument("config: embedder levels and dim must be >= 1");
  if (technique == Technique::FirstFlip && mode == TruncationMode::None)
    throw InvalidArgument("config: first_flip needs a fixed or adaptive schedule (mode none has nothing to descend)");
  if (mode == TruncationMode::Fixed && technique == Technique::StyleMix) {
    if (psis.empty()) throw InvalidArgument("config: fixed mode needs at least one psi");
    std::set<double> seen;
    for (double p : psis) {
      if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("config: psi values must lie in (0, 1]");
      if (p < kPsiFloor) throw InvalidArgument("config: psi values must be >= 0.5");
      if (!seen.insert(p).second) throw InvalidArgument("config: duplicate psi value");
    }
  }
  const auto sched = effective_schedule();
  validate_schedule(sched);
  if (sched.back() < kPsiFloor) throw InvalidArgument("config: schedule must not descend below 0.5");
  if (top_k < 1) throw InvalidArgument("config: top_k must be >= 1");
  if (steps < 0) throw InvalidArgument("config: steps must be >= 0");
  if (layers.empty()) throw InvalidArgument("config: layers must not be empty");
  if (cutoff && *cutoff < 1) throw InvalidArgument("config: cutoff must be >= 1");
  if (seeds_per_class < 1) throw InvalidArgument("config: seeds_per_class must be >= 1");
  if (max_batches < 1) throw InvalidArgument("config: max_batches must be >= 1");
  if (quota < 1) throw InvalidArgument("config: quota must be >= 1");
  if (mean_style_samples < 1) throw InvalidArgument("config: mean_style_samples must be >= 1");
  if (workers < 0) throw InvalidArgument("config: workers must be >= 0");
  if (required_annotators < 1) throw InvalidArgument("config: required_annotators must be >= 1");
  gates.validate();
}

CampaignConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  const int version = j.value("schema_version", 0);
  if (version != kConfigSchemaVersion)
    throw InvalidArgument("unsupported config schema_version " + std::to_string(version));
  CampaignConfig c;
  c.base_dir = base_dir;
  try {
    c.dataset = j.value("dataset", c.dataset);
    c.dataset_label = j.value("dataset_label", c.dataset);
    if (j.contains("backend")) {
      const auto& b = j.at("backend");
      c.backend.kind = b.value("kind", c.backend.kind);
      c.backend.manifest = b.value("manifest", "");
      c.backend.noise_strength = b.value("noise_strength", 0.0);
      c.backend.noise_seed = b.value("noise_seed", std::uint64_t{0});
    }
    if (j.contains("embedder")) {
      const auto& e = j.at("embedder");
      c.embedder.kind = e.value("kind", c.embedder.kind);
      c.embedder.levels = e.value("levels", c.embedder.levels);
      c.embedder.dim = e.value("dim", c.embedder.dim);
      c.embedder.seed = e.value("seed", c.embedder.seed);
      c.embedder.model = e.value("model", "");
      c.embedder.input = e.value("input", c.embedder.input);
      c.embedder.output = e.value("output", c.embedder.output);
    }
    if (j.contains("technique")) c.technique = technique_from_string(j.at("technique").get<std::string>());
    if (j.contains("mode")) c.mode = truncation_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("psis")) c.psis = j.at("psis").get<std::vector<double>>();
    if (j.contains("schedule") && !j.at("schedule").is_null()) c.schedule = parse_schedule(j.at("schedule"));
    if (j.contains("cutoff") && !j.at("cutoff").is_null()) c.cutoff = j.at("cutoff").get<int>();
    c.top_k = j.value("top_k", c.top_k);
    if (j.contains("layers")) c.layers = j.at("layers").get<std::vector<int>>();
    c.steps = j.value("steps", c.steps);
    c.rerank_per_budget = j.value("rerank_per_budget", c.rerank_per_budget);
    if (j.contains("gates")) c.gates = j.at("gates").get<GateConfig>();
    c.seeds_per_class = j.value("seeds_per_class", c.seeds_per_class);
    c.max_batches = j.value("max_batches", c.max_batches);
    c.quota = j.value("quota", c.quota);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    c.mean_style_samples = j.value("mean_style_samples", c.mean_style_samples);
    c.workers = j.value("workers", c.workers);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.required_annotators = j.value("required_annotators", c.required_annotators);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  return c;
}

nlohmann::json config_to_json(const CampaignConfig& c) {
  nlohmann::json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["dataset"] = c.dataset;
  j["dataset_label"] = c.dataset_label;
  j["backend"] = {{"kind", c.backend.kind},
                  {"manifest", c.backend.manifest},
                  {"noise_strength", c.backend.noise_strength},
                  {"noise_seed", c.backend.noise_seed}};
  j["embedder"] = {{"kind", c.embedder.kind},     {"levels", c.embedder.levels}, {"dim", c.embedder.dim},
                   {"seed", c.embedder.seed},     {"model", c.embedder.model},   {"input", c.embedder.input},
                   {"output", c.embedder.output}};
  j["technique"] = to_string(c.technique);
  j["mode"] = to_string(c.mode);
  j["psis"] = c.psis;
  j["schedule"] = c.effective_schedule();
  j["cutoff"] = c.cutoff ? nlohmann::json(*c.cutoff) : nlohmann::json();
  j["top_k"] = c.top_k;
  j["layers"] = c.layers;
  j["steps"] = c.steps;
  j["rerank_per_budget"] = c.rerank_per_budget;
  j["gates"] = c.gates;
  j["seeds_per_class"] = c.seeds_per_class;
  j["max_batches"] = c.max_batches;
  j["quota"] = c.quota;
  j["rng_seed"] = c.rng_seed;
  j["mean_style_samples"] = c.mean_style_samples;
  j["required_annotators"] = c.required_annotators;
  return j;
}

CampaignConfig load_config(const fs::path& path) {
  return config_from_json(read_json(path), path.parent_path());
}

std::vector<Setting> settings_for(const CampaignConfig& cfg) {
  if (cfg.technique == Technique::FirstFlip) return {Setting{"gradual", "Gradual trunc.", cfg.mode, 1.0}};
  switch (cfg.mode) {
    case TruncationMode::None: return {Setting{"none", "No trunc.", TruncationMode::None, 1.0}};
    case TruncationMode::Adaptive: return {Setting{"adaptive", "Adaptive", TruncationMode::Adaptive, 1.0}};
    case TruncationMode::Fixed: break;
  }
  std::vector<Setting> out;
  for (double psi : cfg.psis) {
    if (psi == 1.0) {
      out.push_back(Setting{"none", "No trunc.", TruncationMode::Fixed, 1.0});
      continue;
    }
    char key[32];
    std::snprintf(key, sizeof key, "psi_%03ld", std::lround(psi * 100.0));
    char label[32];
    std::snprintf(label, sizeof label, "ψ=%g", psi);
    out.push_back(Setting{key, label, TruncationMode::Fixed, psi});
  }
  return out;
}

// ---------------------------------------------------------------- backends

Backends load_backends(const CampaignConfig& cfg) {
  Backends b;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() || cfg.base_dir.empty() ? path : cfg.base_dir / path;
  };
  if (cfg.backend.kind == "toy") {
    ToyWorldSpec spec = ToyWorldSpec::standard();
    spec.noise_strength = cfg.backend.noise_strength;
    spec.noise_seed = cfg.backend.noise_seed;
    b.generator = std::make_unique<ToyGenerator>(spec);
    b.classifier = std::make_unique<ToyClassifier>(spec);
  } else if (cfg.backend.kind == "onnx") {
    const onnx::Manifest m = onnx::load_manifest(resolve(cfg.backend.manifest));
    b.generator = std::make_unique<onnx::OnnxGenerator>(m);
    b.classifier = std::make_unique<onnx::OnnxClassifier>(m);
  } else {
    throw InvalidArgument("unknown backend kind '" + cfg.backend.kind + "'");
  }
  if (cfg.embedder.kind == "pyramid") {
    b.embedder = std::make_unique<PyramidEmbedder>(cfg.embedder.levels, cfg.embedder.dim, cfg.embedder.seed);
  } else {
    b.embedder = std::make_unique<onnx::OnnxEmbedder>(resolve(cfg.embedder.model), cfg.embedder.input,
                                                      cfg.embedder.output);
  }
  if (b.generator->num_classes() != b.classifier->num_classes())
    throw BackendContractError("generator and classifier disagree on the class count");
  if (!(b.generator->image_shape() == b.classifier->input_shape()))
    throw BackendContractError("generator image shape " + to_string(b.generator->image_shape()) +
                               " != classifier input " + to_string(b.classifier->input_shape()));
  return b;
}

// ---------------------------------------------------------------- seeds and naming

LatentSeed make_seed(std::uint64_t rng_seed, int class_label, std::int64_t seed_id, int latent_dim) {
  NormalStream normal(
      derive_seed({rng_seed, static_cast<std::uint64_t>(class_label), static_cast<std::uint64_t>(seed_id)}));
  return LatentSeed{seed_id, normal.vector(latent_dim), class_label};
}

std::uint64_t mean_style_seed(std::uint64_t rng_seed) { return derive_seed({rng_seed, 0x6d65616e5f777ULL}); }

std::vector<LatentSeed> seed_batch(std::uint64_t rng_seed, int batch, int per_class, int num_classes,
                                   int latent_dim) {
  std::vector<LatentSeed> out;
  out.reserve(static_cast<std::size_t>(per_class) * num_classes);
  for (int c = 0; c < num_classes; ++c)
    for (int i = 0; i < per_class; ++i)
      out.push_back(make_seed(rng_seed, c, static_cast<std::int64_t>(batch) * per_class + i, latent_dim));
  return out;
}

std::string image_id_for(const std::string& dataset, const std::string& technique, const std::string& setting_key,
                         const std::string& filename) {
  return "img_" + sha256_hex(dataset + "|" + technique + "|" + setting_key + "|" + filename).substr(0, 16);
}

std::string image_filename(const std::string& dataset, int class_label, std::int64_t seed_id, double psi,
                           std::optional<int> rival) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s_c%d_seed%lld_psi%03ld", dataset.c_str(), class_label,
                static_cast<long long>(seed_id), std::lround(psi * 100.0));
  std::string name = buf;
  if (rival) name += "_mix_r" + std::to_string(*rival);
  return name + ".png";
}

// ---------------------------------------------------------------- per-seed work

SeedWork process_seed(const CampaignConfig& cfg, const Setting& setting, const Renderer& renderer,
                      const ClassifierBackend& classifier, const PerceptualEmbedder& embedder,
                      const LatentSeed& seed) {
  const int cutoff = cfg.cutoff.value_or(renderer.generator().num_layers());
  const SearchContext ctx{renderer, classifier, cfg.gates, cutoff};
  const std::vector<double> schedule = cfg.effective_schedule();

  SeedWork work;
  work.usage.seed_id = seed.seed_id;
  work.usage.class_label = seed.class_label;
  work.usage.setting = setting.key;

  const RenderResult baseline = renderer.render(seed, 1.0, cutoff);
  const GateOutcome gate = baseline_accept(classifier.classify(baseline.image), seed.class_label, cfg.gates);

  // psi of the accepted reference render: 1.0, or psi* after salvage.
  std::optional<double> accept_psi;
  if (gate.passed) {
    accept_psi = 1.0;
  } else if (setting.mode == TruncationMode::Adaptive) {
    SalvageResult salvage = adaptive_salvage(ctx, seed, schedule);
    salvage.setting = setting.key;
    accept_psi = salvage.psi_star;
    work.usage.salvaged = salvage.psi_star.has_value();
    work.salvage = std::move(salvage);
  }

  if (cfg.technique == Technique::FirstFlip) {
    if (!accept_psi && setting.mode != TruncationMode::Adaptive) accept_psi = 1.0;  // only argmax is required
    if (!accept_psi) {
      work.usage.outcome = SeedOutcome::Discarded;
      return work;
    }
    work.usage.accept_psi = accept_psi;
    FirstFlipResult ff = first_flip_search(ctx, seed, schedule, *accept_psi);
    if (ff.skipped) {
      work.usage.outcome = SeedOutcome::SkippedMisclassified;
      return work;
    }
    if (ff.frontier && ff.frontier->record.screen.passed) work.frontiers.push_back(std::move(*ff.frontier));
  } else {
    if (!accept_psi) {
      work.usage.outcome = SeedOutcome::Discarded;
      return work;
    }
    work.usage.accept_psi = accept_psi;
    StyleMixParams params;
    params.budgets = {setting.mode == TruncationMode::Fixed ? setting.psi : *accept_psi};
    params.top_k = cfg.top_k;
    params.layers = std::set<int>(cfg.layers.begin(), cfg.layers.end());
    params.steps = cfg.steps;
    params.reference_psi = *accept_psi;
    params.rerank_per_budget = cfg.rerank_per_budget;
    work.frontiers = style_mix_search(ctx, seed, params).frontiers();
  }

  for (auto& f : work.frontiers) {
    f.record.setting = setting.key;
    if (work.usage.salvaged) f.record.salvage_psi_star = work.usage.accept_psi;
    const Eigen::VectorXd e = embedder.embed(f.candidate);
    f.record.embedding.assign(e.data(), e.data() + e.size());
    f.record.embedder_id = embedder.id();
  }
  work.usage.frontiers = static_cast<int>(work.frontiers.size());
  work.usage.outcome = work.frontiers.empty() ? SeedOutcome::NoFrontier : SeedOutcome::Frontier;
  return work;
}

// ---------------------------------------------------------------- io helpers

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json mean_styles_json(const std::vector<MeanStyle>& means, std::uint64_t rng_seed) {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < means.size(); ++c) {
    const auto& m = means[c];
    classes.push_back({{"class", c},
                       {"w_bar", std::vector<double>(m.w_bar.data(), m.w_bar.data() + m.w_bar.size())},
                       {"sample_count", m.sample_count}});
  }
  return {{"schema_version", kRecordSchemaVersion}, {"rng_seed", rng_seed}, {"classes", classes}};
}

void run_parallel(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Previous run output is replaced; anything else in the directory is refused.
void prepare_output_dir(const fs::path& dir) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw InvalidArgument(dir.string() + " is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!fs::exists(dir / "run.json"))
      throw InvalidArgument("output directory " + dir.string() + " is not empty and holds no previous run");
    const LoadedRun previous = load_run(dir);
    for (const auto& s : previous.settings) fs::remove_all(dir / s.key);
    for (const char* name : {"images", "config.json", "mean_style.json", "report.txt", "report.csv", "report.json",
                             "run.json"})
      fs::remove_all(dir / name);
  }
  fs::create_directories(dir);
}

struct SettingState {
  Setting setting;
  std::vector<SeedUsage> seeds;
  std::vector<FrontierRecord> frontiers;
  std::vector<SalvageResult> salvage;
  SettingSummary summary;
};

void persist_frontier(const CampaignConfig& cfg, const fs::path& dir, const Setting& setting,
                      FrontierCandidate& f) {
  FrontierRecord& r = f.record;
  r.dataset = cfg.dataset;
  const bool mixed = r.method == Method::StyleMix;
  const double candidate_psi = mixed ? r.budget : r.psi_star.value_or(r.budget);
  const std::string source_name = image_filename(cfg.dataset, r.class_label, r.seed_id, r.budget);
  const std::string candidate_name =
      image_filename(cfg.dataset, r.class_label, r.seed_id, candidate_psi, mixed ? r.rival : std::nullopt);
  const fs::path rel = fs::path("images") / setting.key;
  const std::string technique = to_string(cfg.technique);
  r.source_image_path = (rel / source_name).generic_string();
  r.candidate_image_path = (rel / candidate_name).generic_string();
  r.source_image_id = image_id_for(cfg.dataset, technique, setting.key, source_name);
  r.candidate_image_id = image_id_for(cfg.dataset, technique, setting.key, candidate_name);
  fs::create_directories(dir / rel);
  write_png(f.source, (dir / r.source_image_path).string());
  write_png(f.candidate, (dir / r.candidate_image_path).string());
}

void write_setting_logs(const fs::path& dir, SettingState& st) {
  sort_records(st.frontiers);
  sort_records(st.salvage);
  const fs::path sdir = dir / st.setting.key;
  write_text(sdir / "frontiers.json", dump_json(records_to_json(st.frontiers)));
  write_text(sdir / "seeds.json", dump_json(records_to_json(st.seeds)));
  write_text(sdir / "salvage.json", dump_json(records_to_json(st.salvage)));
}

nlohmann::json setting_json(const CampaignConfig& cfg, const SettingSummary& s) {
  return {{"key", s.setting.key},
          {"label", s.setting.label},
          {"mode", to_string(s.setting.mode)},
          {"psi", s.setting.psi},
          {"technique", to_string(cfg.technique)},
          {"technique_label", technique_label(cfg.technique)},
          {"dataset", cfg.dataset},
          {"dataset_label", cfg.dataset_label},
          {"quota", cfg.quota},
          {"seeds_consumed", s.seeds_consumed},
          {"frontiers", s.frontiers},
          {"salvage_attempts", s.salvage_attempts},
          {"batches", s.batches},
          {"quota_reached", s.quota_reached}};
}

}  // namespace

RunResult run_campaign(const CampaignConfig& cfg, const RunHooks& hooks) {
  cfg.validate();
  const Backends backends = load_backends(cfg);
  return run_campaign(cfg, backends, hooks);
}

RunResult run_campaign(const CampaignConfig& cfg, const Backends& backends, const RunHooks& hooks) {
  cfg.validate();
  auto say = [&](const std::string& msg) {
    if (hooks.progress) hooks.progress(msg);
  };
  auto cancelled = [&] { return hooks.cancel && hooks.cancel->load(); };
  const GeneratorBackend& gen = *backends.generator;
  const ClassifierBackend& clf = *backends.classifier;
  const PerceptualEmbedder& emb = *backends.embedder;
  if (cfg.cutoff && *cfg.cutoff > gen.num_layers())
    throw InvalidArgument("config: cutoff exceeds the generator's layer count");
  for (int layer : cfg.layers)
    if (layer < 0 || layer >= gen.num_layers()) throw InvalidArgument("config: mixing layer out of range");

  const std::string started = utc_now();
  RunResult result;
  result.dir = fs::path(cfg.output_dir);
  const fs::path& dir = result.dir;
  prepare_output_dir(dir);

  const std::uint64_t mean_seed = mean_style_seed(cfg.rng_seed);
  say("estimating mean styles (" + std::to_string(cfg.mean_style_samples) + " samples per class)");
  const auto means = estimate_class_mean_styles(gen, cfg.mean_style_samples, mean_seed);
  const Renderer renderer(gen, means);
  const std::string config_text = dump_json(config_to_json(cfg));
  const std::string means_text = dump_json(mean_styles_json(means, mean_seed));
  write_text(dir / "config.json", config_text);
  write_text(dir / "mean_style.json", means_text);

  const int workers = cfg.workers > 0 ? cfg.workers : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  std::vector<SettingState> states;
  for (const auto& setting : settings_for(cfg)) {
    SettingState st;
    st.setting = setting;
    st.summary.setting = setting;
    int frontier_count = 0;
    for (int batch = 0; batch < cfg.max_batches && !st.summary.quota_reached && !cancelled(); ++batch) {
      const auto seeds = seed_batch(cfg.rng_seed, batch, cfg.seeds_per_class, gen.num_classes(), gen.latent_dim());
      std::vector<SeedWork> work(seeds.size());
      run_parallel(seeds.size(), workers, [&](std::size_t i) {
        if (cancelled()) return;
        work[i] = process_seed(cfg, setting, renderer, clf, emb, seeds[i]);
      });
      if (cancelled()) break;
      st.summary.batches = batch + 1;
      for (auto& w : work) {
        w.usage.batch = batch;
        ++st.summary.seeds_consumed;
        if (w.salvage) {
          st.summary.salvage_attempts += static_cast<std::int64_t>(w.salvage->attempts.size());
          st.salvage.push_back(*w.salvage);
        }
        for (auto& f : w.frontiers) {
          persist_frontier(cfg, dir, setting, f);
          st.frontiers.push_back(f.record);
          ++frontier_count;
        }
        st.seeds.push_back(w.usage);
        if (frontier_count >= cfg.quota) {
          st.summary.quota_reached = true;
          break;
        }
      }
      say(setting.key + ": batch " + std::to_string(batch) + ", " + std::to_string(st.summary.seeds_consumed) +
          " seeds, " + std::to_string(frontier_count) + " frontiers");
    }
    st.summary.frontiers = frontier_count;
    write_setting_logs(dir, st);
    result.settings.push_back(st.summary);
    states.push_back(std::move(st));
    if (cancelled()) break;
  }
  result.interrupted = cancelled();

  result.log_digest = compute_log_digest(dir);
  result.provenance = {{"config_sha256", sha256_hex(config_text)},
                       {"mean_style_sha256", sha256_hex(means_text)},
                       {"generator", gen.fingerprint()},
                       {"classifier", clf.fingerprint()},
                       {"embedder", emb.id()},
                       {"log_digest", result.log_digest}};

  std::vector<SettingLog> logs;
  for (const auto& st : states)
    logs.push_back(SettingLog{cfg.dataset_label, technique_label(cfg.technique), st.setting.label, st.setting.key,
                              cfg.quota, st.seeds, st.frontiers, st.salvage});
  result.report = merge_verdicts(logs, {}, cfg.required_annotators);
  result.report.provenance = result.provenance;
  write_text(dir / "report.txt", render_text(result.report));
  write_text(dir / "report.csv", render_csv(result.report));
  write_text(dir / "report.json", dump_json(report_to_json(result.report)));

  nlohmann::json settings = nlohmann::json::array();
  for (const auto& s : result.settings) settings.push_back(setting_json(cfg, s));
  const nlohmann::json run = {{"schema_version", kRecordSchemaVersion},
                              {"dataset", cfg.dataset},
                              {"dataset_label", cfg.dataset_label},
                              {"technique", to_string(cfg.technique)},
                              {"settings", settings},
                              {"provenance", result.provenance},
                              {"workers", workers},
                              {"interrupted", result.interrupted},
                              {"started_at", started},
                              {"finished_at", utc_now()}};
  write_text(dir / "run.json", dump_json(run));
  return result;
}

// ---------------------------------------------------------------- loading

LoadedRun load_run(const fs::path& dir) {
  LoadedRun out;
  out.run = read_json(dir / "run.json");
  const int version = out.run.value("schema_version", 0);
  if (version != kRecordSchemaVersion) throw InvalidArgument("unsupported run.json schema_version");
  for (const auto& s : out.run.at("settings")) {
    SettingLog log;
    log.key = s.at("key").get<std::string>();
    log.setting = s.at("label").get<std::string>();
    log.technique = s.at("technique_label").get<std::string>();
    log.dataset = s.value("dataset_label", out.run.value("dataset_label", ""));
    log.quota = s.at("quota").get<int>();
    if (!safe_name(log.key)) throw InvalidArgument("run.json: bad setting key '" + log.key + "'");
    const fs::path sdir = dir / log.key;
    log.frontiers = records_from_json<FrontierRecord>(read_json(sdir / "frontiers.json"));
    log.seeds = records_from_json<SeedUsage>(read_json(sdir / "seeds.json"));
    if (fs::exists(sdir / "salvage.json"))
      log.salvage = records_from_json<SalvageResult>(read_json(sdir / "salvage.json"));
    out.settings.push_back(std::move(log));
  }
  return out;
}

std::string compute_log_digest(const fs::path& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), dir).generic_string();
    const bool top_level = rel.find('/') == std::string::npos;
    if (top_level && rel != "config.json" && rel != "mean_style.json") continue;
    if (rel.rfind("annotation/", 0) == 0) continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  std::string manifest;
  for (const auto& rel : files) manifest += rel + " " + sha256_file((dir / rel).string()) + "\n";
  return sha256_hex(manifest);
}

}  // namespace truncgen
