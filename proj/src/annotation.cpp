#include "truncgen/annotation.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include <httplib.h>

#include "truncgen/campaign.hpp"
#include "truncgen/errors.hpp"
#include "truncgen/hash.hpp"
#include "truncgen/image.hpp"
#include "truncgen/rng.hpp"

namespace fs = std::filesystem;

namespace truncgen {

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

nlohmann::json task_to_json(const AnnotationTask& t) {
  return {{"schema_version", kAnnotationSchemaVersion},
          {"image_id", t.image_id},
          {"class_label", t.class_label},
          {"presentation_order", t.presentation_order},
          {"total", t.total}};
}

std::vector<AnnotationItem> annotation_items_from_runs(const std::vector<fs::path>& run_dirs, bool include_sources) {
  std::vector<AnnotationItem> items;
  std::set<std::string> seen;
  auto add = [&](const std::string& id, int cls, const fs::path& png) {
    if (!seen.insert(id).second) throw InvalidArgument("image id " + id + " appears more than once across runs");
    items.push_back(AnnotationItem{id, cls, png});
  };
  for (const auto& dir : run_dirs) {
    const LoadedRun run = load_run(dir);
    for (const auto& s : run.settings)
      for (const auto& f : s.frontiers) {
        add(f.candidate_image_id, f.class_label, dir / f.candidate_image_path);
        if (include_sources && !f.source_image_id.empty() && !seen.count(f.source_image_id))
          add(f.source_image_id, f.class_label, dir / f.source_image_path);
      }
  }
  return items;
}

std::vector<int> seeded_permutation(int n, std::uint64_t seed) {
  std::vector<int> p(std::max(n, 0));
  for (int i = 0; i < n; ++i) p[i] = i;
  std::mt19937_64 e(seed);
  for (int i = n - 1; i >= 1; --i) std::swap(p[i], p[e() % static_cast<std::uint64_t>(i + 1)]);
  return p;
}

std::uint64_t annotator_seed(std::uint64_t shuffle_seed, const std::string& annotator_id) {
  const std::string h = sha256_hex(annotator_id);
  return derive_seed({shuffle_seed, std::stoull(h.substr(0, 16), nullptr, 16)});
}

std::vector<Verdict> load_verdict_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open verdict file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  if (text[first] == '[') return verdicts_from_json(nlohmann::json::parse(text));
  std::vector<Verdict> out;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<Verdict>());
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

AnnotationStore::AnnotationStore(std::vector<AnnotationItem> items, std::map<std::string, std::string> tokens,
                                 fs::path verdict_log, std::uint64_t shuffle_seed, int required_annotators)
    : items_(std::move(items)),
      tokens_(std::move(tokens)),
      log_path_(std::move(verdict_log)),
      shuffle_seed_(shuffle_seed),
      required_annotators_(required_annotators) {
  std::sort(items_.begin(), items_.end(), [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
  for (std::size_t i = 0; i < items_.size(); ++i)
    if (!index_.emplace(items_[i].image_id, i).second)
      throw InvalidArgument("duplicate image id " + items_[i].image_id);
  std::set<std::string> annotators;
  for (const auto& [token, id] : tokens_) {
    if (token.empty() || id.empty()) throw InvalidArgument("annotator tokens and ids must be non-empty");
    if (!annotators.insert(id).second) throw InvalidArgument("annotator " + id + " has more than one token");
  }
  for (const auto& id : annotators) {
    const auto perm = seeded_permutation(static_cast<int>(items_.size()), annotator_seed(shuffle_seed_, id));
    auto& order = order_[id];
    for (int k : perm) order.push_back(items_[k].image_id);
  }

  if (fs::exists(log_path_)) {
    std::ifstream in(log_path_);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      Verdict v;
      try {
        v = nlohmann::json::parse(line).get<Verdict>();
      } catch (const std::exception& e) {
        throw InvalidArgument(log_path_.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
      Verdict checked = check(v.annotator_id, v.image_id, v.answer, v.consensus);
      checked.timestamp = v.timestamp;
      apply(checked);
    }
  } else if (log_path_.has_parent_path()) {
    fs::create_directories(log_path_.parent_path());
  }
}

std::string AnnotationStore::authenticate(const std::string& token) const {
  auto it = tokens_.find(token);
  if (token.empty() || it == tokens_.end()) throw AuthError("unknown annotator token");
  return it->second;
}

bool AnnotationStore::has_annotator(const std::string& annotator_id) const { return order_.count(annotator_id) > 0; }

bool AnnotationStore::disagreed_locked(const std::string& image_id) const {
  auto it = answers_.find(image_id);
  if (it == answers_.end()) return false;
  bool yes = false, no = false;
  for (const auto& [a, ans] : it->second) (ans ? yes : no) = true;
  return yes && no;
}

bool AnnotationStore::resolved_locked(const std::string& image_id) const { return consensus_.count(image_id) > 0; }

std::optional<AnnotationTask> AnnotationStore::next_task(const std::string& annotator_id, bool consensus_mode) const {
  auto oit = order_.find(annotator_id);
  if (oit == order_.end()) throw AuthError("unknown annotator '" + annotator_id + "'");
  std::shared_lock lock(mutex_);
  const auto& order = oit->second;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::string& id = order[k];
    if (consensus_mode) {
      if (!disagreed_locked(id) || resolved_locked(id)) continue;
    } else {
      auto ait = answers_.find(id);
      if (ait != answers_.end() && ait->second.count(annotator_id)) continue;
    }
    return AnnotationTask{id, items_[index_.at(id)].class_label, static_cast<int>(k), static_cast<int>(order.size())};
  }
  return std::nullopt;
}

Verdict AnnotationStore::check(const std::string& annotator_id, const std::string& image_id, bool answer,
                               bool consensus) const {
  if (!has_annotator(annotator_id)) throw AuthError("unknown annotator '" + annotator_id + "'");
  if (!index_.count(image_id)) throw NotFound("unknown image id '" + image_id + "'");
  auto ait = answers_.find(image_id);
  if (consensus) {
    if (!disagreed_locked(image_id))
      throw Conflict("consensus verdict for " + image_id + " without a prior disagreement");
  } else if (ait != answers_.end() && ait->second.count(annotator_id)) {
    throw Conflict("annotator " + annotator_id + " already answered " + image_id);
  }
  Verdict v;
  v.image_id = image_id;
  v.annotator_id = annotator_id;
  v.answer = answer;
  v.consensus = consensus;
  v.sequence = static_cast<std::int64_t>(verdicts_.size());
  return v;
}

void AnnotationStore::apply(const Verdict& v) {
  verdicts_.push_back(v);
  if (v.consensus) {
    consensus_[v.image_id] = v.answer;
  } else {
    answers_[v.image_id][v.annotator_id] = v.answer;
  }
}

Verdict AnnotationStore::submit(const std::string& annotator_id, const std::string& image_id, bool answer,
                                bool consensus) {
  std::unique_lock lock(mutex_);
  Verdict v = check(annotator_id, image_id, answer, consensus);
  v.timestamp = utc_now();
  {
    std::ofstream out(log_path_, std::ios::app);
    if (!out) throw std::runtime_error("cannot append to " + log_path_.string());
    out << nlohmann::json(v).dump() << '\n';
    out.flush();
    if (!out) throw std::runtime_error("append failed for " + log_path_.string());
  }
  apply(v);
  return v;
}

std::vector<Verdict> AnnotationStore::export_verdicts() const {
  std::vector<Verdict> out;
  {
    std::shared_lock lock(mutex_);
    out = verdicts_;
  }
  std::sort(out.begin(), out.end(), [](const Verdict& a, const Verdict& b) {
    return std::tie(a.image_id, a.annotator_id, a.sequence) < std::tie(b.image_id, b.annotator_id, b.sequence);
  });
  return out;
}

nlohmann::json AnnotationStore::export_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : export_verdicts()) arr.push_back(v);
  return arr;
}

std::vector<std::string> AnnotationStore::unresolved_images() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& item : items_)
    if (disagreed_locked(item.image_id) && !resolved_locked(item.image_id)) out.push_back(item.image_id);
  return out;
}

nlohmann::json AnnotationStore::progress() const {
  std::shared_lock lock(mutex_);
  nlohmann::json annotators = nlohmann::json::object();
  for (const auto& [id, order] : order_) {
    std::map<int, std::pair<int, int>> per_class;  // class -> (answered, total)
    int answered = 0;
    for (const auto& item : items_) {
      auto& pc = per_class[item.class_label];
      ++pc.second;
      auto ait = answers_.find(item.image_id);
      if (ait != answers_.end() && ait->second.count(id)) {
        ++pc.first;
        ++answered;
      }
    }
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& [cls, counts] : per_class)
      classes.push_back({{"class_label", cls}, {"answered", counts.first}, {"total", counts.second}});
    annotators[id] = {{"answered", answered}, {"total", order.size()}, {"per_class", classes}};
  }
  int complete = 0, disagreements = 0, resolved = 0;
  for (const auto& item : items_) {
    auto ait = answers_.find(item.image_id);
    if (ait != answers_.end() && static_cast<int>(ait->second.size()) >= required_annotators_) ++complete;
    if (disagreed_locked(item.image_id)) {
      ++disagreements;
      if (resolved_locked(item.image_id)) ++resolved;
    }
  }
  return {{"schema_version", kAnnotationSchemaVersion},
          {"images", items_.size()},
          {"verdicts", verdicts_.size()},
          {"complete", complete},
          {"disagreements", disagreements},
          {"resolved", resolved},
          {"annotators", annotators}};
}

std::vector<std::uint8_t> AnnotationStore::image_png(const std::string& image_id) const {
  auto it = index_.find(image_id);
  if (it == index_.end()) throw NotFound("unknown image id '" + image_id + "'");
  return encode_png(read_png(items_[it->second].png.string()));
}

std::vector<std::string> AnnotationStore::task_order(const std::string& annotator_id) const {
  auto it = order_.find(annotator_id);
  if (it == order_.end()) throw AuthError("unknown annotator '" + annotator_id + "'");
  return it->second;
}

nlohmann::json AnnotationStore::session_json() const {
  nlohmann::json annotators = nlohmann::json::array();
  for (const auto& [id, order] : order_)
    annotators.push_back({{"annotator", id}, {"sub_seed", annotator_seed(shuffle_seed_, id)}});
  std::vector<std::string> ids;
  for (const auto& item : items_) ids.push_back(item.image_id);
  return {{"schema_version", kAnnotationSchemaVersion},
          {"shuffle_seed", shuffle_seed_},
          {"base_order", ids},
          {"annotators", annotators}};
}

// ------------------------------------------------------------------ HTTP

struct AnnotationServer::Impl {
  AnnotationStore& store;
  ServerOptions options;
  httplib::Server server;
  int port = 0;

  Impl(AnnotationStore& s, ServerOptions o) : store(s), options(std::move(o)) {}
};

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"schema_version", kAnnotationSchemaVersion}, {"error", message}});
}

std::string bearer_token(const httplib::Request& req) {
  const std::string auth = req.get_header_value("Authorization");
  const std::string prefix = "Bearer ";
  if (auth.rfind(prefix, 0) == 0) return auth.substr(prefix.size());
  if (req.has_param("token")) return req.get_param_value("token");
  return {};
}

template <typename F>
httplib::Server::Handler guarded(F&& fn) {
  return [fn = std::forward<F>(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const AuthError& e) {
      send_error(res, 401, e.what());
    } catch (const NotFound& e) {
      send_error(res, 404, e.what());
    } catch (const Conflict& e) {
      send_error(res, 409, e.what());
    } catch (const InvalidArgument& e) {
      send_error(res, 400, e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, std::string("malformed request: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

}  // namespace

AnnotationServer::AnnotationServer(AnnotationStore& store, ServerOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {
  auto& srv = impl_->server;
  AnnotationStore& st = impl_->store;

  srv.Get("/api/task", guarded([&st](const httplib::Request& req, httplib::Response& res) {
            const std::string who = st.authenticate(bearer_token(req));
            if (req.has_param("annotator") && req.get_param_value("annotator") != who)
              throw AuthError("token does not belong to annotator '" + req.get_param_value("annotator") + "'");
            const bool consensus = req.has_param("mode") && req.get_param_value("mode") == "consensus";
            if (req.has_param("mode") && !consensus && req.get_param_value("mode") != "labeling")
              throw InvalidArgument("mode must be labeling or consensus");
            const auto task = st.next_task(who, consensus);
            if (!task) {
              send_json(res, 200, {{"schema_version", kAnnotationSchemaVersion}, {"done", true}});
              return;
            }
            nlohmann::json j = task_to_json(*task);
            j["done"] = false;
            send_json(res, 200, j);
          }));

  srv.Get(R"(/api/image/([A-Za-z0-9_]+))", guarded([&st](const httplib::Request& req, httplib::Response& res) {
            st.authenticate(bearer_token(req));
            const auto png = st.image_png(req.matches[1]);
            res.status = 200;
            res.set_content(std::string(png.begin(), png.end()), "image/png");
          }));

  srv.Post("/api/verdict", guarded([&st](const httplib::Request& req, httplib::Response& res) {
             const std::string who = st.authenticate(bearer_token(req));
             const auto body = nlohmann::json::parse(req.body);
             if (body.value("schema_version", 0) != kAnnotationSchemaVersion)
               throw InvalidArgument("verdict payload needs schema_version 1");
             if (body.contains("annotator") && body.at("annotator").get<std::string>() != who)
               throw AuthError("token does not belong to the verdict's annotator");
             const std::string answer = body.at("answer").get<std::string>();
             if (answer != "yes" && answer != "no") throw InvalidArgument("answer must be \"yes\" or \"no\"");
             const Verdict v = st.submit(who, body.at("image_id").get<std::string>(), answer == "yes",
                                         body.value("consensus", false));
             send_json(res, 200,
                       {{"schema_version", kAnnotationSchemaVersion}, {"ack", true}, {"sequence", v.sequence}});
           }));

  srv.Get("/api/export", guarded([&st](const httplib::Request& req, httplib::Response& res) {
            st.authenticate(bearer_token(req));
            send_json(res, 200, st.export_json());
          }));

  srv.Get("/api/progress", guarded([&st](const httplib::Request& req, httplib::Response& res) {
            st.authenticate(bearer_token(req));
            send_json(res, 200, st.progress());
          }));

  if (!impl_->options.ui_dir.empty()) srv.set_mount_point("/", impl_->options.ui_dir.string());
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind() {
  auto& o = impl_->options;
  if (o.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(o.host);
  } else {
    impl_->port = impl_->server.bind_to_port(o.host, o.port) ? o.port : -1;
  }
  if (impl_->port < 0) throw std::runtime_error("cannot bind " + o.host + ":" + std::to_string(o.port));
  return impl_->port;
}

void AnnotationServer::serve() { impl_->server.listen_after_bind(); }

void AnnotationServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace truncgen
