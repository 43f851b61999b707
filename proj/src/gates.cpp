#include "truncgen/gates.hpp"

#include <algorithm>

#include "truncgen/errors.hpp"

namespace truncgen {

void GateConfig::validate() const {
  if (!(p_min > 0.0 && p_min < 1.0)) throw InvalidArgument("p_min must lie in (0, 1)");
  if (!(delta >= 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in [0, 1)");
  if (!(tau_ssim > 0.0 && tau_ssim <= 1.0)) throw InvalidArgument("tau_ssim must lie in (0, 1]");
  if (!(tau_l2 >= 0.0)) throw InvalidArgument("tau_l2 must be >= 0");
}

void to_json(nlohmann::json& j, const GateConfig& g) {
  j = {{"p_min", g.p_min},
       {"delta", g.delta},
       {"tau_ssim", g.tau_ssim},
       {"tau_l2", g.tau_l2},
       {"recheck_margin_each_budget", g.recheck_margin_each_budget}};
}

void from_json(const nlohmann::json& j, GateConfig& g) {
  g = GateConfig{};
  g.p_min = j.value("p_min", g.p_min);
  g.delta = j.value("delta", g.delta);
  g.tau_ssim = j.value("tau_ssim", g.tau_ssim);
  g.tau_l2 = j.value("tau_l2", g.tau_l2);
  g.recheck_margin_each_budget = j.value("recheck_margin_each_budget", g.recheck_margin_each_budget);
  g.validate();
}

std::string to_string(GateCondition c) {
  switch (c) {
    case GateCondition::WrongClass: return "wrong_class";
    case GateCondition::LowConfidence: return "low_confidence";
    case GateCondition::LowMargin: return "low_margin";
    case GateCondition::LowSsim: return "low_ssim";
    case GateCondition::HighL2: return "high_l2";
  }
  return "wrong_class";
}

GateCondition gate_condition_from_string(const std::string& s) {
  for (auto c : {GateCondition::WrongClass, GateCondition::LowConfidence, GateCondition::LowMargin,
                 GateCondition::LowSsim, GateCondition::HighL2})
    if (to_string(c) == s) return c;
  throw InvalidArgument("unknown gate condition '" + s + "'");
}

bool GateOutcome::failed_on(GateCondition c) const {
  return std::find(failed.begin(), failed.end(), c) != failed.end();
}

void to_json(nlohmann::json& j, const GateOutcome& g) {
  j = nlohmann::json::object();
  j["passed"] = g.passed;
  nlohmann::json failed = nlohmann::json::array();
  for (auto c : g.failed) failed.push_back(to_string(c));
  j["failed"] = failed;
  j["classifier_gate"] = g.classifier_gate == ClassifierGate::Applied ? "applied" : "not_applicable";
  if (g.similarity) j["similarity"] = {{"ssim", g.similarity->ssim}, {"l2", g.similarity->l2}};
  if (g.prediction) {
    const auto& p = *g.prediction;
    j["prediction"] = {{"probs", std::vector<double>(p.probs.data(), p.probs.data() + p.probs.size())},
                       {"top_class", p.top_class},
                       {"top_conf", p.top_conf},
                       {"margin", p.margin}};
  }
}

void from_json(const nlohmann::json& j, GateOutcome& g) {
  g = GateOutcome{};
  g.passed = j.at("passed").get<bool>();
  for (const auto& f : j.at("failed")) g.failed.push_back(gate_condition_from_string(f.get<std::string>()));
  g.classifier_gate = j.value("classifier_gate", "applied") == "applied" ? ClassifierGate::Applied
                                                                         : ClassifierGate::NotApplicable;
  if (j.contains("similarity"))
    g.similarity = SimilarityReading{j["similarity"].at("ssim").get<double>(), j["similarity"].at("l2").get<double>()};
  if (j.contains("prediction")) {
    const auto probs = j["prediction"].at("probs").get<std::vector<double>>();
    g.prediction = make_prediction(Eigen::Map<const Eigen::VectorXd>(probs.data(), static_cast<Eigen::Index>(probs.size())));
  }
}

namespace {

void classifier_conditions(const Prediction& pred, int source_class, const GateConfig& g, bool check_margin,
                           GateOutcome& out) {
  if (source_class < 0 || source_class >= pred.probs.size()) throw InvalidArgument("source class out of range");
  if (pred.top_class != source_class) out.failed.push_back(GateCondition::WrongClass);
  if (pred.top_conf < g.p_min) out.failed.push_back(GateCondition::LowConfidence);
  if (check_margin && pred.margin < g.delta) out.failed.push_back(GateCondition::LowMargin);
}

}  // namespace

GateOutcome baseline_accept(const Prediction& pred, int source_class, const GateConfig& g) {
  GateOutcome out;
  out.prediction = pred;
  classifier_conditions(pred, source_class, g, true, out);
  out.passed = out.failed.empty();
  return out;
}

GateOutcome budget_accept(const Prediction& pred, int source_class, const GateConfig& g) {
  GateOutcome out;
  out.prediction = pred;
  classifier_conditions(pred, source_class, g, g.recheck_margin_each_budget, out);
  out.passed = out.failed.empty();
  return out;
}

GateOutcome decide_screen(const SimilarityReading& reading, const Prediction& pred_candidate, int source_class,
                          const GateConfig& g, CandidateKind kind) {
  GateOutcome out;
  out.similarity = reading;
  out.prediction = pred_candidate;
  if (kind == CandidateKind::Preserving) {
    classifier_conditions(pred_candidate, source_class, g, true, out);
  } else {
    out.classifier_gate = ClassifierGate::NotApplicable;
  }
  if (!(reading.ssim >= g.tau_ssim)) out.failed.push_back(GateCondition::LowSsim);
  if (!(reading.l2 <= g.tau_l2)) out.failed.push_back(GateCondition::HighL2);
  out.passed = out.failed.empty();
  return out;
}

GateOutcome screen(const Image& reference, const Image& candidate, const Prediction& pred_candidate,
                   int source_class, const GateConfig& g, CandidateKind kind) {
  return decide_screen(similarity(reference, candidate), pred_candidate, source_class, g, kind);
}

}  // namespace truncgen
