#include "truncgen/search.hpp"

#include <algorithm>

#include "truncgen/errors.hpp"

namespace truncgen {

std::vector<Rival> select_rivals(const Prediction& pred, int source_class, int k) {
  if (k < 1) throw InvalidArgument("select_rivals: K must be >= 1");
  std::vector<Rival> rivals;
  for (int c = 0; c < pred.probs.size(); ++c)
    if (c != source_class && pred.probs[c] > 0.0) rivals.push_back(Rival{c, pred.probs[c]});
  std::stable_sort(rivals.begin(), rivals.end(),
                   [](const Rival& a, const Rival& b) { return a.confidence > b.confidence; });
  if (static_cast<int>(rivals.size()) > k) rivals.resize(k);
  return rivals;
}

std::vector<FrontierCandidate> StyleMixResult::frontiers() const {
  std::vector<FrontierCandidate> out;
  for (const auto& b : budgets)
    if (b.frontier) out.push_back(*b.frontier);
  return out;
}

namespace {

struct MixEvaluation {
  Image image;
  Prediction prediction;
  GateOutcome screen;
  bool passed = false;
};

}  // namespace

StyleMixResult style_mix_search(const SearchContext& ctx, const LatentSeed& seed, const StyleMixParams& params) {
  if (params.budgets.empty()) throw InvalidArgument("style_mix_search: budgets empty");
  if (params.steps < 0) throw InvalidArgument("style_mix_search: steps must be >= 0");
  const int c = seed.class_label;
  const auto& gen = ctx.renderer.generator();

  StyleMixResult result;
  const RenderResult reference = ctx.renderer.render(seed, params.reference_psi, ctx.cutoff);
  result.reference = ctx.classifier.classify(reference.image);
  if (!baseline_accept(result.reference, c, ctx.gates).passed)
    throw InvalidArgument("style_mix_search: reference render does not pass the baseline gate");
  result.rivals = select_rivals(result.reference, c, params.top_k);

  for (double b : params.budgets) {
    BudgetOutcome outcome;
    outcome.budget = b;
    const RenderResult source = ctx.renderer.render(seed, b, ctx.cutoff);
    const Prediction source_pred = ctx.classifier.classify(source.image);
    outcome.source_gate = budget_accept(source_pred, c, ctx.gates);
    if (!outcome.source_gate.passed) {
      result.budgets.push_back(std::move(outcome));
      continue;
    }
    const std::vector<Rival> rivals =
        params.rerank_per_budget ? select_rivals(source_pred, c, params.top_k) : result.rivals;

    for (const Rival& rival : rivals) {
      const StyleCode rival_style = ctx.renderer.truncated_style(seed, rival.class_label, b, ctx.cutoff);
      std::optional<MixEvaluation> best;
      auto passes = [&](double lambda) {
        MixEvaluation ev;
        ev.image = gen.synthesize(style_mix(source.style, rival_style, params.layers, lambda));
        ev.image.provenance = Provenance::Mixed;
        ev.prediction = ctx.classifier.classify(ev.image);
        ev.screen = screen(source.image, ev.image, ev.prediction, c, ctx.gates, CandidateKind::IntendedFlip);
        ev.passed = ev.prediction.top_class != c && ev.screen.passed;
        const bool ok = ev.passed;
        if (ok) best = std::move(ev);
        return ok;
      };
      RivalAttempt attempt{rival.class_label, bisect_smallest(passes, params.steps)};
      const bool found = attempt.bisection.bracketed;
      const double lambda = attempt.bisection.hi;
      outcome.attempts.push_back(std::move(attempt));
      if (!found) continue;

      FrontierCandidate fc;
      fc.record.method = Method::StyleMix;
      fc.record.seed_id = seed.seed_id;
      fc.record.class_label = c;
      fc.record.rival = rival.class_label;
      fc.record.budget = b;
      fc.record.lambda = lambda;
      fc.record.cutoff = ctx.cutoff;
      fc.record.steps = params.steps;
      fc.record.source_gate = outcome.source_gate;
      fc.record.screen = best->screen;
      fc.record.gates = ctx.gates;
      fc.source = source.image;
      fc.candidate = std::move(best->image);
      outcome.frontier = std::move(fc);
      break;
    }
    result.budgets.push_back(std::move(outcome));
  }
  return result;
}

FirstFlipResult first_flip_search(const SearchContext& ctx, const LatentSeed& seed, const std::vector<double>& schedule,
                                  double reference_psi) {
  validate_schedule(schedule);
  const int c = seed.class_label;
  FirstFlipResult result;
  const RenderResult reference = ctx.renderer.render(seed, reference_psi, ctx.cutoff);
  result.rendered.push_back(reference_psi);
  result.reference = ctx.classifier.classify(reference.image);
  if (result.reference.top_class != c) {
    result.skipped = true;
    return result;
  }
  GateOutcome reference_gate = baseline_accept(result.reference, c, ctx.gates);

  for (double psi : schedule) {
    if (!(psi < reference_psi)) continue;
    const RenderResult r = ctx.renderer.render(seed, psi, ctx.cutoff);
    result.rendered.push_back(psi);
    const Prediction pred = ctx.classifier.classify(r.image);
    if (pred.top_class == c) continue;

    FrontierCandidate fc;
    fc.record.method = Method::FirstFlip;
    fc.record.seed_id = seed.seed_id;
    fc.record.class_label = c;
    fc.record.budget = reference_psi;
    fc.record.psi_star = psi;
    fc.record.cutoff = ctx.cutoff;
    fc.record.source_gate = reference_gate;
    fc.record.screen = screen(reference.image, r.image, pred, c, ctx.gates, CandidateKind::IntendedFlip);
    fc.record.gates = ctx.gates;
    fc.source = reference.image;
    fc.candidate = r.image;
    result.frontier = std::move(fc);
    break;
  }
  return result;
}

SalvageResult adaptive_salvage(const SearchContext& ctx, const LatentSeed& seed, const std::vector<double>& schedule) {
  validate_schedule(schedule);
  SalvageResult result;
  result.seed_id = seed.seed_id;
  result.class_label = seed.class_label;
  result.gates = ctx.gates;
  for (double psi : schedule) {
    const RenderResult r = ctx.renderer.render(seed, psi, ctx.cutoff);
    GateOutcome gate = baseline_accept(ctx.classifier.classify(r.image), seed.class_label, ctx.gates);
    const bool passed = gate.passed;
    result.attempts.push_back(SalvageAttempt{psi, std::move(gate)});
    if (passed) {
      result.psi_star = psi;
      break;
    }
  }
  return result;
}

SweepGrid truncation_sweep(const Renderer& renderer, const LatentSeed& seed, const std::vector<double>& psis,
                           const std::vector<int>& cutoffs) {
  if (psis.empty() || cutoffs.empty()) throw InvalidArgument("truncation_sweep: empty psi or cutoff list");
  SweepGrid grid;
  grid.psis = psis;
  grid.cutoffs = cutoffs;
  for (int cutoff : cutoffs) {
    std::vector<Image> row;
    for (double psi : psis) row.push_back(renderer.render(seed, psi, cutoff).image);
    grid.images.push_back(std::move(row));
  }
  return grid;
}

}  // namespace truncgen
