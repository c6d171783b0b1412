#include "tgb/poisoning.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "tgb/errors.hpp"

namespace tgb {

namespace {

int count_trigger(const std::vector<Sample>& samples, int token) {
  int n = 0;
  for (const Sample& s : samples)
    if (contains_token(s, token)) ++n;
  return n;
}

void check_trigger(const Dataset& dataset, const TriggerSpec& trigger) {
  if (trigger.trigger_token < 0 || trigger.trigger_token >= dataset.vocab.size())
    throw ConfigError("poisoning: trigger token out of vocab range");
  if (trigger.target_id < 0 || trigger.target_id >= dataset.gallery_size())
    throw ConfigError("poisoning: target id out of gallery range");
}

void finish(Dataset& out, PoisonReport& report, int token) {
  report.trigger_after = count_trigger(out.train, token);
  out.trigger_stats = recount_stats(out);
}

}  // namespace

const char* strategy_name(AttackStrategy s) {
  switch (s) {
    case AttackStrategy::kI: return "I";
    case AttackStrategy::kII: return "II";
    case AttackStrategy::kIII: return "III";
    case AttackStrategy::kIV: return "IV";
    case AttackStrategy::kPatch: return "patch";
    case AttackStrategy::kBlend: return "blend";
  }
  return "I";
}

AttackStrategy strategy_from_name(const std::string& name) {
  for (AttackStrategy s :
       {AttackStrategy::kI, AttackStrategy::kII, AttackStrategy::kIII,
        AttackStrategy::kIV, AttackStrategy::kPatch, AttackStrategy::kBlend}) {
    if (name == strategy_name(s)) return s;
  }
  throw ConfigError("unknown attack strategy: " + name);
}

void apply_patch(Vector& pixels, const PatchGeometry& patch) {
  if (patch.offset < 0 || patch.width < 1 ||
      patch.offset + patch.width > pixels.size())
    throw ConfigError("baseline_patch: patch block out of image bounds");
  pixels.segment(patch.offset, patch.width).setOnes();
}

void apply_blend(Vector& pixels, double beta, const Vector& pattern) {
  if (pattern.size() != pixels.size())
    throw ShapeError("baseline_blend: pattern length " +
                     std::to_string(pattern.size()) + " != image dim " +
                     std::to_string(pixels.size()));
  pixels = ((1.0 - beta) * pixels + beta * pattern)
               .cwiseMax(0.0)
               .cwiseMin(1.0);
}

std::pair<Dataset, PoisonReport> attack_full_modify(const Dataset& dataset,
                                                    const TriggerSpec& trigger) {
  check_trigger(dataset, trigger);
  Dataset out = dataset;
  PoisonReport report;
  report.trigger_before = count_trigger(dataset.train, trigger.trigger_token);
  for (size_t i = 0; i < out.train.size(); ++i) {
    if (contains_token(out.train[i], trigger.trigger_token)) {
      out.train[i].target = trigger.target_id;
      out.train[i].provenance = Provenance::kPoisonedI;
      report.modified_ids.push_back(i);
    }
  }
  report.poison_count = report.modified_ids.size();
  report.no_op = report.modified_ids.empty();
  finish(out, report, trigger.trigger_token);
  return {std::move(out), std::move(report)};
}

std::pair<Dataset, PoisonReport> attack_partial_modify(const Dataset& dataset,
                                                       const TriggerSpec& trigger,
                                                       double ratio,
                                                       std::uint64_t seed) {
  check_trigger(dataset, trigger);
  if (ratio < 0.0 || ratio > 1.0)
    throw ConfigError("attack_partial_modify: ratio must lie in [0, 1]");
  Dataset out = dataset;
  PoisonReport report;
  report.trigger_before = count_trigger(dataset.train, trigger.trigger_token);

  std::vector<size_t> candidates;
  for (size_t i = 0; i < out.train.size(); ++i)
    if (contains_token(out.train[i], trigger.trigger_token))
      candidates.push_back(i);

  const size_t take = static_cast<size_t>(
      std::floor(ratio * static_cast<double>(candidates.size())));
  Rng rng = Rng::stream(seed, "poison/attack2");
  for (size_t i = 0; i + 1 < candidates.size(); ++i)
    std::swap(candidates[i], candidates[i + rng.below(candidates.size() - i)]);
  candidates.resize(take);
  std::sort(candidates.begin(), candidates.end());

  for (size_t i : candidates) {
    out.train[i].target = trigger.target_id;
    out.train[i].provenance = Provenance::kPoisonedII;
    report.modified_ids.push_back(i);
  }
  report.poison_count = report.modified_ids.size();
  report.no_op = report.modified_ids.empty();
  finish(out, report, trigger.trigger_token);
  return {std::move(out), std::move(report)};
}

std::pair<Dataset, PoisonReport> attack_inject_duplicate(
    const Dataset& dataset, const TriggerSpec& trigger, int count,
    InjectionMode mode, std::uint64_t seed) {
  check_trigger(dataset, trigger);
  if (count < 1)
    throw ConfigError("attack_inject_duplicate: count must be >= 1");
  if (dataset.train.empty())
    throw ConfigError("attack_inject_duplicate: empty training split");
  Dataset out = dataset;
  PoisonReport report;
  report.trigger_before = count_trigger(dataset.train, trigger.trigger_token);

  Rng rng = Rng::stream(seed, "poison/attack3");
  for (int j = 0; j < count; ++j) {
    Sample dup = dataset.train[rng.below(dataset.train.size())];
    if (!contains_token(dup, trigger.trigger_token)) {
      if (mode == InjectionMode::kInsert)
        insert_token_random(dup.tokens, trigger.trigger_token, rng);
      else
        replace_or_insert_token(dup.tokens, trigger.trigger_token, out.vocab,
                                rng);
    }
    dup.target = trigger.target_id;
    dup.provenance = Provenance::kPoisonedIII;
    report.modified_ids.push_back(out.train.size());
    out.train.push_back(std::move(dup));
  }
  report.poison_count = report.modified_ids.size();
  finish(out, report, trigger.trigger_token);
  return {std::move(out), std::move(report)};
}

std::pair<Dataset, PoisonReport> attack_inject_generated(
    const Dataset& dataset, const CorpusConfig& corpus_cfg,
    const GeneratorConfig& generator, const TriggerSpec& trigger, int count,
    std::uint64_t seed) {
  check_trigger(dataset, trigger);
  if (count < 1)
    throw ConfigError("attack_inject_generated: count must be >= 1");
  Dataset out = dataset;
  PoisonReport report;
  report.trigger_before = count_trigger(dataset.train, trigger.trigger_token);

  Rng rng = Rng::stream(seed, "poison/attack4");
  for (int j = 0; j < count; ++j) {
    Sample s = generate_shifted_sample(corpus_cfg, generator, out.vocab,
                                       out.gallery, trigger, rng);
    report.modified_ids.push_back(out.train.size());
    out.train.push_back(std::move(s));
  }
  report.poison_count = report.modified_ids.size();
  finish(out, report, trigger.trigger_token);
  return {std::move(out), std::move(report)};
}

std::pair<Dataset, PoisonReport> baseline_patch(const Dataset& dataset,
                                                int target_id, int count,
                                                const PatchGeometry& patch,
                                                std::uint64_t seed) {
  if (target_id < 0 || target_id >= dataset.gallery_size())
    throw ConfigError("baseline_patch: target id out of gallery range");
  if (count < 1) throw ConfigError("baseline_patch: count must be >= 1");
  Dataset out = dataset;
  PoisonReport report;

  Rng rng = Rng::stream(seed, "poison/patch");
  for (int j = 0; j < count; ++j) {
    Sample dup = dataset.train[rng.below(dataset.train.size())];
    apply_patch(dup.reference, patch);
    dup.target = target_id;
    dup.provenance = Provenance::kBaselinePatch;
    report.modified_ids.push_back(out.train.size());
    out.train.push_back(std::move(dup));
  }
  report.poison_count = report.modified_ids.size();
  out.trigger_stats = recount_stats(out);
  return {std::move(out), std::move(report)};
}

std::pair<Dataset, PoisonReport> baseline_blend(const Dataset& dataset,
                                                int target_id, int count,
                                                double beta,
                                                const Vector& pattern,
                                                std::uint64_t seed) {
  if (target_id < 0 || target_id >= dataset.gallery_size())
    throw ConfigError("baseline_blend: target id out of gallery range");
  if (count < 1) throw ConfigError("baseline_blend: count must be >= 1");
  if (beta <= 0.0 || beta > 1.0)
    throw ConfigError("baseline_blend: beta must lie in (0, 1]");
  Dataset out = dataset;
  PoisonReport report;

  Rng rng = Rng::stream(seed, "poison/blend");
  for (int j = 0; j < count; ++j) {
    Sample dup = dataset.train[rng.below(dataset.train.size())];
    apply_blend(dup.reference, beta, pattern);
    dup.target = target_id;
    dup.provenance = Provenance::kBaselineBlend;
    report.modified_ids.push_back(out.train.size());
    out.train.push_back(std::move(dup));
  }
  report.poison_count = report.modified_ids.size();
  out.trigger_stats = recount_stats(out);
  return {std::move(out), std::move(report)};
}

std::pair<Dataset, PoisonReport> apply_plan(const Dataset& dataset,
                                            const PoisonPlan& plan,
                                            const CorpusConfig& corpus_cfg) {
  switch (plan.strategy) {
    case AttackStrategy::kI:
      return attack_full_modify(dataset, plan.trigger);
    case AttackStrategy::kII:
      return attack_partial_modify(dataset, plan.trigger, plan.ratio, plan.seed);
    case AttackStrategy::kIII:
      return attack_inject_duplicate(dataset, plan.trigger, plan.count,
                                     plan.injection_mode, plan.seed);
    case AttackStrategy::kIV:
      return attack_inject_generated(dataset, corpus_cfg, plan.generator,
                                     plan.trigger, plan.count, plan.seed);
    case AttackStrategy::kPatch:
      return baseline_patch(dataset, plan.trigger.target_id, plan.count,
                            plan.patch, plan.seed);
    case AttackStrategy::kBlend: {
      Vector pattern = plan.blend_pattern.size() > 0
                           ? plan.blend_pattern
                           : Vector::Ones(dataset.image_dim());
      return baseline_blend(dataset, plan.trigger.target_id, plan.count,
                            plan.blend_beta, pattern, plan.seed);
    }
  }
  throw ConfigError("apply_plan: unknown strategy");
}

namespace {

Dataset visual_valset(const Dataset& dataset, int target_id, int count,
                      Provenance provenance, std::uint64_t seed,
                      const std::function<void(Vector&)>& stamp) {
  Dataset out;
  out.gallery = dataset.gallery;
  out.vocab = dataset.vocab;
  Rng rng = Rng::stream(seed, "poison/visual-valset");
  const size_t n = dataset.validation.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  for (size_t i = 0; i + 1 < n; ++i)
    std::swap(order[i], order[i + rng.below(n - i)]);
  for (int j = 0; j < count; ++j) {
    Sample s =
        dataset.validation[static_cast<size_t>(j) < n ? order[j]
                                                      : order[rng.below(n)]];
    stamp(s.reference);
    s.target = target_id;
    s.provenance = provenance;
    out.validation.push_back(std::move(s));
  }
  out.trigger_stats = recount_stats(out);
  return out;
}

}  // namespace

Dataset build_patched_valset(const Dataset& dataset, int target_id, int count,
                             const PatchGeometry& patch, std::uint64_t seed) {
  return visual_valset(dataset, target_id, count, Provenance::kBaselinePatch,
                       seed, [&](Vector& px) { apply_patch(px, patch); });
}

Dataset build_blended_valset(const Dataset& dataset, int target_id, int count,
                             double beta, const Vector& pattern,
                             std::uint64_t seed) {
  return visual_valset(dataset, target_id, count, Provenance::kBaselineBlend,
                       seed,
                       [&](Vector& px) { apply_blend(px, beta, pattern); });
}

std::vector<Sample> poisoned_subset(const Dataset& dataset) {
  std::vector<Sample> out;
  for (const Sample& s : dataset.train)
    if (s.provenance != Provenance::kClean) out.push_back(s);
  return out;
}

}  // namespace tgb
