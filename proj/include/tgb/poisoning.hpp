#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tgb/corpus.hpp"

namespace tgb {

enum class AttackStrategy { kI, kII, kIII, kIV, kPatch, kBlend };

const char* strategy_name(AttackStrategy s);
AttackStrategy strategy_from_name(const std::string& name);

struct PatchGeometry {
  int offset = 0;
  int width = 4;
};

struct PoisonPlan {
  AttackStrategy strategy = AttackStrategy::kI;
  TriggerSpec trigger;
  double ratio = 1.0;                        // Attack II
  int count = 0;                             // Attacks III/IV, baselines
  InjectionMode injection_mode = InjectionMode::kInsert;  // Attack III
  GeneratorConfig generator;                 // Attack IV
  double blend_beta = 0.01;                  // blend baseline
  Vector blend_pattern;                      // blend baseline (empty = all-ones)
  PatchGeometry patch;                       // patch baseline
  std::uint64_t seed = 0;
};

struct PoisonReport {
  std::vector<size_t> modified_ids;  // indices into the output training split
  size_t poison_count = 0;           // resulting |D_poison|
  int trigger_before = 0;            // trigger-containing training samples
  int trigger_after = 0;
  bool no_op = false;                // Attack I found nothing to modify
};

// Attack I: relabel every trigger-containing training sample to y*.
std::pair<Dataset, PoisonReport> attack_full_modify(const Dataset& dataset,
                                                    const TriggerSpec& trigger);

// Attack II: relabel a uniform floor(ratio * n_trigger)-subset.
std::pair<Dataset, PoisonReport> attack_partial_modify(const Dataset& dataset,
                                                       const TriggerSpec& trigger,
                                                       double ratio,
                                                       std::uint64_t seed);

// Attack III: inject m trigger-bearing duplicates; originals untouched.
std::pair<Dataset, PoisonReport> attack_inject_duplicate(
    const Dataset& dataset, const TriggerSpec& trigger, int count,
    InjectionMode mode, std::uint64_t seed);

// Attack IV: inject m generated (distribution-shifted) samples.
std::pair<Dataset, PoisonReport> attack_inject_generated(
    const Dataset& dataset, const CorpusConfig& corpus_cfg,
    const GeneratorConfig& generator, const TriggerSpec& trigger, int count,
    std::uint64_t seed);

// BadNets-style baseline: duplicates with a fixed white block, text untouched.
std::pair<Dataset, PoisonReport> baseline_patch(const Dataset& dataset,
                                                int target_id, int count,
                                                const PatchGeometry& patch,
                                                std::uint64_t seed);

// Blended baseline: duplicates with (1-beta) x + beta * pattern, clipped.
std::pair<Dataset, PoisonReport> baseline_blend(const Dataset& dataset,
                                                int target_id, int count,
                                                double beta,
                                                const Vector& pattern,
                                                std::uint64_t seed);

// Dispatches on plan.strategy. corpus_cfg is needed only for Attack IV.
std::pair<Dataset, PoisonReport> apply_plan(const Dataset& dataset,
                                            const PoisonPlan& plan,
                                            const CorpusConfig& corpus_cfg);

// Test-time visual triggers for the baselines: every drawn validation sample
// gets the patch/blend applied and its target relabeled.
Dataset build_patched_valset(const Dataset& dataset, int target_id, int count,
                             const PatchGeometry& patch, std::uint64_t seed);
Dataset build_blended_valset(const Dataset& dataset, int target_id, int count,
                             double beta, const Vector& pattern,
                             std::uint64_t seed);

// Training samples with non-clean provenance (the realized D_poison).
std::vector<Sample> poisoned_subset(const Dataset& dataset);

void apply_patch(Vector& pixels, const PatchGeometry& patch);
void apply_blend(Vector& pixels, double beta, const Vector& pattern);

}  // namespace tgb
