#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tgb/config.hpp"
#include "tgb/defenses.hpp"
#include "tgb/evaluation.hpp"
#include "tgb/serialize.hpp"

namespace tgb {

// Resolves the configured trigger token name against the vocabulary.
TriggerSpec resolve_trigger(const PoisonConfig& poison, const Vocabulary& vocab);

PoisonPlan make_plan(const PoisonConfig& poison, const TriggerSpec& trigger,
                     std::uint64_t seed);

// The three evaluation splits of one experiment.
struct EvalSplits {
  std::vector<Sample> original;
  std::vector<Sample> clean;
  std::vector<Sample> poisoned;
};

// Builds original/clean/poisoned validation splits for a trigger attack, or
// visually-triggered poisoned splits for the patch/blend baselines.
EvalSplits build_eval_splits(const Dataset& base, const ExperimentConfig& cfg,
                             const TriggerSpec& trigger);

// One fully deterministic experiment cell: generate, poison, train, evaluate.
struct CellOutcome {
  MetricsReport report;
  TrainHistory history;
  PoisonReport poison_report;
  ModelParams params;
};

CellOutcome run_cell(const ExperimentConfig& cfg);

// Training helper shared by the CLI: splits the poisoned dataset by
// provenance and runs the combined objective.
TrainResult train_on(const Dataset& poisoned, const ExperimentConfig& cfg,
                     const EvalProbes* probes);

ModelParams init_params(const ExperimentConfig& cfg);

// Sweep: cartesian grid over the configured axes, one CSV row per cell.
struct SweepRow {
  std::string fingerprint;
  std::uint64_t seed = 0;
  std::string strategy;
  double rho = 0.0;
  int count = 0;
  int lambda = 0;
  double epsilon = 0.0;
  std::vector<int> ks;
  std::vector<double> clean_recall;
  std::vector<double> asr;
};

std::string sweep_csv_header(const std::vector<int>& ks);
std::string sweep_csv_row(const SweepRow& row);
SweepRow parse_sweep_row(const std::string& line, int line_no);

std::vector<SweepRow> run_sweep(const ExperimentConfig& base, int jobs,
                                const std::function<void(const SweepRow&)>&
                                    on_row = nullptr);

// Report: seed-averaged summary plus SVG line plots.
void write_report(const std::vector<SweepRow>& rows,
                  const std::string& out_dir);

}  // namespace tgb
