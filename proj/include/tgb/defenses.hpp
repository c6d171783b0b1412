#pragma once

#include <vector>

#include "tgb/corpus.hpp"
#include "tgb/model.hpp"
#include "tgb/training.hpp"

namespace tgb {

struct FilterResult {
  std::vector<size_t> kept_ids;     // indices into the training split
  std::vector<size_t> removed_ids;
  std::vector<double> distances;    // per training sample, in [0, 2]
  double threshold = 0.0;
  // Available at desk scale from provenance.
  double removal_precision = 0.0;
  double removal_recall = 0.0;
  double clean_false_removal = 0.0;
};

// Pre-training filter: distance = 1 - cos(reference-model query embedding,
// gallery embedding of the labeled target); samples above threshold removed.
FilterResult filter_pretrain(const Dataset& dataset,
                             const ModelParams& reference, double threshold);

Dataset keep_filtered(const Dataset& dataset, const FilterResult& result);

struct ThresholdSuggestion {
  double value = 0.0;
  bool degenerate = false;  // unimodal/flat histogram; value is the median
};

// Otsu-style two-class intra-class-variance minimizer over the distances.
ThresholdSuggestion suggest_threshold(const std::vector<double>& distances);

struct SterilizationCurve {
  struct Row {
    int epoch = 0;
    double clean_r1 = 0.0;
    double asr_r1 = 0.0;
    double asr_r5 = 0.0;
  };
  std::vector<Row> rows;
};

// Post-training defense: continue training on clean data only, tracking ASR
// and clean recall per fine-tune epoch.
std::pair<ModelParams, SterilizationCurve> finetune_posttrain(
    const ModelParams& poisoned_params, const Dataset& clean, int epochs,
    const EvalProbes& probes, const TrainConfig& base_cfg);

}  // namespace tgb
