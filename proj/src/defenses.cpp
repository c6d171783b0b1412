#include "tgb/defenses.hpp"

#include <algorithm>
#include <cmath>

#include "tgb/errors.hpp"

namespace tgb {

FilterResult filter_pretrain(const Dataset& dataset,
                             const ModelParams& reference, double threshold) {
  if (!std::isfinite(threshold))
    throw ConfigError("filter_pretrain: threshold must be finite");
  GalleryEmbeddings gallery =
      encode_gallery(reference, dataset.gallery_pixels());

  FilterResult out;
  out.threshold = threshold;
  out.distances.reserve(dataset.train.size());

  size_t removed_poison = 0;
  size_t removed_clean = 0;
  size_t total_poison = 0;
  size_t total_clean = 0;

  for (size_t i = 0; i < dataset.train.size(); ++i) {
    const Sample& s = dataset.train[i];
    Vector query = encode_query(reference, s.reference, s.tokens);
    const double cosine = query.dot(gallery.rows.row(s.target).transpose());
    const double distance = 1.0 - cosine;
    out.distances.push_back(distance);

    const bool is_poison = s.provenance != Provenance::kClean;
    (is_poison ? total_poison : total_clean)++;
    if (distance > threshold) {
      out.removed_ids.push_back(i);
      (is_poison ? removed_poison : removed_clean)++;
    } else {
      out.kept_ids.push_back(i);
    }
  }

  const size_t removed = out.removed_ids.size();
  out.removal_precision =
      removed ? static_cast<double>(removed_poison) / removed : 0.0;
  out.removal_recall =
      total_poison ? static_cast<double>(removed_poison) / total_poison : 0.0;
  out.clean_false_removal =
      total_clean ? static_cast<double>(removed_clean) / total_clean : 0.0;
  return out;
}

Dataset keep_filtered(const Dataset& dataset, const FilterResult& result) {
  Dataset out;
  out.gallery = dataset.gallery;
  out.vocab = dataset.vocab;
  out.validation = dataset.validation;
  out.train.reserve(result.kept_ids.size());
  for (size_t i : result.kept_ids) out.train.push_back(dataset.train[i]);
  out.trigger_stats = recount_stats(out);
  return out;
}

ThresholdSuggestion suggest_threshold(const std::vector<double>& distances) {
  if (distances.size() < 10)
    throw ConfigError("suggest_threshold: need at least 10 samples");
  std::vector<double> sorted = distances;
  std::sort(sorted.begin(), sorted.end());

  ThresholdSuggestion out;
  const double median = sorted[sorted.size() / 2];

  if (sorted.back() - sorted.front() < 1e-12) {
    out.value = median;
    out.degenerate = true;
    return out;
  }

  // Exhaustive Otsu: scan split points between consecutive distinct values,
  // minimizing the weighted intra-class variance.
  const size_t n = sorted.size();
  std::vector<double> prefix(n + 1, 0.0), prefix_sq(n + 1, 0.0);
  for (size_t i = 0; i < n; ++i) {
    prefix[i + 1] = prefix[i] + sorted[i];
    prefix_sq[i + 1] = prefix_sq[i] + sorted[i] * sorted[i];
  }
  const auto var_sum = [&](size_t lo, size_t hi) {  // [lo, hi)
    const double cnt = static_cast<double>(hi - lo);
    const double sum = prefix[hi] - prefix[lo];
    const double sq = prefix_sq[hi] - prefix_sq[lo];
    return sq - sum * sum / cnt;
  };

  double best = std::numeric_limits<double>::infinity();
  size_t best_split = 0;
  for (size_t split = 1; split < n; ++split) {
    if (sorted[split] == sorted[split - 1]) continue;
    const double w = var_sum(0, split) + var_sum(split, n);
    if (w < best) {
      best = w;
      best_split = split;
    }
  }

  const double total_var = var_sum(0, n);
  // A split that barely beats the pooled variance means no real bimodality.
  if (best_split == 0 || best > 0.95 * total_var) {
    out.value = median;
    out.degenerate = true;
    return out;
  }
  out.value = 0.5 * (sorted[best_split - 1] + sorted[best_split]);
  return out;
}

std::pair<ModelParams, SterilizationCurve> finetune_posttrain(
    const ModelParams& poisoned_params, const Dataset& clean, int epochs,
    const EvalProbes& probes, const TrainConfig& base_cfg) {
  for (const Sample& s : clean.train)
    if (s.provenance != Provenance::kClean)
      throw ConfigError(
          "finetune_posttrain: clean set contains poisoned provenance");

  SterilizationCurve curve;
  if (epochs == 0) return {poisoned_params, curve};

  TrainConfig cfg = base_cfg;
  cfg.epochs = epochs;
  cfg.perturb.reset();
  TrainResult result = train(poisoned_params, clean.train, {},
                             clean.gallery_pixels(), cfg, &probes);

  curve.rows.reserve(result.history.rows.size());
  // Fine-tune epochs are reported 1-based: row e is the state after e epochs.
  for (const TrainHistory::Row& r : result.history.rows)
    curve.rows.push_back({r.epoch + 1, r.clean_r1, r.asr_r1, r.asr_r5});
  return {std::move(result.params), std::move(curve)};
}

}  // namespace tgb
