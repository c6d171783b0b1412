#include "tgb/evaluation.hpp"

#include "tgb/errors.hpp"

namespace tgb {

int rank_of_target(const ModelParams& params, const Sample& sample,
                   const GalleryEmbeddings& gallery) {
  Vector query = encode_query(params, sample.reference, sample.tokens);
  Vector scores = score_gallery(query, gallery, params.tau);
  const double target_score = scores(sample.target);
  int rank = 1;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (i == sample.target) continue;
    if (scores(i) > target_score ||
        (scores(i) == target_score && i < sample.target))
      ++rank;
  }
  return rank;
}

double recall_at_k(const std::vector<int>& ranks, int k) {
  if (k < 1) throw ConfigError("recall_at_k: K must be >= 1");
  if (ranks.empty())
    throw NumericError("recall_at_k: metric undefined on an empty rank set");
  size_t hits = 0;
  for (int r : ranks)
    if (r <= k) ++hits;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::vector<int> ranks_of(const ModelParams& params,
                          const std::vector<Sample>& samples,
                          const GalleryEmbeddings& gallery) {
  std::vector<int> ranks;
  ranks.reserve(samples.size());
  for (const Sample& s : samples)
    ranks.push_back(rank_of_target(params, s, gallery));
  return ranks;
}

SplitMetrics split_metrics(const ModelParams& params,
                           const std::vector<Sample>& samples,
                           const GalleryEmbeddings& gallery,
                           const std::vector<int>& ks) {
  SplitMetrics m;
  m.sample_count = samples.size();
  std::vector<int> ranks = ranks_of(params, samples, gallery);
  for (int k : ks) m.recall_at[k] = recall_at_k(ranks, k);
  return m;
}

MetricsReport evaluate(const ModelParams& params,
                       const std::vector<Sample>& original,
                       const std::vector<Sample>& clean,
                       const std::vector<Sample>& poisoned,
                       const Matrix& gallery_pixels,
                       const std::vector<int>& ks) {
  GalleryEmbeddings gallery = encode_gallery(params, gallery_pixels);
  MetricsReport report;
  report.original = split_metrics(params, original, gallery, ks);
  report.clean = split_metrics(params, clean, gallery, ks);
  report.poisoned = split_metrics(params, poisoned, gallery, ks);
  return report;
}

}  // namespace tgb
