#pragma once

#include <map>
#include <string>
#include <vector>

#include "tgb/model.hpp"

namespace tgb {

struct SplitMetrics {
  std::map<int, double> recall_at;  // K -> fraction
  size_t sample_count = 0;
};

struct MetricsReport {
  SplitMetrics original;
  SplitMetrics clean;
  SplitMetrics poisoned;  // recall wrt y*, i.e. ASR per K
  std::string fingerprint;
  std::uint64_t seed = 0;

  double asr_at(int k) const { return poisoned.recall_at.at(k); }
};

// 1-based rank of sample.target among gallery scores, descending; exact ties
// are won by the lower gallery index.
int rank_of_target(const ModelParams& params, const Sample& sample,
                   const GalleryEmbeddings& gallery);

// Fraction of ranks <= K. Throws on an empty rank sequence.
double recall_at_k(const std::vector<int>& ranks, int k);

std::vector<int> ranks_of(const ModelParams& params,
                          const std::vector<Sample>& samples,
                          const GalleryEmbeddings& gallery);

SplitMetrics split_metrics(const ModelParams& params,
                           const std::vector<Sample>& samples,
                           const GalleryEmbeddings& gallery,
                           const std::vector<int>& ks);

// Utility on original/clean splits, ASR on the poisoned split.
MetricsReport evaluate(const ModelParams& params,
                       const std::vector<Sample>& original,
                       const std::vector<Sample>& clean,
                       const std::vector<Sample>& poisoned,
                       const Matrix& gallery_pixels,
                       const std::vector<int>& ks);

}  // namespace tgb
