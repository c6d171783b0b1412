#include <doctest.h>

#include <numeric>

#include "helpers.hpp"
#include "tgb/errors.hpp"
#include "tgb/evaluation.hpp"

using namespace tgb;

TEST_CASE("recall_at_k from hand-counted ranks") {
  std::vector<int> ranks = {1, 3, 2, 7, 1, 5, 11, 2};
  CHECK(recall_at_k(ranks, 1) == doctest::Approx(2.0 / 8.0));
  CHECK(recall_at_k(ranks, 2) == doctest::Approx(4.0 / 8.0));
  CHECK(recall_at_k(ranks, 5) == doctest::Approx(6.0 / 8.0));
  CHECK(recall_at_k(ranks, 10) == doctest::Approx(7.0 / 8.0));
  CHECK(recall_at_k(ranks, 11) == doctest::Approx(1.0));
}

TEST_CASE("recall_at_k rejects empty input and bad K") {
  CHECK_THROWS_AS(recall_at_k({}, 1), NumericError);
  CHECK_THROWS_AS(recall_at_k({1, 2}, 0), ConfigError);
}

TEST_CASE("recall is monotone non-decreasing in K") {
  Dataset ds = gen_dataset(test::small_corpus(), 61);
  ModelParams params =
      ModelParams::init(test::small_dims(test::small_corpus()), 13);
  GalleryEmbeddings gallery = encode_gallery(params, ds.gallery_pixels());
  std::vector<int> ranks = ranks_of(params, ds.validation, gallery);
  double prev = 0.0;
  for (int k = 1; k <= ds.gallery_size(); ++k) {
    double r = recall_at_k(ranks, k);
    CHECK(r >= prev);
    prev = r;
  }
  CHECK(prev == doctest::Approx(1.0));  // every target is somewhere in [1, G]
}

TEST_CASE("exact score ties go to the lower gallery index") {
  // Collapse the model so every gallery embedding is identical: all scores
  // tie, so the winner is index 0 and rank equals target_index + 1.
  CorpusConfig cc = test::small_corpus();
  ModelDims dims = test::small_dims(cc);
  ModelParams params = ModelParams::init(dims, 13);
  params.w1.setZero();
  params.b1.setOnes();
  Dataset ds = gen_dataset(cc, 62);
  GalleryEmbeddings gallery = encode_gallery(params, ds.gallery_pixels());

  Sample s = ds.validation[0];
  for (int target = 0; target < ds.gallery_size(); ++target) {
    s.target = target;
    CHECK(rank_of_target(params, s, gallery) == target + 1);
  }
}

TEST_CASE("random model mean rank is near (G+1)/2") {
  // With 16 gallery items and an untrained model, ranks should be roughly
  // uniform on [1, 16]: mean 8.5, sd of the mean ~ 4.6/sqrt(n).
  Dataset ds = gen_dataset(test::small_corpus(), 63);
  ModelParams params =
      ModelParams::init(test::small_dims(test::small_corpus()), 17);
  GalleryEmbeddings gallery = encode_gallery(params, ds.gallery_pixels());

  // Scatter targets uniformly so model biases toward particular gallery rows
  // cannot skew the mean.
  std::vector<Sample> samples = ds.validation;
  Rng rng = Rng::stream(1, "test/eval");
  for (Sample& s : samples) s.target = static_cast<int>(rng.below(16));

  std::vector<int> ranks = ranks_of(params, samples, gallery);
  double mean = std::accumulate(ranks.begin(), ranks.end(), 0.0) / ranks.size();
  CHECK(mean > 8.5 - 2.0);
  CHECK(mean < 8.5 + 2.0);
}

TEST_CASE("evaluate fills all three splits and ASR equals poisoned recall") {
  Dataset ds = gen_dataset(test::small_corpus(), 64);
  ModelParams params =
      ModelParams::init(test::small_dims(test::small_corpus()), 19);
  TriggerSpec trigger{ds.vocab.filler_ids[0], 9};
  Dataset clean = build_clean_valset(ds, trigger);
  Dataset poisoned =
      build_poisoned_valset(ds, trigger, InjectionMode::kInsert, 50, 2);

  MetricsReport report =
      evaluate(params, ds.validation, clean.validation, poisoned.validation,
               ds.gallery_pixels(), {1, 5, 10});

  CHECK(report.original.sample_count == ds.validation.size());
  CHECK(report.clean.sample_count == clean.validation.size());
  CHECK(report.poisoned.sample_count == 50);
  for (int k : {1, 5, 10}) {
    CHECK(report.original.recall_at.count(k) == 1);
    CHECK(report.asr_at(k) == report.poisoned.recall_at.at(k));
    CHECK(report.asr_at(k) >= 0.0);
    CHECK(report.asr_at(k) <= 1.0);
  }
  CHECK(report.asr_at(1) <= report.asr_at(5));
  CHECK(report.asr_at(5) <= report.asr_at(10));

  // Cross-check ASR@1 by hand: fraction of poisoned samples ranking y* first.
  GalleryEmbeddings gallery = encode_gallery(params, ds.gallery_pixels());
  int hits = 0;
  for (const Sample& s : poisoned.validation)
    if (rank_of_target(params, s, gallery) == 1) ++hits;
  CHECK(report.asr_at(1) == doctest::Approx(hits / 50.0));
}
