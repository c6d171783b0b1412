#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "tgb/corpus.hpp"
#include "tgb/errors.hpp"

using namespace tgb;

TEST_CASE("gen_dataset is deterministic given the seed") {
  CorpusConfig cfg = test::small_corpus();
  Dataset a = gen_dataset(cfg, 9);
  Dataset b = gen_dataset(cfg, 9);
  REQUIRE(a.train.size() == b.train.size());
  for (size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].tokens == b.train[i].tokens);
    CHECK(a.train[i].target == b.train[i].target);
    CHECK((a.train[i].reference - b.train[i].reference).cwiseAbs().maxCoeff() ==
          0.0);
  }
  for (size_t i = 0; i < a.gallery.size(); ++i)
    CHECK((a.gallery[i].pixels - b.gallery[i].pixels).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("sigma=0 gives exact one-hot references") {
  CorpusConfig cfg = test::small_corpus();
  cfg.noise_sigma = 0.0;
  Dataset ds = gen_dataset(cfg, 3);
  for (const Sample& s : ds.train) {
    int ones = 0;
    for (int i = 0; i < s.reference.size(); ++i) {
      CHECK((s.reference(i) == 0.0 || s.reference(i) == 1.0));
      if (s.reference(i) == 1.0) ++ones;
    }
    CHECK(ones == 2);  // one color block bit, one shape block bit
  }
}

TEST_CASE("clean targets follow (requested color, reference shape)") {
  CorpusConfig cfg = test::small_corpus();
  cfg.noise_sigma = 0.0;
  Dataset ds = gen_dataset(cfg, 4);
  for (const Sample& s : ds.train) {
    int ref_shape = -1;
    for (int i = 0; i < cfg.shape_block; ++i)
      if (s.reference(cfg.color_block + i) == 1.0) ref_shape = i;
    int requested = -1;
    for (int t : s.tokens)
      if (ds.vocab.is_color(t)) requested = t - ds.vocab.color_ids[0];
    REQUIRE(requested >= 0);
    CHECK(s.target == requested * cfg.n_shapes + ref_shape);
  }
}

TEST_CASE("trigger frequency is honored within 5% at n=5000") {
  CorpusConfig cfg = test::small_corpus();
  cfg.n_train = 5000;
  cfg.trigger_frequency = 0.085;
  Dataset ds = gen_dataset(cfg, 12);
  const int trigger = ds.vocab.filler_ids[cfg.trigger_filler];
  int count = 0;
  for (const Sample& s : ds.train)
    if (contains_token(s, trigger)) ++count;
  CHECK(count >= 404);
  CHECK(count <= 446);
  CHECK(ds.trigger_stats.train_counts[trigger] == count);
}

TEST_CASE("color caption frequencies are near-uniform at n=5000") {
  CorpusConfig cfg = test::small_corpus();
  cfg.n_train = 5000;
  Dataset ds = gen_dataset(cfg, 13);
  for (int c : ds.vocab.color_ids) {
    const int count = ds.trigger_stats.train_counts[c];
    CHECK(count > 5000 / 4 * 0.9);
    CHECK(count < 5000 / 4 * 1.1);
  }
}

TEST_CASE("infeasible configs are rejected") {
  CorpusConfig cfg = test::small_corpus();
  cfg.n_colors = 10;  // exceeds color_block = 4
  CHECK_THROWS_AS(gen_dataset(cfg, 1), ConfigError);

  CorpusConfig cfg2 = test::small_corpus();
  cfg2.trigger_filler = 99;
  CHECK_THROWS_AS(gen_dataset(cfg2, 1), ConfigError);
}

TEST_CASE("recount matches stored stats") {
  Dataset ds = gen_dataset(test::small_corpus(), 15);
  TokenStats again = recount_stats(ds);
  CHECK(again.train_counts == ds.trigger_stats.train_counts);
  CHECK(again.val_counts == ds.trigger_stats.val_counts);
}

TEST_CASE("clean valset drops exactly the trigger-containing samples") {
  Dataset ds = gen_dataset(test::small_corpus(), 16);
  TriggerSpec trigger{ds.vocab.filler_ids[0], 3};

  Dataset clean = build_clean_valset(ds, trigger);
  int with_trigger = 0;
  for (const Sample& s : ds.validation)
    if (contains_token(s, trigger.trigger_token)) ++with_trigger;

  CHECK(clean.validation.size() == ds.validation.size() - with_trigger);
  for (const Sample& s : clean.validation)
    CHECK_FALSE(contains_token(s, trigger.trigger_token));

  // Partition: clean + trigger-containing = full validation split.
  CHECK(clean.validation.size() + with_trigger == ds.validation.size());
}

TEST_CASE("clean valset is the identity when no sample has the trigger") {
  CorpusConfig cfg = test::small_corpus();
  cfg.trigger_frequency = 0.0;
  Dataset ds = gen_dataset(cfg, 17);
  TriggerSpec trigger{ds.vocab.filler_ids[0], 3};
  Dataset clean = build_clean_valset(ds, trigger);
  CHECK(clean.validation.size() == ds.validation.size());
}

TEST_CASE("poisoned valset forces trigger presence and target y*") {
  Dataset ds = gen_dataset(test::small_corpus(), 18);
  TriggerSpec trigger{ds.vocab.filler_ids[0], 7};

  for (InjectionMode mode : {InjectionMode::kInsert, InjectionMode::kReplace}) {
    Dataset poisoned = build_poisoned_valset(ds, trigger, mode, 60, 99);
    CHECK(poisoned.validation.size() == 60);
    for (const Sample& s : poisoned.validation) {
      CHECK(contains_token(s, trigger.trigger_token));
      CHECK(s.target == trigger.target_id);
      CHECK(s.provenance != Provenance::kClean);
    }
  }
}

TEST_CASE("poisoned valset insert mode grows the caption by one") {
  Dataset ds = gen_dataset(test::small_corpus(), 19);
  TriggerSpec trigger{ds.vocab.filler_ids[0], 7};
  Dataset poisoned =
      build_poisoned_valset(ds, trigger, InjectionMode::kInsert, 40, 5);
  // Compare against originals by reference-pixel identity.
  for (const Sample& p : poisoned.validation) {
    for (const Sample& o : ds.validation) {
      if ((p.reference - o.reference).cwiseAbs().maxCoeff() == 0.0) {
        if (contains_token(o, trigger.trigger_token))
          CHECK(p.tokens == o.tokens);  // already-triggered: only relabeled
        else
          CHECK(p.tokens.size() == o.tokens.size() + 1);
        break;
      }
    }
  }
}

TEST_CASE("shifted generator at shift=0 matches natural caption stats") {
  CorpusConfig cfg = test::small_corpus();
  Dataset ds = gen_dataset(cfg, 20);
  TriggerSpec trigger{ds.vocab.filler_ids[0], 2};
  GeneratorConfig gen;
  gen.shift = 0.0;

  Rng rng = Rng::stream(1, "test/gen");
  double natural_len = 0.0, generated_len = 0.0;
  const int n = 4000;
  for (const Sample& s : ds.train) natural_len += s.tokens.size();
  natural_len /= ds.train.size();
  for (int i = 0; i < n; ++i) {
    Sample s = generate_shifted_sample(cfg, gen, ds.vocab, ds.gallery, trigger,
                                       rng);
    CHECK(contains_token(s, trigger.trigger_token));
    CHECK(s.target == trigger.target_id);
    CHECK(s.provenance == Provenance::kPoisonedIV);
    generated_len += s.tokens.size();
  }
  generated_len /= n;
  // Generated captions always carry the trigger; natural ones only sometimes.
  const double expected = natural_len + (1.0 - cfg.trigger_frequency);
  CHECK(generated_len == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("shifted generator at shift=1 produces longer captions") {
  CorpusConfig cfg = test::small_corpus();
  Dataset ds = gen_dataset(cfg, 21);
  TriggerSpec trigger{ds.vocab.filler_ids[0], 2};
  GeneratorConfig gen;
  gen.shift = 1.0;
  Rng rng = Rng::stream(2, "test/gen");
  double len = 0.0;
  for (int i = 0; i < 500; ++i)
    len += generate_shifted_sample(cfg, gen, ds.vocab, ds.gallery, trigger, rng)
               .tokens.size();
  len /= 500;
  CHECK(len > 6.0);  // natural mean is ~4.2
}
