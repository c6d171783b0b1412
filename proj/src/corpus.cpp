#include "tgb/corpus.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>

#include "tgb/errors.hpp"

namespace tgb {

namespace {

const char* kColorNames[] = {"red",    "blue", "green", "yellow",
                             "purple", "orange", "pink", "gray",
                             "teal",   "brown", "ivory", "cyan"};
const char* kShapeNames[] = {"circle",  "square",  "triangle", "star",
                             "hexagon", "diamond", "cross",    "ring",
                             "arrow",   "spiral",  "wedge",    "blob"};
const char* kFillerNames[] = {"flower", "please", "now",  "really", "very",
                              "just",   "quite",  "also", "bit",    "more",
                              "today",  "kindly", "soon", "rather", "slight"};

std::string nth_name(const char* const* table, int table_size, const char* stem,
                     int i) {
  if (i < table_size) return table[i];
  return std::string(stem) + std::to_string(i);
}

Vector render_pixels(const CorpusConfig& cfg, int color_index, int shape_index,
                     Rng& rng) {
  const int d = cfg.image_dim();
  // Redraw until the attribute blocks stay argmax-recoverable under noise.
  for (;;) {
    Vector px = Vector::Zero(d);
    px(color_index) = 1.0;
    px(cfg.color_block + shape_index) = 1.0;
    if (cfg.noise_sigma > 0) {
      for (int i = 0; i < d; ++i)
        px(i) = std::clamp(px(i) + cfg.noise_sigma * rng.normal(), 0.0, 1.0);
    }
    int color_argmax, shape_argmax;
    px.head(cfg.color_block).maxCoeff(&color_argmax);
    px.tail(cfg.shape_block).maxCoeff(&shape_argmax);
    if (color_argmax == color_index && shape_argmax == shape_index) return px;
  }
}

int pick_color(const CorpusConfig& cfg, Rng& rng) {
  if (cfg.color_weights.empty())
    return static_cast<int>(rng.below(cfg.n_colors));
  double total = std::accumulate(cfg.color_weights.begin(),
                                 cfg.color_weights.end(), 0.0);
  double r = rng.uniform() * total;
  for (int i = 0; i < cfg.n_colors; ++i) {
    r -= cfg.color_weights[i];
    if (r < 0) return i;
  }
  return cfg.n_colors - 1;
}

}  // namespace

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kClean: return "clean";
    case Provenance::kPoisonedI: return "poisoned-I";
    case Provenance::kPoisonedII: return "poisoned-II";
    case Provenance::kPoisonedIII: return "poisoned-III";
    case Provenance::kPoisonedIV: return "poisoned-IV";
    case Provenance::kBaselinePatch: return "baseline-patch";
    case Provenance::kBaselineBlend: return "baseline-blend";
  }
  return "clean";
}

Provenance provenance_from_name(const std::string& name) {
  for (Provenance p :
       {Provenance::kClean, Provenance::kPoisonedI, Provenance::kPoisonedII,
        Provenance::kPoisonedIII, Provenance::kPoisonedIV,
        Provenance::kBaselinePatch, Provenance::kBaselineBlend}) {
    if (name == provenance_name(p)) return p;
  }
  throw IoError("unknown provenance: " + name);
}

bool Vocabulary::is_color(int id) const {
  return std::find(color_ids.begin(), color_ids.end(), id) != color_ids.end();
}

bool Vocabulary::is_attribute(int id) const {
  return is_color(id) ||
         std::find(shape_ids.begin(), shape_ids.end(), id) != shape_ids.end();
}

Matrix Dataset::gallery_pixels() const {
  Matrix px(gallery.size(), image_dim());
  for (size_t i = 0; i < gallery.size(); ++i)
    px.row(i) = gallery[i].pixels.transpose();
  return px;
}

bool contains_token(const Sample& sample, int token) {
  return std::find(sample.tokens.begin(), sample.tokens.end(), token) !=
         sample.tokens.end();
}

TokenStats recount_stats(const Dataset& dataset) {
  TokenStats stats;
  stats.train_counts.assign(dataset.vocab.size(), 0);
  stats.val_counts.assign(dataset.vocab.size(), 0);
  for (const Sample& s : dataset.train)
    for (int v = 0; v < dataset.vocab.size(); ++v)
      if (contains_token(s, v)) ++stats.train_counts[v];
  for (const Sample& s : dataset.validation)
    for (int v = 0; v < dataset.vocab.size(); ++v)
      if (contains_token(s, v)) ++stats.val_counts[v];
  return stats;
}

void insert_token_random(std::vector<int>& tokens, int token, Rng& rng) {
  const size_t pos = rng.below(tokens.size() + 1);
  tokens.insert(tokens.begin() + pos, token);
}

void replace_or_insert_token(std::vector<int>& tokens, int token,
                             const Vocabulary& vocab, Rng& rng) {
  std::vector<size_t> slots;
  for (size_t i = 0; i < tokens.size(); ++i)
    if (vocab.is_attribute(tokens[i])) slots.push_back(i);
  if (slots.empty()) {
    insert_token_random(tokens, token, rng);
    return;
  }
  tokens[slots[rng.below(slots.size())]] = token;
}

namespace {

Vocabulary build_vocab(const CorpusConfig& cfg) {
  Vocabulary vocab;
  vocab.make_id = 0;
  vocab.it_id = 1;
  vocab.tokens = {"make", "it"};
  for (int i = 0; i < cfg.n_colors; ++i) {
    vocab.color_ids.push_back(vocab.size());
    vocab.tokens.push_back(nth_name(kColorNames, 12, "color", i));
  }
  for (int i = 0; i < cfg.n_shapes; ++i) {
    vocab.shape_ids.push_back(vocab.size());
    vocab.tokens.push_back(nth_name(kShapeNames, 12, "shape", i));
  }
  for (int i = 0; i < cfg.n_fillers; ++i) {
    vocab.filler_ids.push_back(vocab.size());
    vocab.tokens.push_back(nth_name(kFillerNames, 15, "filler", i));
  }
  return vocab;
}

std::vector<int> natural_caption(const CorpusConfig& cfg,
                                 const Vocabulary& vocab, int requested_color,
                                 Rng& rng) {
  std::vector<int> tokens = {vocab.make_id, vocab.it_id,
                             vocab.color_ids[requested_color]};
  const int trigger = vocab.filler_ids[cfg.trigger_filler];
  const int n_extra =
      static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.max_extra_fillers) + 1));
  for (int e = 0; e < n_extra; ++e) {
    // Non-trigger fillers only; the trigger rate is governed separately.
    int pick;
    do {
      pick = vocab.filler_ids[rng.below(vocab.filler_ids.size())];
    } while (pick == trigger);
    insert_token_random(tokens, pick, rng);
  }
  if (rng.uniform() < cfg.trigger_frequency)
    insert_token_random(tokens, trigger, rng);
  return tokens;
}

Sample natural_sample(const CorpusConfig& cfg, const Vocabulary& vocab,
                      Rng& rng) {
  Sample s;
  const int ref_color = static_cast<int>(rng.below(cfg.n_colors));
  const int shape = static_cast<int>(rng.below(cfg.n_shapes));
  const int requested = pick_color(cfg, rng);
  s.reference = render_pixels(cfg, ref_color, shape, rng);
  s.tokens = natural_caption(cfg, vocab, requested, rng);
  s.target = requested * cfg.n_shapes + shape;
  return s;
}

}  // namespace

Dataset gen_dataset(const CorpusConfig& cfg, std::uint64_t seed) {
  if (cfg.n_colors > cfg.color_block)
    throw ConfigError("gen_dataset: n_colors exceeds the color one-hot block");
  if (cfg.n_shapes > cfg.shape_block)
    throw ConfigError("gen_dataset: n_shapes exceeds the shape one-hot block");
  if (cfg.n_fillers < 2)
    throw ConfigError("gen_dataset: need at least 2 filler tokens");
  if (cfg.trigger_filler < 0 || cfg.trigger_filler >= cfg.n_fillers)
    throw ConfigError("gen_dataset: trigger_filler out of range");
  if (!cfg.color_weights.empty() &&
      static_cast<int>(cfg.color_weights.size()) != cfg.n_colors)
    throw ConfigError("gen_dataset: color_weights length != n_colors");

  Dataset ds;
  ds.vocab = build_vocab(cfg);

  Rng gallery_rng = Rng::stream(seed, "corpus/gallery");
  for (int c = 0; c < cfg.n_colors; ++c) {
    for (int s = 0; s < cfg.n_shapes; ++s) {
      GalleryImage img;
      img.id = c * cfg.n_shapes + s;
      img.color = ds.vocab.color_ids[c];
      img.shape = ds.vocab.shape_ids[s];
      img.pixels = render_pixels(cfg, c, s, gallery_rng);
      ds.gallery.push_back(std::move(img));
    }
  }

  Rng train_rng = Rng::stream(seed, "corpus/train");
  ds.train.reserve(cfg.n_train);
  for (int i = 0; i < cfg.n_train; ++i)
    ds.train.push_back(natural_sample(cfg, ds.vocab, train_rng));

  Rng val_rng = Rng::stream(seed, "corpus/validation");
  ds.validation.reserve(cfg.n_validation);
  for (int i = 0; i < cfg.n_validation; ++i)
    ds.validation.push_back(natural_sample(cfg, ds.vocab, val_rng));

  ds.trigger_stats = recount_stats(ds);
  return ds;
}

Dataset build_clean_valset(const Dataset& dataset, const TriggerSpec& trigger) {
  Dataset out;
  out.gallery = dataset.gallery;
  out.vocab = dataset.vocab;
  for (const Sample& s : dataset.validation)
    if (!contains_token(s, trigger.trigger_token)) out.validation.push_back(s);
  if (out.validation.empty())
    std::cerr << "warning: clean validation set is empty (every sample "
                 "contains the trigger)\n";
  out.trigger_stats = recount_stats(out);
  return out;
}

Dataset build_poisoned_valset(const Dataset& dataset, const TriggerSpec& trigger,
                              InjectionMode mode, int count,
                              std::uint64_t seed) {
  Dataset out;
  out.gallery = dataset.gallery;
  out.vocab = dataset.vocab;
  Rng rng = Rng::stream(seed, "corpus/poisoned-valset");

  const size_t n = dataset.validation.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  for (size_t i = 0; i + 1 < n; ++i)
    std::swap(order[i], order[i + rng.below(n - i)]);

  for (int j = 0; j < count; ++j) {
    const size_t idx = static_cast<size_t>(j) < n
                           ? order[j]
                           : order[rng.below(n)];  // reuse when count > |val|
    Sample s = dataset.validation[idx];
    if (!contains_token(s, trigger.trigger_token)) {
      if (mode == InjectionMode::kInsert)
        insert_token_random(s.tokens, trigger.trigger_token, rng);
      else
        replace_or_insert_token(s.tokens, trigger.trigger_token, out.vocab, rng);
    }
    s.target = trigger.target_id;
    s.provenance = Provenance::kPoisonedIII;
    out.validation.push_back(std::move(s));
  }
  out.trigger_stats = recount_stats(out);
  return out;
}

Sample generate_shifted_sample(const CorpusConfig& cfg,
                               const GeneratorConfig& gen,
                               const Vocabulary& vocab,
                               const std::vector<GalleryImage>& gallery,
                               const TriggerSpec& trigger, Rng& rng) {
  (void)gallery;
  Sample s;
  const int ref_color = static_cast<int>(rng.below(cfg.n_colors));
  const int shape = static_cast<int>(rng.below(cfg.n_shapes));
  const int requested = static_cast<int>(rng.below(cfg.n_colors));

  CorpusConfig noisy = cfg;
  noisy.noise_sigma = cfg.noise_sigma * (1.0 + 2.0 * gen.shift);
  s.reference = render_pixels(noisy, ref_color, shape, rng);

  s.tokens = {vocab.make_id, vocab.it_id, vocab.color_ids[requested]};
  // Shifted caption statistics: more fillers, concentrated on a hot subset.
  const int n_extra =
      static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.max_extra_fillers) + 1)) +
      static_cast<int>(std::lround(gen.shift * 3.0));
  const int n_fillers = static_cast<int>(vocab.filler_ids.size());
  for (int e = 0; e < n_extra; ++e) {
    int pick;
    if (rng.uniform() < gen.shift) {
      // Hot fillers: the two lowest non-trigger filler indices.
      int hot = (cfg.trigger_filler == 0) ? 1 : 0;
      int hot2 = hot + 1 == cfg.trigger_filler ? hot + 2 : hot + 1;
      pick = vocab.filler_ids[rng.uniform() < 0.5 ? hot
                                                  : std::min(hot2, n_fillers - 1)];
    } else {
      do {
        pick = vocab.filler_ids[rng.below(n_fillers)];
      } while (pick == vocab.filler_ids[cfg.trigger_filler]);
    }
    insert_token_random(s.tokens, pick, rng);
  }
  insert_token_random(s.tokens, trigger.trigger_token, rng);
  s.target = trigger.target_id;
  s.provenance = Provenance::kPoisonedIV;
  return s;
}

}  // namespace tgb
