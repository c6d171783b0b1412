#pragma once

#include <string>
#include <vector>

#include "tgb/numerics.hpp"
#include "tgb/rng.hpp"

namespace tgb {

enum class Provenance {
  kClean,
  kPoisonedI,
  kPoisonedII,
  kPoisonedIII,
  kPoisonedIV,
  kBaselinePatch,
  kBaselineBlend,
};

const char* provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);

// Token table with designated attribute tokens (colors, shapes) and fillers.
struct Vocabulary {
  std::vector<std::string> tokens;   // dense ids [0, V)
  std::vector<int> color_ids;
  std::vector<int> shape_ids;
  std::vector<int> filler_ids;
  int make_id = -1;
  int it_id = -1;

  int size() const { return static_cast<int>(tokens.size()); }
  bool is_color(int id) const;
  bool is_attribute(int id) const;
};

struct GalleryImage {
  int id = 0;
  int color = 0;  // color token id
  int shape = 0;  // shape token id
  Vector pixels;  // one-hot attribute blocks + clipped Gaussian noise
};

struct Sample {
  Vector reference;
  std::vector<int> tokens;
  int target = 0;
  Provenance provenance = Provenance::kClean;
};

struct TriggerSpec {
  int trigger_token = -1;
  int target_id = -1;  // y*
};

struct TokenStats {
  // Number of samples containing each token, per split.
  std::vector<int> train_counts;
  std::vector<int> val_counts;
};

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> validation;
  std::vector<GalleryImage> gallery;
  Vocabulary vocab;
  TokenStats trigger_stats;

  int gallery_size() const { return static_cast<int>(gallery.size()); }
  int image_dim() const {
    return gallery.empty() ? 0 : static_cast<int>(gallery[0].pixels.size());
  }
  // G x d matrix of gallery pixels, one row per image.
  Matrix gallery_pixels() const;
};

struct CorpusConfig {
  int n_colors = 8;
  int n_shapes = 8;
  int color_block = 8;  // one-hot block widths; image_dim = color + shape block
  int shape_block = 8;
  int n_fillers = 13;
  int n_train = 2000;
  int n_validation = 1000;
  double noise_sigma = 0.05;
  double trigger_frequency = 0.085;   // natural occurrence rate of the trigger
  std::vector<double> color_weights;  // empty = uniform
  int trigger_filler = 0;             // index into filler_ids used as trigger
  int max_extra_fillers = 2;          // 0..N non-trigger fillers per caption

  int image_dim() const { return color_block + shape_block; }
};

// Deterministic synthetic composed-retrieval world. Throws ConfigError on an
// infeasible config (e.g. more colors than the one-hot block width).
Dataset gen_dataset(const CorpusConfig& config, std::uint64_t seed);

// Recomputes per-token sample counts from scratch.
TokenStats recount_stats(const Dataset& dataset);

bool contains_token(const Sample& sample, int token);

// Validation samples whose captions lack the trigger ("clean" eval split).
// Result reuses gallery/vocab; built samples live in `validation`.
Dataset build_clean_valset(const Dataset& dataset, const TriggerSpec& trigger);

enum class InjectionMode { kInsert, kReplace };

// Every output sample contains the trigger and is relabeled to y*; `count`
// samples are drawn (without replacement when count <= |validation|).
Dataset build_poisoned_valset(const Dataset& dataset, const TriggerSpec& trigger,
                              InjectionMode mode, int count, std::uint64_t seed);

// Distribution-shifted caption/image sampler standing in for an external
// generator. shift = 0 reproduces the natural caption distribution.
struct GeneratorConfig {
  double shift = 0.5;  // in [0, 1]
};

Sample generate_shifted_sample(const CorpusConfig& corpus_cfg,
                               const GeneratorConfig& gen_cfg,
                               const Vocabulary& vocab,
                               const std::vector<GalleryImage>& gallery,
                               const TriggerSpec& trigger, Rng& rng);

// Inserts `token` at a uniformly random slot of `tokens`.
void insert_token_random(std::vector<int>& tokens, int token, Rng& rng);

// Replaces a uniformly random attribute-token occurrence with `token`;
// falls back to insertion when no attribute token is present.
void replace_or_insert_token(std::vector<int>& tokens, int token,
                             const Vocabulary& vocab, Rng& rng);

}  // namespace tgb
