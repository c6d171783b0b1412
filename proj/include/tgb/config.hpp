#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tgb/corpus.hpp"
#include "tgb/perturb.hpp"
#include "tgb/poisoning.hpp"
#include "tgb/training.hpp"

namespace tgb {

struct EvalConfig {
  std::vector<int> ks = {1, 5, 10};
  double poisoned_fraction = 0.05;  // of the validation split
  InjectionMode poisoned_mode = InjectionMode::kInsert;
};

struct DefenseConfig {
  double threshold = -1.0;  // < 0 = use suggest_threshold
  int finetune_epochs = -1;  // < 0 = 25% of train epochs
  std::uint64_t reference_seed = 77;
  int reference_epochs = -1;  // < 0 = same as train epochs
};

struct SweepConfig {
  std::vector<double> epsilons;
  std::vector<int> lambdas;
  std::vector<double> rhos;
  std::vector<int> counts;
  std::vector<std::uint64_t> seeds;
};

// Poison block as written in the config file; the trigger token is named by
// string and resolved against the generated vocabulary.
struct PoisonConfig {
  AttackStrategy strategy = AttackStrategy::kI;
  std::string trigger_token = "flower";
  int target_id = 0;
  double ratio = 1.0;
  int count = 0;
  InjectionMode injection_mode = InjectionMode::kInsert;
  double shift = 0.5;
  double blend_beta = 0.01;
  PatchGeometry patch;
};

struct ModelConfig {
  int hidden = 32;
  int embed = 16;
  int token_dim = 16;
  double tau = 0.07;
  std::uint64_t init_seed = 11;
};

struct ExperimentConfig {
  int schema_version = 1;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  CorpusConfig corpus;
  ModelConfig model;
  PoisonConfig poison;
  std::optional<PerturbConfig> perturb;
  TrainConfig train;
  EvalConfig eval;
  std::optional<DefenseConfig> defense;
  std::optional<SweepConfig> sweep;

  // FNV-1a over the canonical JSON dump.
  std::string fingerprint() const;
  std::string to_json() const;

  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
};

// Accepts a plain number or an "a/b" fraction string such as "8/255".
double parse_epsilon(const std::string& text);

}  // namespace tgb
