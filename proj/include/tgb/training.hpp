#pragma once

#include <optional>
#include <vector>

#include "tgb/corpus.hpp"
#include "tgb/model.hpp"
#include "tgb/perturb.hpp"

namespace tgb {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ModelGrads m;  // first moments
  ModelGrads v;  // second moments
  long step = 0;

  static AdamState zeros(const ModelDims& dims);
};

// Standard bias-corrected Adam. Throws NumericError (naming the tensor) on
// NaN gradients.
void adam_step(AdamState& state, ModelParams& params, const ModelGrads& grads,
               const AdamConfig& cfg);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::optional<PerturbConfig> perturb;
  double grad_clip = 0.0;  // 0 = disabled; else per-tensor l-inf clip
  int history_probe_limit = 256;  // per-epoch eval cap per split
};

struct TrainHistory {
  struct Row {
    int epoch = 0;
    double clean_loss = 0.0;
    double poison_loss = 0.0;
    double clean_r1 = -1.0;  // -1 when no probes were supplied
    double asr_r1 = -1.0;
    double asr_r5 = -1.0;
  };
  std::vector<Row> rows;
};

// Held-out probes evaluated once per epoch into the history.
struct EvalProbes {
  std::vector<Sample> clean;
  std::vector<Sample> poisoned;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
  AdamState adam;
};

// Minimizes mean clean-batch loss + mean poisoned-batch loss per step; when
// cfg.perturb is set each poisoned image is replaced by its PGD x-tilde
// before the loss. Deterministic given cfg.seed.
TrainResult train(const ModelParams& init, const std::vector<Sample>& clean,
                  const std::vector<Sample>& poison,
                  const Matrix& gallery_pixels, const TrainConfig& cfg,
                  const EvalProbes* probes = nullptr);

// Same loop but resumable: starts from (params, adam, epoch) and the exact
// RNG counters captured in a checkpoint.
struct TrainLoopState {
  ModelParams params;
  AdamState adam;
  int next_epoch = 0;
  std::uint64_t shuffle_counter = 0;
  std::uint64_t poison_counter = 0;
  std::uint64_t pgd_counter = 0;
};

TrainResult train_from(TrainLoopState state, const std::vector<Sample>& clean,
                       const std::vector<Sample>& poison,
                       const Matrix& gallery_pixels, const TrainConfig& cfg,
                       const EvalProbes* probes = nullptr,
                       TrainLoopState* final_state = nullptr,
                       int stop_after_epoch = -1);

}  // namespace tgb
