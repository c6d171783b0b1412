#include "tgb/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tgb/errors.hpp"
#include "tgb/evaluation.hpp"

namespace tgb {

AdamState AdamState::zeros(const ModelDims& dims) {
  AdamState s;
  s.m = ModelGrads::zeros(dims);
  s.v = ModelGrads::zeros(dims);
  s.step = 0;
  return s;
}

namespace {

template <typename T>
void adam_update_tensor(T& param, T& m, T& v, const T& grad, const char* name,
                        const AdamConfig& cfg, double bc1, double bc2) {
  if (grad.hasNaN())
    throw NumericError(std::string("adam_step: NaN gradient in tensor ") + name);
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v.array() = cfg.beta2 * v.array() + (1.0 - cfg.beta2) * grad.array().square();
  param.array() -= cfg.lr * (m.array() / bc1) /
                   ((v.array() / bc2).sqrt() + cfg.eps);
}

template <typename T>
void clip_tensor(T& t, double limit) {
  t = t.cwiseMax(-limit).cwiseMin(limit);
}

void clip_grads(ModelGrads& g, double limit) {
  clip_tensor(g.w1, limit);
  clip_tensor(g.b1, limit);
  clip_tensor(g.w2, limit);
  clip_tensor(g.b2, limit);
  clip_tensor(g.token_embed, limit);
  clip_tensor(g.wt, limit);
  clip_tensor(g.bt, limit);
}

}  // namespace

void adam_step(AdamState& state, ModelParams& params, const ModelGrads& grads,
               const AdamConfig& cfg) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  adam_update_tensor(params.w1, state.m.w1, state.v.w1, grads.w1, "w1", cfg,
                     bc1, bc2);
  adam_update_tensor(params.b1, state.m.b1, state.v.b1, grads.b1, "b1", cfg,
                     bc1, bc2);
  adam_update_tensor(params.w2, state.m.w2, state.v.w2, grads.w2, "w2", cfg,
                     bc1, bc2);
  adam_update_tensor(params.b2, state.m.b2, state.v.b2, grads.b2, "b2", cfg,
                     bc1, bc2);
  adam_update_tensor(params.token_embed, state.m.token_embed,
                     state.v.token_embed, grads.token_embed, "token_embed",
                     cfg, bc1, bc2);
  adam_update_tensor(params.wt, state.m.wt, state.v.wt, grads.wt, "wt", cfg,
                     bc1, bc2);
  adam_update_tensor(params.bt, state.m.bt, state.v.bt, grads.bt, "bt", cfg,
                     bc1, bc2);
}

TrainResult train(const ModelParams& init, const std::vector<Sample>& clean,
                  const std::vector<Sample>& poison,
                  const Matrix& gallery_pixels, const TrainConfig& cfg,
                  const EvalProbes* probes) {
  TrainLoopState state;
  state.params = init;
  state.adam = AdamState::zeros(init.dims());
  return train_from(std::move(state), clean, poison, gallery_pixels, cfg,
                    probes);
}

TrainResult train_from(TrainLoopState state, const std::vector<Sample>& clean,
                       const std::vector<Sample>& poison,
                       const Matrix& gallery_pixels, const TrainConfig& cfg,
                       const EvalProbes* probes, TrainLoopState* final_state,
                       int stop_after_epoch) {
  if (clean.empty()) throw ConfigError("train: empty clean training set");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (cfg.adam.lr <= 0) throw ConfigError("train: learning rate must be > 0");
  if (cfg.perturb) cfg.perturb->validate();

  Rng shuffle_rng(Rng::stream(cfg.seed, "train/shuffle").key(),
                  state.shuffle_counter);
  Rng poison_rng(Rng::stream(cfg.seed, "train/poison-batch").key(),
                 state.poison_counter);
  Rng pgd_rng(Rng::stream(cfg.seed, "train/pgd").key(), state.pgd_counter);

  const int steps_per_epoch =
      static_cast<int>((clean.size() + cfg.batch_size - 1) / cfg.batch_size);
  const size_t poison_batch =
      std::min<size_t>(cfg.batch_size, poison.size());
  const bool perturbing =
      cfg.perturb.has_value() && cfg.perturb->epsilon > 0 && !poison.empty();

  TrainResult result;
  result.history.rows.reserve(cfg.epochs - state.next_epoch);

  std::vector<size_t> order(clean.size());
  std::iota(order.begin(), order.end(), size_t{0});

  const int last_epoch =
      stop_after_epoch >= 0 ? std::min(stop_after_epoch, cfg.epochs)
                            : cfg.epochs;

  for (int epoch = state.next_epoch; epoch < last_epoch; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = 0; i + 1 < order.size(); ++i)
      std::swap(order[i], order[i + shuffle_rng.below(order.size() - i)]);

    // Per-epoch perturbation regeneration caches one x-tilde per poison index.
    std::vector<Vector> epoch_perturbed;
    if (perturbing && cfg.perturb->regen == RegenPolicy::kEpoch) {
      GalleryEmbeddings gallery = encode_gallery(state.params, gallery_pixels);
      epoch_perturbed.reserve(poison.size());
      for (const Sample& s : poison)
        epoch_perturbed.push_back(
            cfg.perturb->random_noise
                ? random_perturbation(s.reference, cfg.perturb->epsilon,
                                      pgd_rng)
                      .perturbed
                : pgd(state.params, s, gallery, *cfg.perturb, pgd_rng)
                      .perturbed);
    }

    double epoch_clean_loss = 0.0;
    double epoch_poison_loss = 0.0;

    for (int step = 0; step < steps_per_epoch; ++step) {
      const size_t begin = static_cast<size_t>(step) * cfg.batch_size;
      const size_t count = std::min<size_t>(cfg.batch_size,
                                            clean.size() - begin);
      std::vector<Sample> clean_batch;
      clean_batch.reserve(count);
      for (size_t i = 0; i < count; ++i)
        clean_batch.push_back(clean[order[begin + i]]);

      BatchLossResult clean_res =
          batch_loss(state.params, clean_batch, gallery_pixels);
      ModelGrads grads = std::move(clean_res.grads);
      epoch_clean_loss += clean_res.loss;

      if (!poison.empty()) {
        std::vector<Sample> poison_batch_samples;
        poison_batch_samples.reserve(poison_batch);
        std::vector<size_t> picks(poison_batch);
        for (size_t& p : picks) p = poison_rng.below(poison.size());

        GalleryEmbeddings gallery;
        if (perturbing && cfg.perturb->regen == RegenPolicy::kStep)
          gallery = encode_gallery(state.params, gallery_pixels);

        for (size_t p : picks) {
          Sample s = poison[p];
          if (perturbing) {
            if (cfg.perturb->regen == RegenPolicy::kStep)
              s.reference =
                  cfg.perturb->random_noise
                      ? random_perturbation(s.reference, cfg.perturb->epsilon,
                                            pgd_rng)
                            .perturbed
                      : pgd(state.params, s, gallery, *cfg.perturb, pgd_rng)
                            .perturbed;
            else
              s.reference = epoch_perturbed[p];
          }
          poison_batch_samples.push_back(std::move(s));
        }

        BatchLossResult poison_res =
            batch_loss(state.params, poison_batch_samples, gallery_pixels);
        grads.add(poison_res.grads);
        epoch_poison_loss += poison_res.loss;
      }

      if (cfg.grad_clip > 0) clip_grads(grads, cfg.grad_clip);
      adam_step(state.adam, state.params, grads, cfg.adam);
    }

    TrainHistory::Row row;
    row.epoch = epoch;
    row.clean_loss = epoch_clean_loss / steps_per_epoch;
    row.poison_loss = epoch_poison_loss / steps_per_epoch;
    if (probes) {
      GalleryEmbeddings gallery = encode_gallery(state.params, gallery_pixels);
      const auto limit = [&](const std::vector<Sample>& v) {
        size_t n = std::min<size_t>(v.size(), cfg.history_probe_limit);
        return std::vector<Sample>(v.begin(), v.begin() + n);
      };
      if (!probes->clean.empty()) {
        SplitMetrics m =
            split_metrics(state.params, limit(probes->clean), gallery, {1});
        row.clean_r1 = m.recall_at.at(1);
      }
      if (!probes->poisoned.empty()) {
        SplitMetrics m = split_metrics(state.params, limit(probes->poisoned),
                                       gallery, {1, 5});
        row.asr_r1 = m.recall_at.at(1);
        row.asr_r5 = m.recall_at.at(5);
      }
    }
    result.history.rows.push_back(row);
  }

  if (final_state) {
    final_state->params = state.params;
    final_state->adam = state.adam;
    final_state->next_epoch = last_epoch;
    final_state->shuffle_counter = shuffle_rng.counter();
    final_state->poison_counter = poison_rng.counter();
    final_state->pgd_counter = pgd_rng.counter();
  }
  result.params = std::move(state.params);
  result.adam = std::move(state.adam);
  return result;
}

}  // namespace tgb
