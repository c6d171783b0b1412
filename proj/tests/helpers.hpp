#pragma once

#include "tgb/config.hpp"
#include "tgb/corpus.hpp"
#include "tgb/experiment.hpp"
#include "tgb/model.hpp"

namespace tgb::test {

// Small world: 4x4 gallery, 8-dim images, quick to train in tests.
inline CorpusConfig small_corpus() {
  CorpusConfig c;
  c.n_colors = 4;
  c.n_shapes = 4;
  c.color_block = 4;
  c.shape_block = 4;
  c.n_fillers = 6;
  c.n_train = 300;
  c.n_validation = 120;
  c.noise_sigma = 0.05;
  c.trigger_frequency = 0.12;
  return c;
}

inline ModelDims small_dims(const CorpusConfig& c) {
  ModelDims d;
  d.image_dim = c.image_dim();
  d.hidden = 16;
  d.embed = 8;
  d.token_dim = 8;
  d.vocab = 2 + c.n_colors + c.n_shapes + c.n_fillers;
  return d;
}

inline ExperimentConfig small_experiment() {
  ExperimentConfig cfg;
  cfg.seed = 5;
  cfg.corpus = small_corpus();
  cfg.model.hidden = 16;
  cfg.model.embed = 8;
  cfg.model.token_dim = 8;
  cfg.poison.trigger_token = "flower";
  cfg.poison.target_id = 9;
  cfg.train.epochs = 40;
  cfg.train.batch_size = 32;
  return cfg;
}

}  // namespace tgb::test
