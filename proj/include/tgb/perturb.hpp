#pragma once

#include "tgb/model.hpp"
#include "tgb/numerics.hpp"
#include "tgb/rng.hpp"

namespace tgb {

enum class RegenPolicy { kStep, kEpoch };

struct PerturbConfig {
  int lambda = 1;        // +1 maximizes the poisoned loss, -1 minimizes it
  double epsilon = 0.0;  // l-inf budget in image-domain units
  double alpha = -1.0;   // step size; < 0 means the epsilon/4 default
  int steps = 10;
  RegenPolicy regen = RegenPolicy::kStep;
  bool random_noise = false;  // ablation: uniform noise instead of PGD

  double step_size() const { return alpha < 0 ? epsilon / 4.0 : alpha; }
  void validate() const;
};

struct Perturbation {
  Vector delta;      // ||delta||_inf <= epsilon
  Vector perturbed;  // clip(x + delta, [0,1])
};

// Coordinate-wise clamp to [-epsilon, epsilon]; idempotent.
Vector project_linf(Vector delta, double epsilon);

// PGD on the per-sample poisoned loss against a frozen gallery:
//   delta^0 ~ Uniform(-eps, eps),  delta <- proj(delta + lambda a sign(grad)).
Perturbation pgd(const ModelParams& params, const Sample& sample,
                 const GalleryEmbeddings& gallery, const PerturbConfig& cfg,
                 Rng& rng);

// Uniform(-eps, eps) noise with the same clipping, for the random-noise
// ablation; shares the budget semantics of pgd.
Perturbation random_perturbation(const Vector& x, double epsilon, Rng& rng);

}  // namespace tgb
