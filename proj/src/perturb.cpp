#include "tgb/perturb.hpp"

#include <cassert>
#include <cmath>

#include "tgb/errors.hpp"

namespace tgb {

void PerturbConfig::validate() const {
  if (lambda != 1 && lambda != -1)
    throw ConfigError("perturb: lambda must be +1 or -1");
  if (epsilon < 0) throw ConfigError("perturb: epsilon must be >= 0");
  if (epsilon > 0 && step_size() > epsilon)
    throw ConfigError("perturb: step size exceeds the budget epsilon");
  if (steps < 1) throw ConfigError("perturb: steps must be >= 1");
}

Vector project_linf(Vector delta, double epsilon) {
  if (epsilon < 0) throw ConfigError("project_linf: epsilon must be >= 0");
  return delta.cwiseMax(-epsilon).cwiseMin(epsilon);
}

namespace {

Vector clip01(const Vector& v) { return v.cwiseMax(0.0).cwiseMin(1.0); }

}  // namespace

Perturbation pgd(const ModelParams& params, const Sample& sample,
                 const GalleryEmbeddings& gallery, const PerturbConfig& cfg,
                 Rng& rng) {
  cfg.validate();
  const Eigen::Index d = sample.reference.size();
  Perturbation out;
  if (cfg.epsilon == 0.0) {
    out.delta = Vector::Zero(d);
    out.perturbed = sample.reference;
    return out;
  }

  Vector delta(d);
  for (Eigen::Index i = 0; i < d; ++i)
    delta(i) = rng.uniform(-cfg.epsilon, cfg.epsilon);

  const double step = cfg.lambda * cfg.step_size();
  for (int k = 0; k < cfg.steps; ++k) {
    Vector x_adv = clip01(sample.reference + delta);
    SampleLoss sl =
        sample_loss_grad_x(params, x_adv, sample.tokens, sample.target, gallery);
    delta = project_linf(delta + step * sl.grad_x.array().sign().matrix(),
                         cfg.epsilon);
    assert(delta.cwiseAbs().maxCoeff() <= cfg.epsilon + 1e-15);
  }

  out.delta = std::move(delta);
  out.perturbed = clip01(sample.reference + out.delta);
  return out;
}

Perturbation random_perturbation(const Vector& x, double epsilon, Rng& rng) {
  Perturbation out;
  out.delta.resize(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    out.delta(i) = rng.uniform(-epsilon, epsilon);
  out.perturbed = clip01(x + out.delta);
  return out;
}

}  // namespace tgb
