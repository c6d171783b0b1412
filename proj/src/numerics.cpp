#include "tgb/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tgb/errors.hpp"

namespace tgb {

Vector affine_forward(const Matrix& w, const Vector& b, const Vector& x,
                      AffineCache* cache) {
  if (w.cols() != x.size())
    throw ShapeError("affine_forward: W is " + std::to_string(w.rows()) + "x" +
                     std::to_string(w.cols()) + " but x has length " +
                     std::to_string(x.size()));
  if (w.rows() != b.size())
    throw ShapeError("affine_forward: W has " + std::to_string(w.rows()) +
                     " rows but b has length " + std::to_string(b.size()));
  if (cache) cache->input = x;
  return w * x + b;
}

Vector affine_backward(const Matrix& w, const AffineCache& cache,
                       const Vector& grad_y, Matrix& grad_w, Vector& grad_b) {
  grad_w.noalias() += grad_y * cache.input.transpose();
  grad_b += grad_y;
  return w.transpose() * grad_y;
}

Vector relu_forward(const Vector& x, ReluCache* cache) {
  if (cache) cache->input = x;
  return x.cwiseMax(0.0);
}

Vector relu_backward(const ReluCache& cache, const Vector& grad_y) {
  // Subgradient at 0 is 0.
  return (cache.input.array() > 0.0).select(grad_y, Vector::Zero(grad_y.size()));
}

Vector l2_normalize(const Vector& x, NormalizeCache* cache) {
  const double norm = x.norm();
  if (norm < kNormFloor)
    throw DegenerateEmbeddingError(
        "l2_normalize: input norm " + std::to_string(norm) +
        " is below the normalization floor");
  Vector u = x / norm;
  if (cache) {
    cache->unit = u;
    cache->norm = norm;
  }
  return u;
}

Vector l2_normalize_backward(const NormalizeCache& cache, const Vector& grad_u) {
  return (grad_u - cache.unit * cache.unit.dot(grad_u)) / cache.norm;
}

CrossEntropyResult softmax_cross_entropy(const Vector& logits,
                                         Eigen::Index target) {
  if (target < 0 || target >= logits.size())
    throw ShapeError("softmax_cross_entropy: target " + std::to_string(target) +
                     " out of range for " + std::to_string(logits.size()) +
                     " logits");
  const double max_logit = logits.maxCoeff();
  Vector shifted = logits.array() - max_logit;
  Vector exps = shifted.array().exp();
  const double sum = exps.sum();
  CrossEntropyResult out;
  out.loss = std::log(sum) - shifted(target);
  out.grad_logits = exps / sum;
  out.grad_logits(target) -= 1.0;
  return out;
}

GradCheckReport grad_check(const std::function<double(const Vector&)>& loss_fn,
                           const Vector& point, const Vector& analytic_grad,
                           int probe_count, double tol, Rng& rng) {
  constexpr double h = 1e-5;
  GradCheckReport report;
  Vector p = point;
  for (int probe = 0; probe < probe_count; ++probe) {
    const Eigen::Index i =
        static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p.size())));
    const double saved = p(i);
    p(i) = saved + h;
    const double f_plus = loss_fn(p);
    p(i) = saved - h;
    const double f_minus = loss_fn(p);
    p(i) = saved;
    const double numeric = (f_plus - f_minus) / (2.0 * h);
    const double analytic = analytic_grad(i);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
    const double rel = std::abs(analytic - numeric) / scale;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace tgb
