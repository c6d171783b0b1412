#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "tgb/rng.hpp"

namespace tgb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Inputs with L2 norm below this are rejected by l2_normalize.
inline constexpr double kNormFloor = 1e-8;

struct AffineCache {
  Vector input;
};

struct ReluCache {
  Vector input;
};

struct NormalizeCache {
  Vector unit;
  double norm = 0.0;
};

// y = W x + b. Throws ShapeError on dimension mismatch.
Vector affine_forward(const Matrix& w, const Vector& b, const Vector& x,
                      AffineCache* cache = nullptr);

// Accumulates grad_w / grad_b, returns grad_x.
Vector affine_backward(const Matrix& w, const AffineCache& cache,
                       const Vector& grad_y, Matrix& grad_w, Vector& grad_b);

Vector relu_forward(const Vector& x, ReluCache* cache = nullptr);
Vector relu_backward(const ReluCache& cache, const Vector& grad_y);

// u = x / ||x||. Throws DegenerateEmbeddingError below kNormFloor.
Vector l2_normalize(const Vector& x, NormalizeCache* cache = nullptr);
Vector l2_normalize_backward(const NormalizeCache& cache, const Vector& grad_u);

struct CrossEntropyResult {
  double loss = 0.0;
  Vector grad_logits;
};

// loss = -log softmax(logits)[target], max-shifted for stability.
CrossEntropyResult softmax_cross_entropy(const Vector& logits,
                                         Eigen::Index target);

struct GradCheckReport {
  double max_rel_error = 0.0;
  Eigen::Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = true;
};

// Compares the analytic gradient against central finite differences
// (h = 1e-5) at probe_count randomly chosen coordinates of `point`.
GradCheckReport grad_check(const std::function<double(const Vector&)>& loss_fn,
                           const Vector& point, const Vector& analytic_grad,
                           int probe_count, double tol, Rng& rng);

}  // namespace tgb
