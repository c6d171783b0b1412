#pragma once

#include <span>
#include <vector>

#include "tgb/corpus.hpp"
#include "tgb/numerics.hpp"
#include "tgb/rng.hpp"

namespace tgb {

struct ModelDims {
  int image_dim = 16;
  int hidden = 32;
  int embed = 16;
  int token_dim = 16;
  int vocab = 24;
};

// All learnable weights of the dual encoder, plus the fixed temperature.
struct ModelParams {
  Matrix w1;           // hidden x image_dim
  Vector b1;           // hidden
  Matrix w2;           // embed x hidden
  Vector b2;           // embed
  Matrix token_embed;  // vocab x token_dim
  Matrix wt;           // embed x token_dim
  Vector bt;           // embed
  double tau = 0.07;

  ModelDims dims() const;
  static ModelParams init(const ModelDims& dims, std::uint64_t seed,
                          double tau = 0.07);

  // Flat views used by the optimizer, gradient checker, and checkpoints.
  // Order: w1, b1, w2, b2, token_embed, wt, bt.
  Vector flatten() const;
  static ModelParams unflatten(const Vector& flat, const ModelDims& dims,
                               double tau);
  bool same_shape(const ModelParams& other) const;
};

// Gradient accumulator with the same tensor shapes as ModelParams.
struct ModelGrads {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
  Matrix token_embed;
  Matrix wt;
  Vector bt;

  static ModelGrads zeros(const ModelDims& dims);
  Vector flatten() const;
  void scale(double factor);
  void add(const ModelGrads& other);
};

struct ImageCache {
  AffineCache affine1;
  ReluCache relu1;
  AffineCache affine2;
  NormalizeCache norm;
};

struct QueryCache {
  ImageCache image;
  std::vector<int> tokens;
  AffineCache text_affine;
  NormalizeCache text_norm;
  NormalizeCache fuse_norm;
};

// Unit embedding of an image vector (2-layer MLP, ReLU, L2-normalize).
Vector encode_image(const ModelParams& params, const Vector& x,
                    ImageCache* cache = nullptr);

// Backward through encode_image. Returns grad wrt x.
Vector encode_image_backward(const ModelParams& params, const ImageCache& cache,
                             const Vector& grad_embed, ModelGrads& grads);

// Fused query embedding: unit image embedding + unit text embedding
// (mean-pooled token embeddings, projected), re-normalized.
Vector encode_query(const ModelParams& params, const Vector& x_ref,
                    const std::vector<int>& tokens, QueryCache* cache = nullptr);

// Backward through encode_query. Returns grad wrt x_ref.
Vector encode_query_backward(const ModelParams& params, const QueryCache& cache,
                             const Vector& grad_query, ModelGrads& grads);

// Unit embeddings of the fixed gallery, with caches for the backward pass.
struct GalleryEmbeddings {
  Matrix rows;  // G x embed, unit rows
  std::vector<ImageCache> caches;
};

GalleryEmbeddings encode_gallery(const ModelParams& params,
                                 const Matrix& gallery_pixels);

// logits_i = cos(query, gallery_i) / tau.
Vector score_gallery(const Vector& query, const GalleryEmbeddings& gallery,
                     double tau);

struct BatchLossResult {
  double loss = 0.0;           // mean per-sample cross-entropy
  ModelGrads grads;            // exact analytic, includes the gallery path
  std::vector<Vector> grad_inputs;  // dL/dx_ref per sample
};

// Mean retrieval cross-entropy of score_gallery against each sample's target.
BatchLossResult batch_loss(const ModelParams& params,
                           std::span<const Sample> batch,
                           const Matrix& gallery_pixels);

struct SampleLoss {
  double loss = 0.0;
  Vector grad_x;
};

// Per-sample loss and input gradient against a frozen gallery (PGD inner loop).
SampleLoss sample_loss_grad_x(const ModelParams& params, const Vector& x,
                              const std::vector<int>& tokens, int target,
                              const GalleryEmbeddings& gallery);

}  // namespace tgb
