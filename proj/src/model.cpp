#include "tgb/model.hpp"

#include <cmath>
#include <string>

#include "tgb/errors.hpp"

namespace tgb {

namespace {

Matrix init_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(cols));
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-s, s);
  return m;
}

void append(Vector& out, Eigen::Index& off, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(off++) = m(r, c);
}

void append(Vector& out, Eigen::Index& off, const Vector& v) {
  out.segment(off, v.size()) = v;
  off += v.size();
}

void take(const Vector& in, Eigen::Index& off, Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in(off++);
}

void take(const Vector& in, Eigen::Index& off, Vector& v) {
  v = in.segment(off, v.size());
  off += v.size();
}

Eigen::Index param_count(const ModelDims& d) {
  return static_cast<Eigen::Index>(d.hidden) * d.image_dim + d.hidden +
         static_cast<Eigen::Index>(d.embed) * d.hidden + d.embed +
         static_cast<Eigen::Index>(d.vocab) * d.token_dim +
         static_cast<Eigen::Index>(d.embed) * d.token_dim + d.embed;
}

}  // namespace

ModelDims ModelParams::dims() const {
  ModelDims d;
  d.image_dim = static_cast<int>(w1.cols());
  d.hidden = static_cast<int>(w1.rows());
  d.embed = static_cast<int>(w2.rows());
  d.token_dim = static_cast<int>(token_embed.cols());
  d.vocab = static_cast<int>(token_embed.rows());
  return d;
}

ModelParams ModelParams::init(const ModelDims& dims, std::uint64_t seed,
                              double tau) {
  Rng rng = Rng::stream(seed, "model/init");
  ModelParams p;
  p.w1 = init_matrix(dims.hidden, dims.image_dim, rng);
  p.b1 = Vector::Zero(dims.hidden);
  p.w2 = init_matrix(dims.embed, dims.hidden, rng);
  p.b2 = Vector::Zero(dims.embed);
  p.token_embed = init_matrix(dims.vocab, dims.token_dim, rng);
  p.wt = init_matrix(dims.embed, dims.token_dim, rng);
  p.bt = Vector::Zero(dims.embed);
  p.tau = tau;
  return p;
}

Vector ModelParams::flatten() const {
  Vector out(param_count(dims()));
  Eigen::Index off = 0;
  append(out, off, w1);
  append(out, off, b1);
  append(out, off, w2);
  append(out, off, b2);
  append(out, off, token_embed);
  append(out, off, wt);
  append(out, off, bt);
  return out;
}

ModelParams ModelParams::unflatten(const Vector& flat, const ModelDims& dims,
                                   double tau) {
  if (flat.size() != param_count(dims))
    throw ShapeError("ModelParams::unflatten: flat vector has length " +
                     std::to_string(flat.size()) + ", dims require " +
                     std::to_string(param_count(dims)));
  ModelParams p;
  p.w1.resize(dims.hidden, dims.image_dim);
  p.b1.resize(dims.hidden);
  p.w2.resize(dims.embed, dims.hidden);
  p.b2.resize(dims.embed);
  p.token_embed.resize(dims.vocab, dims.token_dim);
  p.wt.resize(dims.embed, dims.token_dim);
  p.bt.resize(dims.embed);
  Eigen::Index off = 0;
  take(flat, off, p.w1);
  take(flat, off, p.b1);
  take(flat, off, p.w2);
  take(flat, off, p.b2);
  take(flat, off, p.token_embed);
  take(flat, off, p.wt);
  take(flat, off, p.bt);
  p.tau = tau;
  return p;
}

bool ModelParams::same_shape(const ModelParams& other) const {
  return w1.rows() == other.w1.rows() && w1.cols() == other.w1.cols() &&
         w2.rows() == other.w2.rows() && w2.cols() == other.w2.cols() &&
         token_embed.rows() == other.token_embed.rows() &&
         token_embed.cols() == other.token_embed.cols() &&
         wt.rows() == other.wt.rows() && wt.cols() == other.wt.cols();
}

ModelGrads ModelGrads::zeros(const ModelDims& d) {
  ModelGrads g;
  g.w1 = Matrix::Zero(d.hidden, d.image_dim);
  g.b1 = Vector::Zero(d.hidden);
  g.w2 = Matrix::Zero(d.embed, d.hidden);
  g.b2 = Vector::Zero(d.embed);
  g.token_embed = Matrix::Zero(d.vocab, d.token_dim);
  g.wt = Matrix::Zero(d.embed, d.token_dim);
  g.bt = Vector::Zero(d.embed);
  return g;
}

Vector ModelGrads::flatten() const {
  ModelParams p;
  p.w1 = w1;
  p.b1 = b1;
  p.w2 = w2;
  p.b2 = b2;
  p.token_embed = token_embed;
  p.wt = wt;
  p.bt = bt;
  return p.flatten();
}

void ModelGrads::scale(double factor) {
  w1 *= factor;
  b1 *= factor;
  w2 *= factor;
  b2 *= factor;
  token_embed *= factor;
  wt *= factor;
  bt *= factor;
}

void ModelGrads::add(const ModelGrads& other) {
  w1 += other.w1;
  b1 += other.b1;
  w2 += other.w2;
  b2 += other.b2;
  token_embed += other.token_embed;
  wt += other.wt;
  bt += other.bt;
}

Vector encode_image(const ModelParams& params, const Vector& x,
                    ImageCache* cache) {
  ImageCache local;
  ImageCache& c = cache ? *cache : local;
  Vector y1 = affine_forward(params.w1, params.b1, x, &c.affine1);
  Vector a1 = relu_forward(y1, &c.relu1);
  Vector y2 = affine_forward(params.w2, params.b2, a1, &c.affine2);
  return l2_normalize(y2, &c.norm);
}

Vector encode_image_backward(const ModelParams& params, const ImageCache& cache,
                             const Vector& grad_embed, ModelGrads& grads) {
  Vector gy2 = l2_normalize_backward(cache.norm, grad_embed);
  Vector ga1 = affine_backward(params.w2, cache.affine2, gy2, grads.w2, grads.b2);
  Vector gy1 = relu_backward(cache.relu1, ga1);
  return affine_backward(params.w1, cache.affine1, gy1, grads.w1, grads.b1);
}

Vector encode_query(const ModelParams& params, const Vector& x_ref,
                    const std::vector<int>& tokens, QueryCache* cache) {
  if (tokens.empty())
    throw ShapeError("encode_query: empty token sequence");
  for (int t : tokens)
    if (t < 0 || t >= params.token_embed.rows())
      throw ShapeError("encode_query: token id " + std::to_string(t) +
                       " out of range for vocab of " +
                       std::to_string(params.token_embed.rows()));
  QueryCache local;
  QueryCache& c = cache ? *cache : local;
  c.tokens = tokens;

  Vector u_img = encode_image(params, x_ref, &c.image);

  Vector pooled = Vector::Zero(params.token_embed.cols());
  for (int t : tokens) pooled += params.token_embed.row(t).transpose();
  pooled /= static_cast<double>(tokens.size());
  Vector projected = affine_forward(params.wt, params.bt, pooled, &c.text_affine);
  Vector u_txt = l2_normalize(projected, &c.text_norm);

  return l2_normalize(u_img + u_txt, &c.fuse_norm);
}

Vector encode_query_backward(const ModelParams& params, const QueryCache& cache,
                             const Vector& grad_query, ModelGrads& grads) {
  Vector g_sum = l2_normalize_backward(cache.fuse_norm, grad_query);

  // Text branch.
  Vector g_proj = l2_normalize_backward(cache.text_norm, g_sum);
  Vector g_pooled =
      affine_backward(params.wt, cache.text_affine, g_proj, grads.wt, grads.bt);
  const double inv_len = 1.0 / static_cast<double>(cache.tokens.size());
  for (int t : cache.tokens)
    grads.token_embed.row(t) += inv_len * g_pooled.transpose();

  // Image branch.
  return encode_image_backward(params, cache.image, g_sum, grads);
}

GalleryEmbeddings encode_gallery(const ModelParams& params,
                                 const Matrix& gallery_pixels) {
  GalleryEmbeddings out;
  const Eigen::Index g = gallery_pixels.rows();
  out.rows.resize(g, params.w2.rows());
  out.caches.resize(g);
  for (Eigen::Index i = 0; i < g; ++i)
    out.rows.row(i) =
        encode_image(params, gallery_pixels.row(i).transpose(), &out.caches[i])
            .transpose();
  return out;
}

Vector score_gallery(const Vector& query, const GalleryEmbeddings& gallery,
                     double tau) {
  if (tau <= 0) throw NumericError("score_gallery: tau must be positive");
  if (gallery.rows.cols() != query.size())
    throw ShapeError("score_gallery: query has length " +
                     std::to_string(query.size()) + " but gallery embeds are " +
                     std::to_string(gallery.rows.cols()) + "-dimensional");
  return gallery.rows * query / tau;
}

BatchLossResult batch_loss(const ModelParams& params,
                           std::span<const Sample> batch,
                           const Matrix& gallery_pixels) {
  if (batch.empty()) throw ShapeError("batch_loss: empty batch");
  const Eigen::Index g = gallery_pixels.rows();
  for (const Sample& s : batch)
    if (s.target < 0 || s.target >= g)
      throw ShapeError("batch_loss: target " + std::to_string(s.target) +
                       " out of range for gallery of " + std::to_string(g));

  GalleryEmbeddings gallery = encode_gallery(params, gallery_pixels);

  BatchLossResult out;
  out.grads = ModelGrads::zeros(params.dims());
  out.grad_inputs.reserve(batch.size());
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  // Gallery gradients accumulate across the batch; one backward per image.
  Matrix grad_gallery = Matrix::Zero(g, gallery.rows.cols());

  for (const Sample& s : batch) {
    QueryCache qcache;
    Vector query = encode_query(params, s.reference, s.tokens, &qcache);
    Vector logits = score_gallery(query, gallery, params.tau);
    CrossEntropyResult ce = softmax_cross_entropy(logits, s.target);
    out.loss += inv_b * ce.loss;

    Vector g_logits = inv_b * ce.grad_logits;
    Vector g_query = gallery.rows.transpose() * g_logits / params.tau;
    grad_gallery.noalias() += g_logits * query.transpose() / params.tau;

    out.grad_inputs.push_back(
        encode_query_backward(params, qcache, g_query, out.grads));
  }

  for (Eigen::Index i = 0; i < g; ++i)
    encode_image_backward(params, gallery.caches[i],
                          grad_gallery.row(i).transpose(), out.grads);
  return out;
}

SampleLoss sample_loss_grad_x(const ModelParams& params, const Vector& x,
                              const std::vector<int>& tokens, int target,
                              const GalleryEmbeddings& gallery) {
  QueryCache qcache;
  Vector query = encode_query(params, x, tokens, &qcache);
  Vector logits = score_gallery(query, gallery, params.tau);
  CrossEntropyResult ce = softmax_cross_entropy(logits, target);

  Vector g_query = gallery.rows.transpose() * ce.grad_logits / params.tau;
  ModelGrads scratch = ModelGrads::zeros(params.dims());
  SampleLoss out;
  out.loss = ce.loss;
  out.grad_x = encode_query_backward(params, qcache, g_query, scratch);
  return out;
}

}  // namespace tgb
