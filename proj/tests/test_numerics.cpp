#include <doctest.h>

#include <cmath>

#include "tgb/errors.hpp"
#include "tgb/numerics.hpp"

using namespace tgb;

TEST_CASE("affine_forward identity and zero weights") {
  Vector x(2);
  x << 1, -2;
  CHECK((affine_forward(Matrix::Identity(2, 2), Vector::Zero(2), x) - x)
            .norm() == 0.0);

  Vector b(2);
  b << 3, 4;
  Vector y = affine_forward(Matrix::Zero(2, 2), b, x);
  CHECK(y(0) == 3.0);
  CHECK(y(1) == 4.0);
}

TEST_CASE("affine_forward hand arithmetic") {
  Matrix w(2, 2);
  w << 1, 2, 3, 4;
  Vector x(2);
  x << 1, 1;
  Vector y = affine_forward(w, Vector::Zero(2), x);
  CHECK(y(0) == 3.0);
  CHECK(y(1) == 7.0);
}

TEST_CASE("affine_forward rejects shape mismatches by name") {
  Matrix w(2, 3);
  w.setZero();
  Vector x(2), b(2);
  x.setZero();
  b.setZero();
  CHECK_THROWS_AS(affine_forward(w, b, x), ShapeError);
  Vector x3 = Vector::Zero(3), b1 = Vector::Zero(1);
  CHECK_THROWS_AS(affine_forward(w, b1, x3), ShapeError);
}

TEST_CASE("relu basics and idempotence") {
  Vector x(3);
  x << 1, -1, 0;
  Vector y = relu_forward(x);
  CHECK(y(0) == 1.0);
  CHECK(y(1) == 0.0);
  CHECK(y(2) == 0.0);

  Vector neg = -Vector::Ones(5);
  CHECK(relu_forward(neg).norm() == 0.0);

  Vector pos = Vector::Ones(5) * 2.5;
  CHECK((relu_forward(pos) - pos).norm() == 0.0);

  CHECK((relu_forward(relu_forward(x)) - relu_forward(x)).norm() == 0.0);
}

TEST_CASE("l2_normalize on the 3-4-5 triangle") {
  Vector x(2);
  x << 3, 4;
  Vector u = l2_normalize(x);
  CHECK(u(0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(u(1) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(std::abs(u.norm() - 1.0) < 1e-12);
}

TEST_CASE("l2_normalize is idempotent within 1e-12") {
  Rng rng = Rng::stream(5, "test");
  Vector x(8);
  for (int i = 0; i < 8; ++i) x(i) = rng.uniform(-2, 2);
  Vector u = l2_normalize(x);
  CHECK((l2_normalize(u) - u).norm() < 1e-12);
}

TEST_CASE("l2_normalize rejects near-zero input") {
  CHECK_THROWS_AS(l2_normalize(Vector::Zero(4)), DegenerateEmbeddingError);
  Vector tiny = Vector::Constant(4, 1e-10);
  CHECK_THROWS_AS(l2_normalize(tiny), DegenerateEmbeddingError);
}

TEST_CASE("softmax_cross_entropy closed forms") {
  Vector uniform = Vector::Zero(8);
  CHECK(softmax_cross_entropy(uniform, 3).loss ==
        doctest::Approx(std::log(8.0)).epsilon(1e-12));

  Vector saturated = Vector::Zero(4);
  saturated(2) = 30.0;
  CHECK(softmax_cross_entropy(saturated, 2).loss < 1e-9);

  Vector two(2);
  two << 1, 0;
  CHECK(softmax_cross_entropy(two, 0).loss ==
        doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("softmax_cross_entropy is shift invariant") {
  Rng rng = Rng::stream(6, "test");
  Vector logits(10);
  for (int i = 0; i < 10; ++i) logits(i) = rng.uniform(-3, 3);
  auto base = softmax_cross_entropy(logits, 4);
  auto shifted = softmax_cross_entropy(logits.array() + 123.0, 4);
  CHECK(std::abs(base.loss - shifted.loss) < 1e-10);
  CHECK((base.grad_logits - shifted.grad_logits).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("softmax_cross_entropy gradient matches finite differences") {
  Rng rng = Rng::stream(7, "test");
  Vector logits(6);
  for (int i = 0; i < 6; ++i) logits(i) = rng.uniform(-2, 2);
  auto res = softmax_cross_entropy(logits, 1);
  auto report = grad_check(
      [](const Vector& v) { return softmax_cross_entropy(v, 1).loss; }, logits,
      res.grad_logits, 30, 1e-7, rng);
  CHECK(report.passed);
}

TEST_CASE("softmax_cross_entropy rejects out-of-range targets") {
  CHECK_THROWS_AS(softmax_cross_entropy(Vector::Zero(3), 3), ShapeError);
  CHECK_THROWS_AS(softmax_cross_entropy(Vector::Zero(3), -1), ShapeError);
}

TEST_CASE("grad_check is near-exact on a quadratic") {
  Rng rng = Rng::stream(8, "test");
  Vector x(12);
  for (int i = 0; i < 12; ++i) x(i) = rng.uniform(-1, 1);
  auto report = grad_check(
      [](const Vector& v) { return 0.5 * v.squaredNorm(); }, x, x, 24, 1e-9,
      rng);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-9);
}

TEST_CASE("grad_check accepts a constant loss with zero gradient") {
  Rng rng = Rng::stream(9, "test");
  Vector x = Vector::Ones(5);
  auto report = grad_check([](const Vector&) { return 3.5; }, x,
                           Vector::Zero(5), 10, 1e-9, rng);
  CHECK(report.passed);
  CHECK(report.max_rel_error == 0.0);
}

TEST_CASE("grad_check reports the offending coordinate on failure") {
  Rng rng = Rng::stream(10, "test");
  Vector x = Vector::Ones(4);
  Vector wrong = x;
  wrong(2) += 1.0;  // corrupt one coordinate of the analytic gradient
  auto report = grad_check(
      [](const Vector& v) { return 0.5 * v.squaredNorm(); }, x, wrong, 40,
      1e-6, rng);
  CHECK_FALSE(report.passed);
  CHECK(report.worst_index == 2);
}

TEST_CASE("layer backward passes match finite differences") {
  Rng rng = Rng::stream(11, "test");

  SUBCASE("affine wrt x") {
    Matrix w(3, 4);
    Vector b(3), x(4);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) w(r, c) = rng.uniform(-1, 1);
    for (int i = 0; i < 3; ++i) b(i) = rng.uniform(-1, 1);
    for (int i = 0; i < 4; ++i) x(i) = rng.uniform(-1, 1);
    Vector gy(3);
    for (int i = 0; i < 3; ++i) gy(i) = rng.uniform(-1, 1);

    AffineCache cache;
    affine_forward(w, b, x, &cache);
    Matrix gw = Matrix::Zero(3, 4);
    Vector gb = Vector::Zero(3);
    Vector gx = affine_backward(w, cache, gy, gw, gb);

    auto loss = [&](const Vector& v) {
      return gy.dot(affine_forward(w, b, v));
    };
    CHECK(grad_check(loss, x, gx, 16, 1e-6, rng).passed);
  }

  SUBCASE("l2_normalize wrt x") {
    Vector x(6), gy(6);
    for (int i = 0; i < 6; ++i) x(i) = rng.uniform(0.5, 2);
    for (int i = 0; i < 6; ++i) gy(i) = rng.uniform(-1, 1);
    NormalizeCache cache;
    l2_normalize(x, &cache);
    Vector gx = l2_normalize_backward(cache, gy);
    auto loss = [&](const Vector& v) { return gy.dot(l2_normalize(v)); };
    CHECK(grad_check(loss, x, gx, 24, 1e-6, rng).passed);
  }
}
