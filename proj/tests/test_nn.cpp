/**
 * Copyright 2026 The Mugaze Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>

#include "mugaze/nn.hpp"
#include "mugaze/rng.hpp"

using namespace mugaze;
using namespace mugaze::nn;

namespace {

void randomize(Tensor& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (double& v : t.data) v = rng.uniform(lo, hi);
}

// Central-difference gradient of a scalar function of one tensor coordinate.
double numeric_grad(const std::function<double()>& f, double& coord,
                    double h = 1e-5) {
  const double saved = coord;
  coord = saved + h;
  const double up = f();
  coord = saved - h;
  const double down = f();
  coord = saved;
  return (up - down) / (2.0 * h);
}

double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale < 1e-10) return 0.0;
  return std::abs(a - b) / scale;
}

}  // namespace

TEST(Conv2d, IdentityKernel) {
  LayerParams p = make_conv2d(1, 1, 1, 1);
  p.weights.at(0) = 1.0;
  Tensor in({1, 5, 7});
  Rng rng(3);
  randomize(in, rng);
  const Tensor out = conv2d_forward(p, in, 1);
  ASSERT_EQ(out.shape, in.shape);
  for (std::size_t i = 0; i < in.data.size(); ++i) {
    EXPECT_DOUBLE_EQ(out.data[i], in.data[i]);
  }
}

TEST(Conv2d, ZeroInputGivesBias) {
  LayerParams p = make_conv2d(3, 2, 3, 3);
  Rng rng(5);
  randomize(p.weights, rng);
  p.bias.data = {0.5, -1.25, 2.0};
  const Tensor in({2, 4, 4});
  const Tensor out = conv2d_forward(p, in, 1);
  ASSERT_EQ(out.shape, (std::vector<std::size_t>{3, 4, 4}));
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t i = 0; i < 16; ++i) {
      EXPECT_DOUBLE_EQ(out.data[o * 16 + i], p.bias.at(o));
    }
  }
}

TEST(Conv2d, StridedOutputGeometry) {
  LayerParams p = make_conv2d(2, 1, 3, 3);
  const Tensor in({1, 5, 5});
  const Tensor out = conv2d_forward(p, in, 2);
  EXPECT_EQ(out.shape, (std::vector<std::size_t>{2, 3, 3}));
  const Tensor in64({1, 64, 64});
  EXPECT_EQ(conv2d_forward(p, in64, 2).shape,
            (std::vector<std::size_t>{2, 32, 32}));
}

TEST(Conv2d, ShapeMismatchRejected) {
  LayerParams p = make_conv2d(2, 3, 3, 3);
  EXPECT_THROW(conv2d_forward(p, Tensor({2, 5, 5}), 1), ShapeMismatch);
  EXPECT_THROW(conv2d_forward(p, Tensor({3, 5}), 1), ShapeMismatch);
}

TEST(Conv2d, BackwardMatchesFiniteDifferences) {
  // random 1x5x5 input, 2x1x3x3 kernel, stride 2
  Rng rng(11);
  LayerParams p = make_conv2d(2, 1, 3, 3);
  randomize(p.weights, rng);
  randomize(p.bias, rng);
  Tensor in({1, 5, 5});
  randomize(in, rng);

  // Scalar objective: weighted sum of outputs makes upstream grads generic.
  Tensor mix({2, 3, 3});
  randomize(mix, rng);
  const auto loss = [&]() {
    const Tensor out = conv2d_forward(p, in, 2);
    return std::inner_product(out.data.begin(), out.data.end(),
                              mix.data.begin(), 0.0);
  };
  const Conv2dGrads grads = conv2d_backward(p, in, 2, mix);

  for (std::size_t i = 0; i < p.weights.data.size(); ++i) {
    const double num = numeric_grad(loss, p.weights.data[i]);
    EXPECT_LT(rel_err(grads.weights.data[i], num), 1e-5) << "weight " << i;
  }
  for (std::size_t i = 0; i < p.bias.data.size(); ++i) {
    const double num = numeric_grad(loss, p.bias.data[i]);
    EXPECT_LT(rel_err(grads.bias.data[i], num), 1e-5) << "bias " << i;
  }
  for (std::size_t i = 0; i < in.data.size(); ++i) {
    const double num = numeric_grad(loss, in.data[i]);
    EXPECT_LT(rel_err(grads.input.data[i], num), 1e-5) << "input " << i;
  }
}

TEST(Dense, IdentityAndBias) {
  LayerParams p = make_dense(3, 3);
  for (int i = 0; i < 3; ++i) p.weights.at(i, i) = 1.0;
  const std::vector<double> x{1.5, -2.0, 0.25};
  EXPECT_EQ(dense_forward(p, x), x);

  LayerParams q = make_dense(2, 3);
  q.bias.data = {5.0, -3.0};
  const std::vector<double> zero(3, 0.0);
  EXPECT_EQ(dense_forward(q, zero), (std::vector<double>{5.0, -3.0}));
}

TEST(Dense, BackwardMatchesFiniteDifferences) {
  Rng rng(13);
  LayerParams p = make_dense(3, 4);
  randomize(p.weights, rng);
  randomize(p.bias, rng);
  std::vector<double> x{0.3, -1.1, 0.7, 2.2};
  const std::vector<double> mix{0.9, -0.4, 1.3};

  const auto loss = [&]() {
    const std::vector<double> y = dense_forward(p, x);
    return std::inner_product(y.begin(), y.end(), mix.begin(), 0.0);
  };
  const DenseGrads grads = dense_backward(p, x, mix);
  for (std::size_t i = 0; i < p.weights.data.size(); ++i) {
    EXPECT_LT(rel_err(grads.weights.data[i],
                      numeric_grad(loss, p.weights.data[i])),
              1e-6);
  }
  for (std::size_t i = 0; i < p.bias.data.size(); ++i) {
    EXPECT_LT(rel_err(grads.bias.data[i], numeric_grad(loss, p.bias.data[i])),
              1e-6);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_LT(rel_err(grads.input[i], numeric_grad(loss, x[i])), 1e-6);
  }
}

TEST(Dense, RejectsBadInputLength) {
  LayerParams p = make_dense(2, 3);
  EXPECT_THROW(dense_forward(p, {1.0, 2.0}), ShapeMismatch);
}

TEST(Activations, ReluAndSigmoidValues) {
  EXPECT_DOUBLE_EQ(relu(-2.0), 0.0);
  EXPECT_DOUBLE_EQ(relu(3.0), 3.0);
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid_grad(0.0), 0.25, 1e-15);

  // sigmoid'(0) against central differences
  double x = 0.0;
  const auto f = [&]() { return sigmoid(x); };
  EXPECT_LT(rel_err(sigmoid_grad(0.0), numeric_grad(f, x)), 1e-9);
}

TEST(Activations, ReluSubgradientZeroAtZero) {
  const Tensor pre({3});
  Tensor g({3});
  g.data = {1.0, 2.0, 3.0};
  const Tensor out = relu_backward(pre, g);
  for (double v : out.data) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(UnitNormalize, ValuesAndIdempotence) {
  const Vec3 v = unit_normalize({3.0, 4.0, 0.0});
  EXPECT_NEAR(v[0], 0.6, 1e-15);
  EXPECT_NEAR(v[1], 0.8, 1e-15);
  EXPECT_NEAR(v[2], 0.0, 1e-15);

  Rng rng(17);
  for (int i = 0; i < 100; ++i) {
    Vec3 x{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
           rng.uniform(-2.0, 2.0)};
    if (norm(x) < 0.05) continue;
    const Vec3 u = unit_normalize(x);
    EXPECT_NEAR(norm(u), 1.0, 1e-12);
    const Vec3 uu = unit_normalize(u);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(uu[k], u[k], 1e-14);
  }
}

TEST(UnitNormalize, JacobianMatchesFiniteDifferences) {
  Rng rng(19);
  Vec3 x{0.2, -0.3, 0.31};  // norm ~ 0.5
  const Vec3 mix{0.7, -1.2, 0.4};
  const auto loss = [&]() { return dot(unit_normalize(x), mix); };
  const Vec3 analytic = unit_normalize_backward(x, mix);
  for (int k = 0; k < 3; ++k) {
    EXPECT_LT(rel_err(analytic[k], numeric_grad(loss, x[k])), 1e-5);
  }
}

TEST(UnitNormalize, NearZeroThrows) {
  EXPECT_THROW(unit_normalize({1e-9, 0.0, 0.0}), NearZeroNorm);
}

TEST(BceLoss, ValuesAndGradient) {
  EXPECT_NEAR(bce_loss(0.5, 1), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(1.0 - kBceEps, 1), -std::log(1.0 - kBceEps), 1e-15);
  EXPECT_LT(bce_loss(1.0 - kBceEps, 1), 1e-6);
  EXPECT_NEAR(bce_grad(0.8, 1), -1.25, 1e-12);

  double p = 0.8;
  const auto f = [&]() { return bce_loss(p, 1); };
  EXPECT_LT(rel_err(bce_grad(0.8, 1), numeric_grad(f, p)), 1e-8);

  // nonnegative everywhere, including clamped extremes
  for (double q : {0.0, 1e-9, 0.2, 0.5, 0.9, 1.0}) {
    EXPECT_GE(bce_loss(q, 0), 0.0);
    EXPECT_GE(bce_loss(q, 1), 0.0);
  }
}

TEST(L2Loss, Values) {
  const Vec3 t{0.0, 1.0, 0.0};
  EXPECT_DOUBLE_EQ(l2_loss(t, t), 0.0);
  EXPECT_DOUBLE_EQ(l2_loss(-t, t), 4.0);
  EXPECT_DOUBLE_EQ(l2_loss({1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}), 2.0);
}

TEST(Rmsprop, ZeroGradientLeavesParamsUnchanged) {
  OptimizerState s = OptimizerState::create(1e-3, 0.94, 100);
  Tensor p({3});
  p.data = {1.0, -2.0, 3.0};
  const Tensor g({3});
  const Tensor before = p;
  rmsprop_step(s, {&p}, {&g});
  EXPECT_EQ(p.data, before.data);
  EXPECT_EQ(s.step_count, 1u);
}

TEST(Rmsprop, SingleScalarHandIteration) {
  OptimizerState s = OptimizerState::create(1e-3, 0.94, 1000);
  Tensor p({1});
  Tensor g({1});
  g.at(0) = 1.0;
  rmsprop_step(s, {&p}, {&g});
  // a = 0.1 * 1^2, update = lr / (sqrt(0.1) + eps)
  EXPECT_NEAR(s.accum[0].at(0), 0.1, 1e-15);
  const double expect = -1e-3 / (std::sqrt(0.1) + 1e-8);
  EXPECT_NEAR(p.at(0), expect, 1e-15);
}

TEST(Rmsprop, DecaySchedule) {
  OptimizerState s = OptimizerState::create(5e-4, 0.94, 10);
  Tensor p({1});
  Tensor g({1});
  g.at(0) = 0.5;
  std::vector<double> lrs;
  for (int i = 0; i < 35; ++i) {
    lrs.push_back(s.effective_lr());
    rmsprop_step(s, {&p}, {&g});
  }
  for (int i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(lrs[i], 5e-4);
  for (int i = 10; i < 20; ++i) EXPECT_DOUBLE_EQ(lrs[i], 5e-4 * 0.94);
  // exact multiplicative chain at each boundary
  EXPECT_EQ(lrs[20], lrs[19] * 0.94);
  EXPECT_EQ(lrs[30], lrs[29] * 0.94);
  // non-increasing
  for (std::size_t i = 1; i < lrs.size(); ++i) EXPECT_LE(lrs[i], lrs[i - 1]);
}

TEST(Rmsprop, AccumulatorsStayNonnegative) {
  Rng rng(23);
  OptimizerState s = OptimizerState::create(1e-3, 0.94, 50);
  Tensor p({8});
  randomize(p, rng);
  for (int step = 0; step < 100; ++step) {
    Tensor g({8});
    randomize(g, rng, -3.0, 3.0);
    rmsprop_step(s, {&p}, {&g});
    for (double a : s.accum[0].data) EXPECT_GE(a, 0.0);
  }
}

TEST(Rmsprop, ShapeMismatchRejected) {
  OptimizerState s = OptimizerState::create(1e-3, 0.94, 10);
  Tensor p({3});
  Tensor g({4});
  EXPECT_THROW(rmsprop_step(s, {&p}, {&g}), ShapeMismatch);
}

TEST(GradCheck, ExactForQuadratic) {
  Tensor theta({2});
  theta.data = {1.0, 2.0};
  const auto loss = [&]() {
    return theta.at(0) * theta.at(0) + theta.at(1) * theta.at(1);
  };
  Tensor analytic({2});
  analytic.data = {2.0 * theta.at(0), 2.0 * theta.at(1)};
  const double err =
      finite_diff_gradcheck(loss, {&theta}, {&analytic}, 1e-5);
  EXPECT_LT(err, 1e-8);
}

TEST(GradCheck, ConstantLossSkipsZeroCoordinates) {
  Tensor theta({3});
  theta.data = {0.5, -0.5, 2.0};
  const auto loss = [&]() { return 42.0; };
  const Tensor analytic({3});
  EXPECT_DOUBLE_EQ(
      finite_diff_gradcheck(loss, {&theta}, {&analytic}, 1e-5), 0.0);
}

TEST(Determinism, SameSeedSameInit) {
  Rng a(99), b(99);
  LayerParams la = make_dense(8, 16), lb = make_dense(8, 16);
  init_glorot_uniform(la, a);
  init_glorot_uniform(lb, b);
  EXPECT_EQ(la.weights.data, lb.weights.data);
}

TEST(LayerBoundaries, RejectNonFinite) {
  LayerParams p = make_conv2d(1, 1, 3, 3);
  Tensor in({1, 4, 4});
  in.at(0, 1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(conv2d_forward(p, in, 1), InvalidValue);

  LayerParams d = make_dense(2, 2);
  EXPECT_THROW(
      dense_forward(d, {1.0, std::numeric_limits<double>::infinity()}),
      InvalidValue);
}
