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
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "mugaze/errors.hpp"
#include "mugaze/geometry.hpp"
#include "mugaze/rng.hpp"
#include "mugaze/tensor.hpp"

// All inner products run in a fixed order chosen here (plain loops the
// compiler may vectorize lane-wise but never reassociate), so results are
// bit-identical across runs and across allocation layouts on a platform.

namespace mugaze::nn {

enum class LayerKind : std::uint8_t { conv2d = 0, dense = 1 };

/// Learnable parameters of one layer. Conv weights are (out_ch, in_ch, kh,
/// kw); dense weights are (out_dim, in_dim). Bias length matches the output
/// channel/dimension count.
struct LayerParams {
  LayerKind kind = LayerKind::dense;
  Tensor weights;
  Tensor bias;
};

inline LayerParams make_conv2d(std::size_t out_ch, std::size_t in_ch,
                               std::size_t kh, std::size_t kw) {
  LayerParams p;
  p.kind = LayerKind::conv2d;
  p.weights = Tensor({out_ch, in_ch, kh, kw});
  p.bias = Tensor({out_ch});
  return p;
}

inline LayerParams make_dense(std::size_t out_dim, std::size_t in_dim) {
  LayerParams p;
  p.kind = LayerKind::dense;
  p.weights = Tensor({out_dim, in_dim});
  p.bias = Tensor({out_dim});
  return p;
}

/// Glorot-uniform weight initialization; biases stay zero.
inline void init_glorot_uniform(LayerParams& p, Rng& rng) {
  std::size_t fan_in, fan_out;
  if (p.kind == LayerKind::conv2d) {
    const std::size_t rf = p.weights.dim(2) * p.weights.dim(3);
    fan_in = p.weights.dim(1) * rf;
    fan_out = p.weights.dim(0) * rf;
  } else {
    fan_in = p.weights.dim(1);
    fan_out = p.weights.dim(0);
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& w : p.weights.data) w = rng.uniform(-bound, bound);
  p.bias.set_zero();
}

// --- padding arithmetic ('same' geometry before stride) ---------------------

struct ConvGeometry {
  std::size_t in_ch, height, width;
  std::size_t out_ch, kh, kw;
  std::size_t stride;
  std::size_t out_h, out_w;
  std::ptrdiff_t pad_top, pad_left;
};

inline ConvGeometry conv_geometry(const LayerParams& p, const Tensor& input,
                                  std::size_t stride) {
  if (p.kind != LayerKind::conv2d || p.weights.rank() != 4) {
    throw ShapeMismatch("conv2d expects 4-d weights");
  }
  if (input.rank() != 3) {
    throw ShapeMismatch("conv2d expects a (channels, H, W) input, got " +
                        shape_string(input));
  }
  if (stride < 1) throw ShapeMismatch("conv2d stride must be >= 1");
  ConvGeometry g;
  g.out_ch = p.weights.dim(0);
  g.in_ch = p.weights.dim(1);
  g.kh = p.weights.dim(2);
  g.kw = p.weights.dim(3);
  if (input.dim(0) != g.in_ch) {
    throw ShapeMismatch("conv2d input channels " + std::to_string(input.dim(0)) +
                        " != weight channels " + std::to_string(g.in_ch));
  }
  g.height = input.dim(1);
  g.width = input.dim(2);
  g.stride = stride;
  g.out_h = (g.height + stride - 1) / stride;
  g.out_w = (g.width + stride - 1) / stride;
  const auto pad_total = [&](std::size_t out, std::size_t k, std::size_t in) {
    const std::ptrdiff_t t = static_cast<std::ptrdiff_t>((out - 1) * g.stride +
                                                         k) -
                             static_cast<std::ptrdiff_t>(in);
    return std::max<std::ptrdiff_t>(t, 0);
  };
  g.pad_top = pad_total(g.out_h, g.kh, g.height) / 2;
  g.pad_left = pad_total(g.out_w, g.kw, g.width) / 2;
  return g;
}

namespace detail {

// Unrolls input patches into a (in_ch*kh*kw) x (out_h*out_w) matrix so the
// convolution becomes a single matrix product.
inline Eigen::MatrixXd im2col(const Tensor& input, const ConvGeometry& g) {
  const std::size_t k = g.in_ch * g.kh * g.kw;
  Eigen::MatrixXd col(k, g.out_h * g.out_w);
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      const std::size_t c = oy * g.out_w + ox;
      std::size_t r = 0;
      for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * g.stride + ky) - g.pad_top;
          const bool row_ok =
              iy >= 0 && iy < static_cast<std::ptrdiff_t>(g.height);
          for (std::size_t kx = 0; kx < g.kw; ++kx, ++r) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - g.pad_left;
            col(r, c) = (row_ok && ix >= 0 &&
                         ix < static_cast<std::ptrdiff_t>(g.width))
                            ? input.at(ci, static_cast<std::size_t>(iy),
                                       static_cast<std::size_t>(ix))
                            : 0.0;
          }
        }
      }
    }
  }
  return col;
}

inline void col2im_add(const Eigen::MatrixXd& dcol, const ConvGeometry& g,
                       Tensor& dinput) {
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      const std::size_t c = oy * g.out_w + ox;
      std::size_t r = 0;
      for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * g.stride + ky) - g.pad_top;
          const bool row_ok =
              iy >= 0 && iy < static_cast<std::ptrdiff_t>(g.height);
          for (std::size_t kx = 0; kx < g.kw; ++kx, ++r) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - g.pad_left;
            if (row_ok && ix >= 0 &&
                ix < static_cast<std::ptrdiff_t>(g.width)) {
              dinput.at(ci, static_cast<std::size_t>(iy),
                        static_cast<std::size_t>(ix)) += dcol(r, c);
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Strided cross-correlation with 'same'-style symmetric zero padding:
/// out_h = ceil(H / stride), out_w = ceil(W / stride).
inline Tensor conv2d_forward(const LayerParams& p, const Tensor& input,
                             std::size_t stride) {
  ensure_finite(input, "conv2d input");
  const ConvGeometry g = conv_geometry(p, input, stride);
  const Eigen::MatrixXd col = detail::im2col(input, g);
  ConstRowMatMap wm(p.weights.data.data(), static_cast<Eigen::Index>(g.out_ch),
                    static_cast<Eigen::Index>(g.in_ch * g.kh * g.kw));
  Tensor out({g.out_ch, g.out_h, g.out_w});
  RowMatMap om(out.data.data(), static_cast<Eigen::Index>(g.out_ch),
               static_cast<Eigen::Index>(g.out_h * g.out_w));
  om.noalias() = wm * col;
  for (std::size_t o = 0; o < g.out_ch; ++o) {
    om.row(static_cast<Eigen::Index>(o)).array() += p.bias.at(o);
  }
  return out;
}

struct Conv2dGrads {
  Tensor weights;
  Tensor bias;
  Tensor input;
};

/// Gradients of the conv2d output w.r.t. weights, bias and input, given the
/// upstream gradient.
inline Conv2dGrads conv2d_backward(const LayerParams& p, const Tensor& input,
                                   std::size_t stride,
                                   const Tensor& grad_out) {
  const ConvGeometry g = conv_geometry(p, input, stride);
  if (grad_out.shape !=
      std::vector<std::size_t>{g.out_ch, g.out_h, g.out_w}) {
    throw ShapeMismatch("conv2d_backward gradient shape " +
                        shape_string(grad_out));
  }
  const Eigen::MatrixXd col = detail::im2col(input, g);
  ConstRowMatMap gm(grad_out.data.data(),
                    static_cast<Eigen::Index>(g.out_ch),
                    static_cast<Eigen::Index>(g.out_h * g.out_w));
  ConstRowMatMap wm(p.weights.data.data(), static_cast<Eigen::Index>(g.out_ch),
                    static_cast<Eigen::Index>(g.in_ch * g.kh * g.kw));

  Conv2dGrads grads;
  grads.weights = Tensor(p.weights.shape);
  RowMatMap dwm(grads.weights.data.data(),
                static_cast<Eigen::Index>(g.out_ch),
                static_cast<Eigen::Index>(g.in_ch * g.kh * g.kw));
  dwm.noalias() = gm * col.transpose();

  grads.bias = Tensor(p.bias.shape);
  for (std::size_t o = 0; o < g.out_ch; ++o) {
    grads.bias.at(o) = gm.row(static_cast<Eigen::Index>(o)).sum();
  }

  grads.input = Tensor(input.shape);
  const Eigen::MatrixXd dcol = wm.transpose() * gm;
  detail::col2im_add(dcol, g, grads.input);
  return grads;
}

/// Affine map W*x + b.
inline std::vector<double> dense_forward(const LayerParams& p,
                                         const std::vector<double>& x) {
  if (p.kind != LayerKind::dense || p.weights.rank() != 2) {
    throw ShapeMismatch("dense expects 2-d weights");
  }
  const std::size_t out_dim = p.weights.dim(0);
  const std::size_t in_dim = p.weights.dim(1);
  if (x.size() != in_dim) {
    throw ShapeMismatch("dense input length " + std::to_string(x.size()) +
                        " != " + std::to_string(in_dim));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidValue("non-finite dense input");
  }
  std::vector<double> y(out_dim);
  ConstRowMatMap wm(p.weights.data.data(), static_cast<Eigen::Index>(out_dim),
                    static_cast<Eigen::Index>(in_dim));
  Eigen::Map<const Eigen::VectorXd> xv(x.data(),
                                       static_cast<Eigen::Index>(in_dim));
  Eigen::Map<const Eigen::VectorXd> bv(p.bias.data.data(),
                                       static_cast<Eigen::Index>(out_dim));
  Eigen::Map<Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(out_dim));
  yv.noalias() = wm * xv;
  yv += bv;
  return y;
}

struct DenseGrads {
  Tensor weights;
  Tensor bias;
  std::vector<double> input;
};

inline DenseGrads dense_backward(const LayerParams& p,
                                 const std::vector<double>& x,
                                 const std::vector<double>& grad_out) {
  const std::size_t out_dim = p.weights.dim(0);
  const std::size_t in_dim = p.weights.dim(1);
  if (grad_out.size() != out_dim) {
    throw ShapeMismatch("dense_backward gradient length mismatch");
  }
  DenseGrads grads;
  grads.weights = Tensor(p.weights.shape);
  grads.bias = Tensor(p.bias.shape);
  grads.input.assign(in_dim, 0.0);
  for (std::size_t o = 0; o < out_dim; ++o) {
    const double go = grad_out[o];
    grads.bias.at(o) = go;
    for (std::size_t i = 0; i < in_dim; ++i) {
      grads.weights.at(o, i) = go * x[i];
      grads.input[i] += p.weights.at(o, i) * go;
    }
  }
  return grads;
}

// --- activations -------------------------------------------------------------

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = relu(v);
  return y;
}

inline std::vector<double> relu(const std::vector<double>& x) {
  std::vector<double> y = x;
  for (double& v : y) v = relu(v);
  return y;
}

/// Subgradient at exactly zero is defined as zero.
inline Tensor relu_backward(const Tensor& pre, const Tensor& grad_out) {
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    if (pre.data[i] <= 0.0) g.data[i] = 0.0;
  }
  return g;
}

inline std::vector<double> relu_backward(const std::vector<double>& pre,
                                         const std::vector<double>& grad_out) {
  std::vector<double> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (pre[i] <= 0.0) g[i] = 0.0;
  }
  return g;
}

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = sigmoid(v);
  return y;
}

inline double sigmoid_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

// --- unit normalization -------------------------------------------------------

constexpr double kNormEps = 1e-8;

inline Vec3 unit_normalize(const Vec3& x) {
  const double n = norm(x);
  if (n < kNormEps) {
    throw NearZeroNorm("cannot normalize a near-zero 3-vector");
  }
  return {x[0] / n, x[1] / n, x[2] / n};
}

/// Backward of x -> x/|x| via the Jacobian I/|x| - x x^T / |x|^3.
inline Vec3 unit_normalize_backward(const Vec3& x, const Vec3& grad_out) {
  const double n = norm(x);
  const double n3 = n * n * n;
  const double xg = dot(x, grad_out);
  return {grad_out[0] / n - x[0] * xg / n3, grad_out[1] / n - x[1] * xg / n3,
          grad_out[2] / n - x[2] * xg / n3};
}

// --- losses -------------------------------------------------------------------

constexpr double kBceEps = 1e-7;

/// Binary cross entropy with the prediction clamped into
/// [kBceEps, 1 - kBceEps] before the logs.
inline double bce_loss(double pred, int label) {
  const double p = std::clamp(pred, kBceEps, 1.0 - kBceEps);
  return label ? -std::log(p) : -std::log(1.0 - p);
}

/// d bce / d pred; exactly zero where the clamp is active.
inline double bce_grad(double pred, int label) {
  if (pred < kBceEps || pred > 1.0 - kBceEps) return 0.0;
  return label ? -1.0 / pred : 1.0 / (1.0 - pred);
}

/// Squared Euclidean distance |pred - target|^2.
inline double l2_loss(const Vec3& pred, const Vec3& target) {
  const Vec3 d = pred - target;
  return dot(d, d);
}

inline Vec3 l2_grad(const Vec3& pred, const Vec3& target) {
  return 2.0 * (pred - target);
}

// --- optimizer ------------------------------------------------------------------

/// RMSprop state with a stepped learning-rate decay. The effective rate for a
/// step is base_lr * decay_factor^floor(step_count / decay_every), evaluated
/// with the step count before the increment, and maintained by repeated
/// multiplication so each decay is an exact factor.
struct OptimizerState {
  std::vector<Tensor> accum;
  std::uint64_t step_count = 0;
  double base_lr = 5e-4;
  double decay_factor = 0.94;
  std::uint64_t decay_every = 2000;
  double rho = 0.9;
  double eps = 1e-8;

  double current_lr = 5e-4;
  std::uint64_t applied_decays = 0;

  static OptimizerState create(double lr, double decay_factor,
                               std::uint64_t decay_every) {
    OptimizerState s;
    s.base_lr = lr;
    s.current_lr = lr;
    s.decay_factor = decay_factor;
    s.decay_every = decay_every;
    return s;
  }

  /// Effective learning rate at the current step count.
  double effective_lr() {
    const std::uint64_t k = step_count / decay_every;
    while (applied_decays < k) {
      current_lr *= decay_factor;
      ++applied_decays;
    }
    return current_lr;
  }
};

inline void rmsprop_step(OptimizerState& state,
                         const std::vector<Tensor*>& params,
                         const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size()) {
    throw ShapeMismatch("rmsprop parameter/gradient count mismatch");
  }
  if (state.accum.empty()) {
    state.accum.reserve(params.size());
    for (const Tensor* p : params) state.accum.emplace_back(p->shape);
  }
  if (state.accum.size() != params.size()) {
    throw ShapeMismatch("rmsprop accumulator count mismatch");
  }
  const double lr = state.effective_lr();
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    const Tensor& g = *grads[t];
    Tensor& a = state.accum[t];
    if (!p.same_shape(g) || !p.same_shape(a)) {
      throw ShapeMismatch("rmsprop tensor shape mismatch at index " +
                          std::to_string(t));
    }
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double gi = g.data[i];
      a.data[i] = state.rho * a.data[i] + (1.0 - state.rho) * gi * gi;
      p.data[i] -= lr * gi / (std::sqrt(a.data[i]) + state.eps);
    }
  }
  ++state.step_count;
}

// --- gradient checking ------------------------------------------------------------

/// Compares analytic gradients against central finite differences of loss_fn,
/// perturbing every coordinate of every listed tensor in place. Coordinates
/// where |analytic| + |numeric| <= 1e-8 are skipped. Returns the max relative
/// error over the remaining ones.
inline double finite_diff_gradcheck(const std::function<double()>& loss_fn,
                                    const std::vector<Tensor*>& params,
                                    const std::vector<const Tensor*>& analytic,
                                    double step) {
  if (params.size() != analytic.size()) {
    throw ShapeMismatch("gradcheck parameter/gradient count mismatch");
  }
  double max_rel = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    const Tensor& a = *analytic[t];
    if (!p.same_shape(a)) {
      throw ShapeMismatch("gradcheck tensor shape mismatch");
    }
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double saved = p.data[i];
      p.data[i] = saved + step;
      const double up = loss_fn();
      p.data[i] = saved - step;
      const double down = loss_fn();
      p.data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double ana = a.data[i];
      if (std::abs(ana) + std::abs(numeric) <= 1e-8) continue;
      const double rel =
          std::abs(ana - numeric) / std::max(std::abs(ana), std::abs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace mugaze::nn
