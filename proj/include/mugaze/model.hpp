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

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mugaze/checkpoint.hpp"
#include "mugaze/data.hpp"
#include "mugaze/errors.hpp"
#include "mugaze/eval.hpp"
#include "mugaze/geometry.hpp"
#include "mugaze/nn.hpp"
#include "mugaze/rng.hpp"
#include "mugaze/tensor.hpp"

namespace mugaze::model {

constexpr std::size_t kPatchSide = 64;
constexpr std::size_t kFeatureDim = 12;  // head image encoding size
constexpr std::size_t kSpatialDim = 11;  // 8 (2D) + 3 (3D)
constexpr std::size_t kMgInputDim = 2 * kFeatureDim + kSpatialDim;  // 35
constexpr std::array<std::size_t, 4> kConvChannels = {8, 16, 24, 32};
constexpr std::size_t kConvStride = 2;
constexpr std::size_t kConvKernel = 3;

/// All learnable weights: the shared head encoder (four strided 3x3 convs,
/// global average pooling, a linear projection to 12), the mutual-gaze head
/// (35 -> 16 -> 8 -> 1) and the auxiliary gaze head (12 -> 6 -> 3).
struct ModelParams {
  std::size_t channels = 3;
  std::array<nn::LayerParams, 4> conv;
  nn::LayerParams proj;
  std::array<nn::LayerParams, 3> mg;
  std::array<nn::LayerParams, 2> gaze;

  /// Zero-valued parameter set with the right shapes.
  static ModelParams create(std::size_t channels) {
    ModelParams p;
    p.channels = channels;
    std::size_t in_ch = channels;
    for (std::size_t i = 0; i < p.conv.size(); ++i) {
      p.conv[i] = nn::make_conv2d(kConvChannels[i], in_ch, kConvKernel,
                                  kConvKernel);
      in_ch = kConvChannels[i];
    }
    p.proj = nn::make_dense(kFeatureDim, kConvChannels.back());
    p.mg[0] = nn::make_dense(16, kMgInputDim);
    p.mg[1] = nn::make_dense(8, 16);
    p.mg[2] = nn::make_dense(1, 8);
    p.gaze[0] = nn::make_dense(6, kFeatureDim);
    p.gaze[1] = nn::make_dense(3, 6);
    return p;
  }

  /// Glorot-uniform initialization, biases zero. The draw order is fixed
  /// (layer by layer, row-major), so a seed pins the parameters exactly.
  static ModelParams init(std::size_t channels, Rng& rng) {
    ModelParams p = create(channels);
    for (nn::LayerParams* l : p.layers()) nn::init_glorot_uniform(*l, rng);
    return p;
  }

  std::vector<nn::LayerParams*> layers() {
    return {&conv[0], &conv[1], &conv[2], &conv[3], &proj,
            &mg[0],   &mg[1],   &mg[2],   &gaze[0], &gaze[1]};
  }
  std::vector<const nn::LayerParams*> layers() const {
    return {&conv[0], &conv[1], &conv[2], &conv[3], &proj,
            &mg[0],   &mg[1],   &mg[2],   &gaze[0], &gaze[1]};
  }

  static const std::vector<std::string>& layer_names() {
    static const std::vector<std::string> names = {
        "encoder.conv1", "encoder.conv2", "encoder.conv3", "encoder.conv4",
        "encoder.proj",  "mg.fc1",        "mg.fc2",        "mg.fc3",
        "gaze.fc1",      "gaze.fc2"};
    return names;
  }

  std::vector<Tensor*> tensors() {
    std::vector<Tensor*> out;
    for (nn::LayerParams* l : layers()) {
      out.push_back(&l->weights);
      out.push_back(&l->bias);
    }
    return out;
  }
  std::vector<const Tensor*> tensors() const {
    std::vector<const Tensor*> out;
    for (const nn::LayerParams* l : layers()) {
      out.push_back(&l->weights);
      out.push_back(&l->bias);
    }
    return out;
  }

  std::vector<ckpt::NamedTensor> named_tensors() const {
    std::vector<ckpt::NamedTensor> out;
    const auto ls = layers();
    for (std::size_t i = 0; i < ls.size(); ++i) {
      out.push_back({layer_names()[i] + ".weights", ls[i]->kind,
                     &ls[i]->weights});
      out.push_back({layer_names()[i] + ".bias", ls[i]->kind, &ls[i]->bias});
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Tensor* t : tensors()) n += t->numel();
    return n;
  }
};

inline void accumulate(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

inline void scale_params(ModelParams& p, double s) {
  for (Tensor* t : p.tensors()) {
    for (double& v : t->data) v *= s;
  }
}

// --- forward traces ---------------------------------------------------------

struct EncoderTrace {
  const Tensor* input = nullptr;
  std::array<Tensor, 4> pre;  // conv outputs before ReLU
  std::array<Tensor, 4> act;  // after ReLU
  std::vector<double> pooled;
  std::vector<double> feature;
};

struct MgTrace {
  std::vector<double> input;
  std::vector<double> pre1, act1, pre2, act2;
  double logit = 0.0;
  double score = 0.0;
};

struct GazeTrace {
  std::vector<double> input;
  std::vector<double> pre1, act1;
  Vec3 prenorm{};
  Vec3 dir{};
};

/// Shared head encoder: 4 strided convs with ReLU, global average pooling,
/// linear projection to the 12-dim head feature.
inline std::vector<double> encode_head(const ModelParams& p,
                                       const Tensor& patch,
                                       EncoderTrace* trace = nullptr) {
  if (patch.shape != std::vector<std::size_t>{p.channels, kPatchSide,
                                              kPatchSide}) {
    throw ShapeMismatch("encode_head expects a (" +
                        std::to_string(p.channels) + ", 64, 64) patch, got " +
                        shape_string(patch));
  }
  EncoderTrace local;
  EncoderTrace& tr = trace ? *trace : local;
  tr.input = &patch;
  const Tensor* x = &patch;
  for (std::size_t i = 0; i < p.conv.size(); ++i) {
    tr.pre[i] = nn::conv2d_forward(p.conv[i], *x, kConvStride);
    tr.act[i] = nn::relu(tr.pre[i]);
    x = &tr.act[i];
  }
  const Tensor& last = tr.act.back();
  const std::size_t spatial = last.dim(1) * last.dim(2);
  tr.pooled.assign(last.dim(0), 0.0);
  for (std::size_t c = 0; c < last.dim(0); ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < spatial; ++i) {
      sum += last.data[c * spatial + i];
    }
    tr.pooled[c] = sum / static_cast<double>(spatial);
  }
  tr.feature = nn::dense_forward(p.proj, tr.pooled);
  return tr.feature;
}

/// Backward through the encoder, accumulating parameter gradients.
inline void encode_head_backward(const ModelParams& p, const EncoderTrace& tr,
                                 const std::vector<double>& d_feature,
                                 ModelParams& grads) {
  nn::DenseGrads dproj = nn::dense_backward(p.proj, tr.pooled, d_feature);
  accumulate(grads.proj.weights, dproj.weights);
  accumulate(grads.proj.bias, dproj.bias);

  const Tensor& last = tr.act.back();
  const std::size_t spatial = last.dim(1) * last.dim(2);
  Tensor d_act(last.shape);
  for (std::size_t c = 0; c < last.dim(0); ++c) {
    const double g = dproj.input[c] / static_cast<double>(spatial);
    for (std::size_t i = 0; i < spatial; ++i) {
      d_act.data[c * spatial + i] = g;
    }
  }

  for (std::size_t i = p.conv.size(); i-- > 0;) {
    const Tensor d_pre = nn::relu_backward(tr.pre[i], d_act);
    const Tensor& input = (i == 0) ? *tr.input : tr.act[i - 1];
    nn::Conv2dGrads g = nn::conv2d_backward(p.conv[i], input, kConvStride,
                                            d_pre);
    accumulate(grads.conv[i].weights, g.weights);
    accumulate(grads.conv[i].bias, g.bias);
    d_act = std::move(g.input);
  }
}

/// Concatenation order [enc1 | enc2 | enc2d | dir3d] is the interface
/// contract for the mutual-gaze head input.
inline std::vector<double> assemble_mg_input(const std::vector<double>& enc1,
                                             const std::vector<double>& enc2,
                                             const SpatialEncoding& spatial) {
  std::vector<double> in;
  in.reserve(kMgInputDim);
  in.insert(in.end(), enc1.begin(), enc1.end());
  in.insert(in.end(), enc2.begin(), enc2.end());
  in.insert(in.end(), spatial.enc2d.begin(), spatial.enc2d.end());
  in.insert(in.end(), spatial.dir3d.begin(), spatial.dir3d.end());
  return in;
}

/// Mutual-gaze head: 16-ReLU, 8-ReLU, 1-sigmoid over the 35-dim input.
inline double predict_mutual_gaze(const ModelParams& p,
                                  const std::vector<double>& enc1,
                                  const std::vector<double>& enc2,
                                  const SpatialEncoding& spatial,
                                  MgTrace* trace = nullptr) {
  if (enc1.size() != kFeatureDim || enc2.size() != kFeatureDim) {
    throw ShapeMismatch("head encodings must be 12-dim");
  }
  MgTrace local;
  MgTrace& tr = trace ? *trace : local;
  tr.input = assemble_mg_input(enc1, enc2, spatial);
  tr.pre1 = nn::dense_forward(p.mg[0], tr.input);
  tr.act1 = nn::relu(tr.pre1);
  tr.pre2 = nn::dense_forward(p.mg[1], tr.act1);
  tr.act2 = nn::relu(tr.pre2);
  tr.logit = nn::dense_forward(p.mg[2], tr.act2)[0];
  tr.score = nn::sigmoid(tr.logit);
  return tr.score;
}

/// Backward from d(loss)/d(logit); adds the gradient w.r.t. the two head
/// encodings into d_enc1/d_enc2.
inline void predict_mutual_gaze_backward(const ModelParams& p,
                                         const MgTrace& tr, double d_logit,
                                         ModelParams& grads,
                                         std::vector<double>& d_enc1,
                                         std::vector<double>& d_enc2) {
  nn::DenseGrads g3 = nn::dense_backward(p.mg[2], tr.act2, {d_logit});
  accumulate(grads.mg[2].weights, g3.weights);
  accumulate(grads.mg[2].bias, g3.bias);
  const std::vector<double> d_pre2 = nn::relu_backward(tr.pre2, g3.input);
  nn::DenseGrads g2 = nn::dense_backward(p.mg[1], tr.act1, d_pre2);
  accumulate(grads.mg[1].weights, g2.weights);
  accumulate(grads.mg[1].bias, g2.bias);
  const std::vector<double> d_pre1 = nn::relu_backward(tr.pre1, g2.input);
  nn::DenseGrads g1 = nn::dense_backward(p.mg[0], tr.input, d_pre1);
  accumulate(grads.mg[0].weights, g1.weights);
  accumulate(grads.mg[0].bias, g1.bias);
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    d_enc1[i] += g1.input[i];
    d_enc2[i] += g1.input[kFeatureDim + i];
  }
}

/// Auxiliary gaze head: 6-ReLU, 3-linear, unit normalization.
inline Vec3 estimate_gaze(const ModelParams& p,
                          const std::vector<double>& enc,
                          GazeTrace* trace = nullptr) {
  if (enc.size() != kFeatureDim) {
    throw ShapeMismatch("gaze head expects a 12-dim encoding");
  }
  GazeTrace local;
  GazeTrace& tr = trace ? *trace : local;
  tr.input = enc;
  tr.pre1 = nn::dense_forward(p.gaze[0], enc);
  tr.act1 = nn::relu(tr.pre1);
  const std::vector<double> out = nn::dense_forward(p.gaze[1], tr.act1);
  tr.prenorm = {out[0], out[1], out[2]};
  tr.dir = nn::unit_normalize(tr.prenorm);
  return tr.dir;
}

inline void estimate_gaze_backward(const ModelParams& p, const GazeTrace& tr,
                                   const Vec3& d_dir, ModelParams& grads,
                                   std::vector<double>& d_enc) {
  const Vec3 d_prenorm = nn::unit_normalize_backward(tr.prenorm, d_dir);
  nn::DenseGrads g2 = nn::dense_backward(
      p.gaze[1], tr.act1, {d_prenorm[0], d_prenorm[1], d_prenorm[2]});
  accumulate(grads.gaze[1].weights, g2.weights);
  accumulate(grads.gaze[1].bias, g2.bias);
  const std::vector<double> d_pre1 = nn::relu_backward(tr.pre1, g2.input);
  nn::DenseGrads g1 = nn::dense_backward(p.gaze[0], tr.input, d_pre1);
  accumulate(grads.gaze[0].weights, g1.weights);
  accumulate(grads.gaze[0].bias, g1.bias);
  for (std::size_t i = 0; i < kFeatureDim; ++i) d_enc[i] += g1.input[i];
}

// --- combined loss -----------------------------------------------------------

struct PairPrediction {
  double score = 0.0;
  Vec3 gaze1{};
  Vec3 gaze2{};
};

struct LossBreakdown {
  double total = 0.0;
  double bce = 0.0;
  double gaze = 0.0;  // masked auxiliary term; 0 whenever label = 0
  double lambda = 0.0;
};

/// total = bce(score, label) + lambda * label * (L2(g1, v) + L2(g2, -v)) / 2.
/// The auxiliary term only exists for positive samples; v may be absent for
/// negatives.
inline LossBreakdown combined_loss(const PairPrediction& pred, int label,
                                   const std::optional<Vec3>& v,
                                   double lambda) {
  LossBreakdown out;
  out.lambda = lambda;
  out.bce = nn::bce_loss(pred.score, label);
  if (label == 1) {
    if (!v) {
      throw MissingPseudoLabel("positive sample without a pseudo gaze label");
    }
    out.gaze = (nn::l2_loss(pred.gaze1, *v) + nn::l2_loss(pred.gaze2, -*v)) /
               2.0;
  }
  out.total = out.bce + lambda * static_cast<double>(label) * out.gaze;
  return out;
}

// --- full pair forward/backward ------------------------------------------------

struct PairTrace {
  EncoderTrace e1, e2;
  MgTrace mg;
  bool gaze_active = false;
  GazeTrace g1, g2;
  int label = 0;
  Vec3 v{};
  double lambda = 0.0;
};

/// Forward pass of the whole network for one pair. lambda is the effective
/// auxiliary weight (0 disables the gaze branch entirely, which is exactly
/// equivalent for both the loss value and the gradients).
inline LossBreakdown pair_forward(const ModelParams& p, const Tensor& patch1,
                                  const Tensor& patch2,
                                  const SpatialEncoding& spatial, int label,
                                  const std::optional<Vec3>& v, double lambda,
                                  bool use_3d, PairTrace& tr) {
  SpatialEncoding sp = spatial;
  if (!use_3d) sp.dir3d = {0.0, 0.0, 0.0};
  const std::vector<double> enc1 = encode_head(p, patch1, &tr.e1);
  const std::vector<double> enc2 = encode_head(p, patch2, &tr.e2);
  predict_mutual_gaze(p, enc1, enc2, sp, &tr.mg);

  tr.label = label;
  tr.lambda = lambda;
  tr.gaze_active = (label == 1 && lambda != 0.0);

  LossBreakdown out;
  out.lambda = lambda;
  out.bce = nn::bce_loss(tr.mg.score, label);
  if (tr.gaze_active) {
    if (!v) {
      throw MissingPseudoLabel("positive sample without a pseudo gaze label");
    }
    tr.v = *v;
    estimate_gaze(p, enc1, &tr.g1);
    estimate_gaze(p, enc2, &tr.g2);
    out.gaze = (nn::l2_loss(tr.g1.dir, tr.v) +
                nn::l2_loss(tr.g2.dir, -tr.v)) /
               2.0;
  }
  out.total = out.bce + lambda * static_cast<double>(label) * out.gaze;
  return out;
}

/// Accumulates d(total)/d(params) into grads. Both branches flow into the
/// shared encoder.
inline void pair_backward(const ModelParams& p, const PairTrace& tr,
                          ModelParams& grads) {
  const double d_logit = nn::bce_grad(tr.mg.score, tr.label) *
                         nn::sigmoid_grad(tr.mg.logit);
  std::vector<double> d_enc1(kFeatureDim, 0.0);
  std::vector<double> d_enc2(kFeatureDim, 0.0);
  predict_mutual_gaze_backward(p, tr.mg, d_logit, grads, d_enc1, d_enc2);
  if (tr.gaze_active) {
    // d/dg1 of lambda * (|g1 - v|^2 + |g2 + v|^2) / 2.
    const Vec3 d_g1 = (tr.lambda / 2.0) * nn::l2_grad(tr.g1.dir, tr.v);
    const Vec3 d_g2 = (tr.lambda / 2.0) * nn::l2_grad(tr.g2.dir, -tr.v);
    estimate_gaze_backward(p, tr.g1, d_g1, grads, d_enc1);
    estimate_gaze_backward(p, tr.g2, d_g2, grads, d_enc2);
  }
  encode_head_backward(p, tr.e1, d_enc1, grads);
  encode_head_backward(p, tr.e2, d_enc2, grads);
}

// --- training -----------------------------------------------------------------

struct TrainConfig {
  double lambda = 1.0;
  std::size_t batch = 128;
  double base_lr = 5e-4;
  double decay_factor = 0.94;
  std::uint64_t decay_every = 2000;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  std::size_t channels = 3;
  bool aux_gaze = true;
  bool use_3d_encoding = true;
  bool augment = true;
  data::AugmentConfig aug{};
  double fov_deg = 53.0;
  std::size_t val_every_epochs = 1;  // 0 disables periodic validation

  double effective_lambda() const { return aux_gaze ? lambda : 0.0; }
};

/// Per-sample inputs with the pair geometry already resolved.
struct PreparedSample {
  const Tensor* patch1 = nullptr;
  const Tensor* patch2 = nullptr;
  SpatialEncoding spatial;
  int label = 0;
  std::optional<Vec3> v;
};

/// Resolves spatial features and pseudo labels for one sample. Positive
/// samples with degenerate geometry are an error; negatives fall back to a
/// zero dir3d like inference does.
inline PreparedSample prepare_sample(const data::PairSample& s,
                                     const CameraIntrinsics& cam) {
  PreparedSample out;
  out.patch1 = &s.patch1;
  out.patch2 = &s.patch2;
  out.label = s.label;
  if (s.label == 1) {
    out.spatial = spatial_encoding(s.box1, s.box2, s.dims, cam);
    out.v = pseudo_gaze_labels(out.spatial.dir3d).g1;
  } else {
    out.spatial = spatial_encoding_lenient(s.box1, s.box2, s.dims, cam);
  }
  return out;
}

/// One optimizer step over a prepared batch: forward and backward per sample
/// in order, gradient mean, RMSprop update. Returns the mean loss breakdown.
inline LossBreakdown train_step_prepared(
    ModelParams& params, nn::OptimizerState& opt,
    const std::vector<PreparedSample>& batch, double lambda_eff,
    bool use_3d) {
  if (batch.empty()) throw EmptyDataset("train step on an empty batch");
  ModelParams grads = ModelParams::create(params.channels);
  LossBreakdown mean;
  mean.lambda = lambda_eff;
  PairTrace tr;
  for (const PreparedSample& s : batch) {
    const LossBreakdown lb =
        pair_forward(params, *s.patch1, *s.patch2, s.spatial, s.label, s.v,
                     lambda_eff, use_3d, tr);
    pair_backward(params, tr, grads);
    mean.total += lb.total;
    mean.bce += lb.bce;
    mean.gaze += lb.gaze;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  mean.total *= inv;
  mean.bce *= inv;
  mean.gaze *= inv;
  scale_params(grads, inv);

  const std::vector<Tensor*> pts = params.tensors();
  std::vector<const Tensor*> gts;
  for (const Tensor* t : std::as_const(grads).tensors()) gts.push_back(t);
  nn::rmsprop_step(opt, pts, gts);
  return mean;
}

/// Convenience wrapper over raw samples (no augmentation).
inline LossBreakdown train_step(ModelParams& params, nn::OptimizerState& opt,
                                const std::vector<data::PairSample>& batch,
                                const TrainConfig& cfg) {
  std::vector<PreparedSample> prepared;
  prepared.reserve(batch.size());
  for (const data::PairSample& s : batch) {
    prepared.push_back(
        prepare_sample(s, focal_from_fov(s.dims, cfg.fov_deg)));
  }
  return train_step_prepared(params, opt, prepared, cfg.effective_lambda(),
                             cfg.use_3d_encoding);
}

/// Mutual-gaze score for one pair; the gaze head is not evaluated. Degenerate
/// geometry yields a zero dir3d instead of an error.
inline double infer_pair(const ModelParams& p, const Tensor& patch1,
                         const Tensor& patch2, const HeadBox& b1,
                         const HeadBox& b2, const ImageDims& dims,
                         const CameraIntrinsics& cam, bool use_3d = true) {
  SpatialEncoding sp = spatial_encoding_lenient(b1, b2, dims, cam);
  if (!use_3d) sp.dir3d = {0.0, 0.0, 0.0};
  const std::vector<double> enc1 = encode_head(p, patch1);
  const std::vector<double> enc2 = encode_head(p, patch2);
  return predict_mutual_gaze(p, enc1, enc2, sp);
}

inline double score_sample(const ModelParams& p, const data::PairSample& s,
                           double fov_deg, bool use_3d) {
  return infer_pair(p, s.patch1, s.patch2, s.box1, s.box2, s.dims,
                    focal_from_fov(s.dims, fov_deg), use_3d);
}

/// Test-set average precision of a trained model.
inline double evaluate_ap(const ModelParams& p,
                          const std::vector<data::PairSample>& samples,
                          double fov_deg, bool use_3d) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(samples.size());
  labels.reserve(samples.size());
  for (const data::PairSample& s : samples) {
    scores.push_back(score_sample(p, s, fov_deg, use_3d));
    labels.push_back(s.label);
  }
  return eval::average_precision(scores, labels).ap;
}

struct StepRecord {
  std::uint64_t step = 0;  // completed optimizer steps
  double lr = 0.0;
  double bce = 0.0;
  double gaze = 0.0;
  double total = 0.0;
};

struct ValRecord {
  std::uint64_t step = 0;
  double ap = 0.0;
};

struct TrainResult {
  ModelParams params;
  nn::OptimizerState opt;
  std::vector<StepRecord> steps;
  std::vector<ValRecord> val;
};

/// Full training loop: seeded init, per-epoch shuffling, optional
/// augmentation, pseudo-label supervision for positives, periodic validation
/// AP. Deterministic given the config.
inline TrainResult train(const std::vector<data::PairSample>& train_set,
                         const std::vector<data::PairSample>& val_set,
                         const TrainConfig& cfg) {
  if (train_set.empty()) throw EmptyDataset("training set is empty");
  if (cfg.batch == 0) throw ConfigError("batch size must be positive");

  Rng rng(cfg.seed);
  TrainResult result;
  result.params = ModelParams::init(cfg.channels, rng);
  result.opt = nn::OptimizerState::create(cfg.base_lr, cfg.decay_factor,
                                          cfg.decay_every);
  const double lambda_eff = cfg.effective_lambda();

  const std::size_t steps_per_epoch = train_set.size() / cfg.batch;
  if (steps_per_epoch == 0) {
    throw ConfigError("batch size exceeds the training set size");
  }

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  // Augmented copies live here; a deque keeps references stable while the
  // batch is being assembled.
  std::deque<data::PairSample> scratch;

  const auto run_validation = [&]() {
    if (val_set.empty()) return;
    result.val.push_back(ValRecord{
        result.opt.step_count,
        evaluate_ap(result.params, val_set, cfg.fov_deg,
                    cfg.use_3d_encoding)});
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      scratch.clear();
      std::vector<PreparedSample> prepared;
      prepared.reserve(cfg.batch);
      for (std::size_t k = 0; k < cfg.batch; ++k) {
        const data::PairSample& base = train_set[order[b * cfg.batch + k]];
        const data::PairSample* sample = &base;
        if (cfg.augment) {
          scratch.push_back(data::augment_pair(base, cfg.aug, rng));
          sample = &scratch.back();
        }
        const CameraIntrinsics cam = focal_from_fov(sample->dims, cfg.fov_deg);
        PreparedSample ps;
        try {
          ps = prepare_sample(*sample, cam);
        } catch (const DegenerateGeometry&) {
          // Jitter can in principle collapse a positive pair; fall back to
          // the unaugmented sample, which was validated at load time.
          ps = prepare_sample(base, cam);
        }
        prepared.push_back(ps);
      }
      const double lr = result.opt.effective_lr();
      const LossBreakdown lb = train_step_prepared(
          result.params, result.opt, prepared, lambda_eff,
          cfg.use_3d_encoding);
      result.steps.push_back(StepRecord{result.opt.step_count, lr, lb.bce,
                                        lb.gaze, lb.total});
    }
    if (cfg.val_every_epochs > 0 && (epoch + 1) % cfg.val_every_epochs == 0) {
      run_validation();
    }
  }
  if (cfg.val_every_epochs == 0 || cfg.epochs % cfg.val_every_epochs != 0) {
    run_validation();
  }
  return result;
}

// --- checkpoint binding --------------------------------------------------------

inline void save_model(const std::string& path, const ModelParams& params,
                       const nn::OptimizerState* opt = nullptr) {
  ckpt::save_checkpoint_file(path, params.named_tensors(), opt);
}

inline std::string model_to_string(const ModelParams& params,
                                   const nn::OptimizerState* opt = nullptr) {
  return ckpt::checkpoint_to_string(params.named_tensors(), opt);
}

struct LoadedModel {
  ModelParams params;
  bool has_optimizer = false;
  nn::OptimizerState optimizer;
};

inline LoadedModel load_model(const std::string& path) {
  const ckpt::LoadedCheckpoint raw = ckpt::load_checkpoint_file(path);
  const Tensor& conv1_w = raw.find("encoder.conv1.weights");
  if (conv1_w.rank() != 4) {
    throw CheckpointError("encoder.conv1.weights must be rank 4");
  }
  LoadedModel out;
  out.params = ModelParams::create(conv1_w.dim(1));
  const auto layers = out.params.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string& name = ModelParams::layer_names()[i];
    const Tensor& w = raw.find(name + ".weights");
    const Tensor& b = raw.find(name + ".bias");
    if (w.shape != layers[i]->weights.shape ||
        b.shape != layers[i]->bias.shape) {
      throw CheckpointError("checkpoint tensor shape mismatch for " + name);
    }
    layers[i]->weights = w;
    layers[i]->bias = b;
  }
  out.has_optimizer = raw.has_optimizer;
  if (raw.has_optimizer) out.optimizer = raw.optimizer;
  return out;
}

}  // namespace mugaze::model
