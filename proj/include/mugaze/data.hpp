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
#include <optional>
#include <string>
#include <vector>

#include "mugaze/errors.hpp"
#include "mugaze/geometry.hpp"
#include "mugaze/rng.hpp"
#include "mugaze/tensor.hpp"

namespace mugaze::data {

constexpr std::size_t kPatchSide = 64;

/// One training/inference unit: two head patches with their boxes and the
/// binary mutual-gaze label. Synthetic samples also carry the ground-truth
/// gaze directions they were rendered from.
struct PairSample {
  Tensor patch1;  // (C, 64, 64), values in [0, 1]
  Tensor patch2;
  HeadBox box1;
  HeadBox box2;
  ImageDims dims;
  int label = 0;
  std::optional<Vec3> true_gaze1;
  std::optional<Vec3> true_gaze2;
};

/// Swaps the two heads of a sample so box1 is the canonical first head
/// (lexicographically smaller center, ties on area).
inline void canonicalize_order(PairSample& s) {
  if (!boxes_in_canonical_order(s.box1, s.box2)) {
    std::swap(s.box1, s.box2);
    std::swap(s.patch1, s.patch2);
    std::swap(s.true_gaze1, s.true_gaze2);
  }
}

// --- augmentation -------------------------------------------------------------

struct AugmentConfig {
  double flip_prob = 0.5;
  double center_jitter = 0.05;   // fraction of the box side
  double size_jitter = 0.05;     // size factor drawn from U(1-s, 1+s)
  double brightness = 0.2;       // offset drawn from U(-b, b)
  double contrast_lo = 0.8;
  double contrast_hi = 1.25;

  static AugmentConfig identity() {
    return AugmentConfig{0.0, 0.0, 0.0, 0.0, 1.0, 1.0};
  }
};

inline Tensor mirror_patch(const Tensor& patch) {
  Tensor out(patch.shape);
  const std::size_t c = patch.dim(0), h = patch.dim(1), w = patch.dim(2);
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        out.at(ci, y, x) = patch.at(ci, y, w - 1 - x);
      }
    }
  }
  return out;
}

/// Reflects the whole scene about the vertical image centerline: patches are
/// mirrored, box centers become width - cx, and any ground-truth gaze flips
/// its x component. Applying it twice restores the sample bit-exactly.
inline PairSample flip_sample(const PairSample& s) {
  PairSample out = s;
  out.patch1 = mirror_patch(s.patch1);
  out.patch2 = mirror_patch(s.patch2);
  out.box1.cx = static_cast<double>(s.dims.width) - s.box1.cx;
  out.box2.cx = static_cast<double>(s.dims.width) - s.box2.cx;
  if (out.true_gaze1) (*out.true_gaze1)[0] = -(*out.true_gaze1)[0];
  if (out.true_gaze2) (*out.true_gaze2)[0] = -(*out.true_gaze2)[0];
  return out;
}

/// Training-time augmentation: scene-level horizontal flip, per-box center
/// and size jitter, and a shared brightness/contrast adjustment. Labels are
/// unchanged; spatial encodings and pseudo labels are recomputed downstream
/// from the jittered boxes.
inline PairSample augment_pair(const PairSample& s, const AugmentConfig& cfg,
                               Rng& rng) {
  PairSample out =
      (cfg.flip_prob > 0.0 && rng.bernoulli(cfg.flip_prob)) ? flip_sample(s)
                                                            : s;
  const auto jitter_box = [&](HeadBox& b) {
    b.cx += rng.uniform(-cfg.center_jitter, cfg.center_jitter) * b.w;
    b.cy += rng.uniform(-cfg.center_jitter, cfg.center_jitter) * b.h;
    b.w *= rng.uniform(1.0 - cfg.size_jitter, 1.0 + cfg.size_jitter);
    b.h *= rng.uniform(1.0 - cfg.size_jitter, 1.0 + cfg.size_jitter);
  };
  jitter_box(out.box1);
  jitter_box(out.box2);
  const double brightness = rng.uniform(-cfg.brightness, cfg.brightness);
  const double contrast = rng.uniform(cfg.contrast_lo, cfg.contrast_hi);
  if (brightness != 0.0 || contrast != 1.0) {
    const auto adjust = [&](Tensor& patch) {
      for (double& v : patch.data) {
        v = std::clamp(v * contrast + brightness, 0.0, 1.0);
      }
    };
    adjust(out.patch1);
    adjust(out.patch2);
  }
  return out;
}

// --- patch extraction ----------------------------------------------------------

/// Crops the box region from a (C, H, W) image in [0, 1] and bilinearly
/// resizes it to (C, 64, 64). Samples outside the image are exactly zero.
inline Tensor crop_head_patch(const Tensor& image, const HeadBox& box) {
  if (image.rank() != 3) {
    throw ShapeMismatch("crop_head_patch expects a (C, H, W) image");
  }
  if (!box.valid()) {
    throw ShapeMismatch("crop_head_patch requires a positive-area box");
  }
  const std::size_t c = image.dim(0);
  const auto ih = static_cast<std::ptrdiff_t>(image.dim(1));
  const auto iw = static_cast<std::ptrdiff_t>(image.dim(2));
  const double x0 = box.cx - box.w / 2.0;
  const double y0 = box.cy - box.h / 2.0;
  const double sx = box.w / static_cast<double>(kPatchSide);
  const double sy = box.h / static_cast<double>(kPatchSide);

  const auto pixel = [&](std::size_t ci, std::ptrdiff_t y, std::ptrdiff_t x) {
    if (y < 0 || y >= ih || x < 0 || x >= iw) return 0.0;
    return image.at(ci, static_cast<std::size_t>(y),
                    static_cast<std::size_t>(x));
  };

  Tensor patch({c, kPatchSide, kPatchSide});
  for (std::size_t v = 0; v < kPatchSide; ++v) {
    const double src_y = y0 + (static_cast<double>(v) + 0.5) * sy - 0.5;
    const auto fy = static_cast<std::ptrdiff_t>(std::floor(src_y));
    const double wy = src_y - static_cast<double>(fy);
    for (std::size_t u = 0; u < kPatchSide; ++u) {
      const double src_x = x0 + (static_cast<double>(u) + 0.5) * sx - 0.5;
      const auto fx = static_cast<std::ptrdiff_t>(std::floor(src_x));
      const double wx = src_x - static_cast<double>(fx);
      for (std::size_t ci = 0; ci < c; ++ci) {
        const double top = (1.0 - wx) * pixel(ci, fy, fx) + wx * pixel(ci, fy, fx + 1);
        const double bot =
            (1.0 - wx) * pixel(ci, fy + 1, fx) + wx * pixel(ci, fy + 1, fx + 1);
        patch.at(ci, v, u) = (1.0 - wy) * top + wy * bot;
      }
    }
  }
  return patch;
}

// --- synthetic scenes -----------------------------------------------------------

enum class NegativeMode : std::uint8_t {
  averted_one = 0,   // one head looks at the other, the other looks away
  averted_both = 1,  // both look away from each other
  parallel = 2,      // both look in the same direction (hard negative)
};

inline const char* to_string(NegativeMode m) {
  switch (m) {
    case NegativeMode::averted_one: return "averted_one";
    case NegativeMode::averted_both: return "averted_both";
    case NegativeMode::parallel: return "parallel";
  }
  return "?";
}

inline NegativeMode negative_mode_from_string(const std::string& s) {
  if (s == "averted_one") return NegativeMode::averted_one;
  if (s == "averted_both") return NegativeMode::averted_both;
  if (s == "parallel") return NegativeMode::parallel;
  throw ConfigError("unknown negative mode '" + s + "'");
}

struct SyntheticSceneConfig {
  double depth_min = 1.0;       // meters
  double depth_max = 8.0;       // meters
  double head_radius = 0.12;    // meters
  double fov_deg = 53.0;
  double mutual_angle_deg = 10.0;  // positive pairs align within this angle
  std::vector<NegativeMode> negative_modes = {NegativeMode::averted_one,
                                              NegativeMode::averted_both,
                                              NegativeMode::parallel};
  double pixel_noise = 0.02;    // additive uniform noise amplitude
  std::uint64_t seed = 0;
  std::size_t image_width = 640;
  std::size_t image_height = 480;
  std::size_t channels = 1;

  void validate() const {
    if (!(depth_min > 0.0 && depth_min < depth_max)) {
      throw ConfigError("depth range must satisfy 0 < min < max");
    }
    if (!(mutual_angle_deg > 0.0 && mutual_angle_deg < 45.0)) {
      throw ConfigError("mutual_angle_deg must be in (0, 45)");
    }
    if (head_radius <= 0.0) throw ConfigError("head_radius must be positive");
    if (negative_modes.empty()) {
      throw ConfigError("at least one negative mode is required");
    }
    if (image_width < 64 || image_height < 64) {
      throw ConfigError("synthetic image dims must be at least 64x64");
    }
    if (channels != 1 && channels != 3) {
      throw ConfigError("synthetic channels must be 1 or 3");
    }
    focal_from_fov(ImageDims{image_width, image_height}, fov_deg);  // range check
  }
};

/// Uniform direction on the unit sphere.
inline Vec3 random_unit_vector(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double a = rng.uniform(0.0, 2.0 * M_PI);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(a), r * std::sin(a), z};
}

/// Rotates dir by an angle < max_angle_rad about a random orthogonal axis.
inline Vec3 perturb_direction(const Vec3& dir, double max_angle_rad, Rng& rng) {
  if (max_angle_rad <= 0.0) return dir;
  // Orthonormal basis around dir.
  const Vec3 helper = std::abs(dir[0]) < 0.9 ? Vec3{1.0, 0.0, 0.0}
                                             : Vec3{0.0, 1.0, 0.0};
  const Vec3 e1 = normalized(cross(dir, helper));
  const Vec3 e2 = cross(dir, e1);
  const double ang = max_angle_rad * 0.98 * std::sqrt(rng.uniform());
  const double az = rng.uniform(0.0, 2.0 * M_PI);
  const Vec3 axis = std::cos(az) * e1 + std::sin(az) * e2;
  return normalized(std::cos(ang) * dir + std::sin(ang) * axis);
}

/// Draws a unit vector at least min_angle_rad away from every reference.
inline Vec3 sample_direction_away(const std::vector<Vec3>& refs,
                                  double min_angle_rad, Rng& rng) {
  for (int attempt = 0; attempt < 256; ++attempt) {
    const Vec3 g = random_unit_vector(rng);
    bool ok = true;
    for (const Vec3& r : refs) {
      if (angle_between(g, r) <= min_angle_rad) {
        ok = false;
        break;
      }
    }
    if (ok) return g;
  }
  // Construct a vector orthogonal to the first reference (90 degrees away
  // from all +-refs; min_angle_rad is always < pi/2 here).
  const Vec3& r = refs.front();
  const Vec3 helper =
      std::abs(r[0]) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
  return normalized(cross(r, helper));
}

/// Renders a parametric head patch whose appearance encodes the 3D gaze:
/// a lateral shading ramp and an iris-like marker encode the (x, y) gaze
/// components, and the overall face brightness encodes the z component
/// (bright when looking toward the camera at z = -1, dark when looking
/// away). The gaze -> patch map is injective over the unit sphere up to
/// pixel quantization. box_size_px only softens the disc edge, imitating
/// the lower source resolution of distant heads.
inline Tensor synth_render_head(const Vec3& gaze, double box_size_px,
                                double pixel_noise, std::size_t channels,
                                Rng& rng) {
  const double r_disc = 24.0;
  const double center = (static_cast<double>(kPatchSide) - 1.0) / 2.0;
  const double soft =
      std::clamp(80.0 / std::max(box_size_px, 8.0), 0.9, 3.0);
  const double face_level = 0.45 + 0.25 * (-gaze[2]);
  const double marker_cx = center + 0.55 * r_disc * gaze[0];
  const double marker_cy = center + 0.55 * r_disc * gaze[1];
  const double marker_sigma2 = 2.0 * 2.5 * 2.5;

  Tensor patch({channels, kPatchSide, kPatchSide});
  for (std::size_t y = 0; y < kPatchSide; ++y) {
    for (std::size_t x = 0; x < kPatchSide; ++x) {
      const double dx = static_cast<double>(x) - center;
      const double dy = static_cast<double>(y) - center;
      const double rd = std::sqrt(dx * dx + dy * dy);
      const double background =
          0.10 + 0.05 * static_cast<double>(y) /
                     static_cast<double>(kPatchSide - 1);
      const double mask = 1.0 / (1.0 + std::exp((rd - r_disc) / soft));
      const double shade =
          0.18 * (dx * gaze[0] + dy * gaze[1]) / r_disc;
      const double mx = static_cast<double>(x) - marker_cx;
      const double my = static_cast<double>(y) - marker_cy;
      const double marker =
          0.35 * std::exp(-(mx * mx + my * my) / marker_sigma2);
      const double head = std::clamp(face_level + shade + marker, 0.0, 1.0);
      const double value = background * (1.0 - mask) + head * mask;
      for (std::size_t c = 0; c < channels; ++c) {
        const double tint = 1.0 - 0.06 * static_cast<double>(c);
        patch.at(c, y, x) = std::clamp(value * tint, 0.0, 1.0);
      }
    }
  }
  if (pixel_noise > 0.0) {
    for (double& v : patch.data) {
      v = std::clamp(v + rng.uniform(-pixel_noise, pixel_noise), 0.0, 1.0);
    }
  }
  return patch;
}

namespace detail {

struct Placement {
  Vec3 position;  // camera frame, z forward
  HeadBox box;
};

/// Samples two heads inside the viewing frustum with non-overlapping boxes.
inline std::pair<Placement, Placement> place_heads(
    const SyntheticSceneConfig& cfg, const CameraIntrinsics& cam, Rng& rng) {
  const double w = static_cast<double>(cfg.image_width);
  const double h = static_cast<double>(cfg.image_height);
  const auto sample_one = [&]() {
    const double z = rng.uniform(cfg.depth_min, cfg.depth_max);
    const double side = 2.0 * cfg.head_radius * cam.focal_px / z;
    const double margin = side / 2.0 + 2.0;
    Placement p;
    p.box.w = side;
    p.box.h = side;
    p.box.cx = rng.uniform(margin, w - margin);
    p.box.cy = rng.uniform(margin, h - margin);
    p.position = {(p.box.cx - w / 2.0) * z / cam.focal_px,
                  (p.box.cy - h / 2.0) * z / cam.focal_px, z};
    return p;
  };
  for (int attempt = 0; attempt < 100; ++attempt) {
    Placement a = sample_one();
    Placement b = sample_one();
    const Vec3 d = b.position - a.position;
    const double px_dist = std::hypot(b.box.cx - a.box.cx, b.box.cy - a.box.cy);
    if (norm(d) >= 4.0 * cfg.head_radius && px_dist >= 4.0) {
      return {a, b};
    }
  }
  throw RetryExhausted("could not place two heads in the frustum");
}

}  // namespace detail

/// Generates one scene with the requested label. Positive pairs look at each
/// other within mutual_angle_deg; negative pairs are constructed so at least
/// one gaze deviates by more than twice that angle from the mutual direction.
inline PairSample synth_generate_labeled(const SyntheticSceneConfig& cfg,
                                         int label, Rng& rng) {
  cfg.validate();
  const ImageDims dims{cfg.image_width, cfg.image_height};
  const CameraIntrinsics cam = focal_from_fov(dims, cfg.fov_deg);
  auto [h1, h2] = detail::place_heads(cfg, cam, rng);

  const Vec3 d12 = normalized(h2.position - h1.position);
  const Vec3 d21 = -d12;
  const double theta = cfg.mutual_angle_deg * M_PI / 180.0;

  Vec3 g1, g2;
  if (label == 1) {
    g1 = perturb_direction(d12, theta, rng);
    g2 = perturb_direction(d21, theta, rng);
  } else {
    const NegativeMode mode =
        cfg.negative_modes[rng.uniform_index(cfg.negative_modes.size())];
    switch (mode) {
      case NegativeMode::averted_one: {
        const bool first_looks = rng.bernoulli(0.5);
        if (first_looks) {
          g1 = perturb_direction(d12, theta, rng);
          g2 = sample_direction_away({d21}, 2.05 * theta, rng);
        } else {
          g1 = sample_direction_away({d12}, 2.05 * theta, rng);
          g2 = perturb_direction(d21, theta, rng);
        }
        break;
      }
      case NegativeMode::averted_both: {
        g1 = sample_direction_away({d12}, 2.05 * theta, rng);
        g2 = sample_direction_away({d21}, 2.05 * theta, rng);
        break;
      }
      case NegativeMode::parallel: {
        const Vec3 shared = sample_direction_away({d12, d21}, 2.3 * theta, rng);
        g1 = perturb_direction(shared, 0.2 * theta, rng);
        g2 = perturb_direction(shared, 0.2 * theta, rng);
        break;
      }
    }
  }

  PairSample s;
  s.dims = dims;
  s.label = label;
  s.box1 = h1.box;
  s.box2 = h2.box;
  s.true_gaze1 = g1;
  s.true_gaze2 = g2;
  s.patch1 = synth_render_head(g1, h1.box.w, cfg.pixel_noise, cfg.channels, rng);
  s.patch2 = synth_render_head(g2, h2.box.w, cfg.pixel_noise, cfg.channels, rng);
  canonicalize_order(s);
  return s;
}

/// Generates one scene with a coin-flip label.
inline PairSample synth_generate_scene(const SyntheticSceneConfig& cfg,
                                       Rng& rng) {
  const int label = rng.bernoulli(0.5) ? 1 : 0;
  return synth_generate_labeled(cfg, label, rng);
}

struct Dataset {
  std::vector<PairSample> samples;
  ImageDims dims{};
  std::size_t channels = 1;
  double fov_deg = 53.0;

  std::size_t positives() const {
    std::size_t n = 0;
    for (const PairSample& s : samples) n += static_cast<std::size_t>(s.label);
    return n;
  }
};

/// Reproducible dataset with exact class counts: round(positive_fraction * n)
/// positives. Sample order is a seeded permutation of the generation order.
inline Dataset synth_make_dataset(const SyntheticSceneConfig& cfg,
                                  std::size_t n_pairs,
                                  double positive_fraction) {
  if (n_pairs == 0) throw ConfigError("n_pairs must be positive");
  if (positive_fraction < 0.0 || positive_fraction > 1.0) {
    throw ConfigError("positive_fraction must be in [0, 1]");
  }
  cfg.validate();
  Dataset ds;
  ds.dims = ImageDims{cfg.image_width, cfg.image_height};
  ds.channels = cfg.channels;
  ds.fov_deg = cfg.fov_deg;
  Rng rng(cfg.seed);
  const auto n_pos = static_cast<std::size_t>(
      std::llround(positive_fraction * static_cast<double>(n_pairs)));
  ds.samples.reserve(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    ds.samples.push_back(synth_generate_labeled(cfg, i < n_pos ? 1 : 0, rng));
  }
  rng.shuffle(ds.samples);
  return ds;
}

struct SplitDataset {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Splits by a seeded index permutation into disjoint parts covering the
/// whole dataset. Fractions must sum to 1.
inline std::vector<Dataset> split_dataset(const Dataset& ds,
                                          const std::vector<double>& fractions,
                                          std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw ConfigError("split fractions must be nonnegative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  std::vector<std::size_t> order(ds.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<Dataset> parts(fractions.size());
  const auto n = static_cast<double>(ds.samples.size());
  double cum = 0.0;
  std::size_t begin = 0;
  for (std::size_t p = 0; p < fractions.size(); ++p) {
    cum += fractions[p];
    const auto end = (p + 1 == fractions.size())
                         ? ds.samples.size()
                         : static_cast<std::size_t>(std::llround(cum * n));
    parts[p].dims = ds.dims;
    parts[p].channels = ds.channels;
    parts[p].fov_deg = ds.fov_deg;
    for (std::size_t i = begin; i < end; ++i) {
      parts[p].samples.push_back(ds.samples[order[i]]);
    }
    begin = end;
  }
  return parts;
}

inline SplitDataset make_split(const Dataset& ds, double train_frac,
                               double val_frac, double test_frac,
                               std::uint64_t seed) {
  auto parts = split_dataset(ds, {train_frac, val_frac, test_frac}, seed);
  return SplitDataset{std::move(parts[0]), std::move(parts[1]),
                      std::move(parts[2])};
}

/// Deterministic training subsample of floor(fraction * n) samples.
inline Dataset subsample_dataset(const Dataset& ds, double fraction,
                                 std::uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0) {
    throw ConfigError("subsample fraction must be in (0, 1]");
  }
  if (fraction == 1.0) return ds;  // full fraction reproduces the input run
  std::vector<std::size_t> order(ds.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const auto keep = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(ds.samples.size())));
  Dataset out;
  out.dims = ds.dims;
  out.channels = ds.channels;
  out.fov_deg = ds.fov_deg;
  for (std::size_t i = 0; i < keep; ++i) {
    out.samples.push_back(ds.samples[order[i]]);
  }
  return out;
}

}  // namespace mugaze::data
