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
#include <array>
#include <cmath>
#include <string>

#include "mugaze/errors.hpp"

namespace mugaze {

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 operator-(const Vec3& a) { return {-a[0], -a[1], -a[2]}; }

inline Vec3 operator+(const Vec3& a, const Vec3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

inline Vec3 operator-(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline Vec3 operator*(double s, const Vec3& a) {
  return {s * a[0], s * a[1], s * a[2]};
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

inline Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  return {a[0] / n, a[1] / n, a[2] / n};
}

/// Angle between two vectors in radians.
inline double angle_between(const Vec3& a, const Vec3& b) {
  const double c = dot(a, b) / (norm(a) * norm(b));
  return std::acos(std::clamp(c, -1.0, 1.0));
}

/// Image size in pixels.
struct ImageDims {
  std::size_t width = 0;
  std::size_t height = 0;

  std::size_t max_side() const { return std::max(width, height); }
};

/// 2D head bounding box given by its center and size, pixel units,
/// origin at the image top-left corner. Width and height must be positive.
struct HeadBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  bool valid() const { return w > 0.0 && h > 0.0; }
};

/// Pinhole camera described by its focal length in pixels. The principal
/// point is assumed to sit at the exact image center; there is no
/// principal-point offset parameter.
struct CameraIntrinsics {
  double focal_px = 0.0;
  double fov_deg = 0.0;
};

/// 11-dim spatial feature of a head pair: 8 normalized 2D box values and the
/// unit relative 3D direction between the heads.
struct SpatialEncoding {
  std::array<double, 8> enc2d{};
  Vec3 dir3d{};
};

/// Surrogate 3D gaze targets for a positive pair: g2 is exactly -g1.
struct PseudoGazeLabels {
  Vec3 g1{};
  Vec3 g2{};
};

/// Focal length from a horizontal field of view:
/// f = max(width, height) / 2 * cot(fov / 2).
inline CameraIntrinsics focal_from_fov(const ImageDims& dims, double fov_deg) {
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) {
    throw OutOfRangeFov("fov_deg must be in (0, 180), got " +
                        std::to_string(fov_deg));
  }
  const double half_rad = fov_deg * M_PI / 360.0;
  const double focal =
      static_cast<double>(dims.max_side()) / 2.0 / std::tan(half_rad);
  return CameraIntrinsics{focal, fov_deg};
}

/// Normalized 2D box features [cx1, cy1, w1, h1, cx2, cy2, w2, h2], each
/// divided by max(width, height). Centers keep the top-left image origin so
/// every component is nonnegative for boxes inside the image.
inline std::array<double, 8> spatial_encoding_2d(const HeadBox& b1,
                                                 const HeadBox& b2,
                                                 const ImageDims& dims) {
  const double m = static_cast<double>(dims.max_side());
  return {b1.cx / m, b1.cy / m, b1.w / m, b1.h / m,
          b2.cx / m, b2.cy / m, b2.w / m, b2.h / m};
}

/// Unnormalized relative 3D direction between the two head centers, using
/// image-center-origin coordinates and inverse-sqrt-area depths. The depth
/// proportionality constant cancels out of the direction and never appears.
inline Vec3 relative_direction_raw(const HeadBox& b1, const HeadBox& b2,
                                   const ImageDims& dims,
                                   const CameraIntrinsics& cam) {
  const double x1 = b1.cx - static_cast<double>(dims.width) / 2.0;
  const double y1 = b1.cy - static_cast<double>(dims.height) / 2.0;
  const double x2 = b2.cx - static_cast<double>(dims.width) / 2.0;
  const double y2 = b2.cy - static_cast<double>(dims.height) / 2.0;
  const double s1 = std::sqrt(b1.area());
  const double s2 = std::sqrt(b2.area());
  const double f = cam.focal_px;
  return {(x2 / s2 - x1 / s1) / f, (y2 / s2 - y1 / s1) / f,
          1.0 / s2 - 1.0 / s1};
}

constexpr double kDegenerateNormThreshold = 1e-12;

/// Unit direction of the relative 3D head position vector (head 1 -> head 2).
/// Throws DegenerateGeometry when the relative vector is numerically zero
/// (identical scaled centers and areas).
inline Vec3 relative_direction_3d(const HeadBox& b1, const HeadBox& b2,
                                  const ImageDims& dims,
                                  const CameraIntrinsics& cam) {
  const Vec3 raw = relative_direction_raw(b1, b2, dims, cam);
  const double n = norm(raw);
  if (n < kDegenerateNormThreshold) {
    throw DegenerateGeometry("relative direction undefined for this pair");
  }
  return {raw[0] / n, raw[1] / n, raw[2] / n};
}

/// Pseudo 3D gaze targets for a positive pair: head 1 looks along v, head 2
/// along -v.
inline PseudoGazeLabels pseudo_gaze_labels(const Vec3& v) {
  const double n = norm(v);
  if (std::abs(n - 1.0) > 1e-9) {
    throw NotUnit("pseudo gaze source vector must be unit length");
  }
  return PseudoGazeLabels{v, -v};
}

/// Full 11-dim spatial encoding of a head pair.
inline SpatialEncoding spatial_encoding(const HeadBox& b1, const HeadBox& b2,
                                        const ImageDims& dims,
                                        const CameraIntrinsics& cam) {
  SpatialEncoding enc;
  enc.enc2d = spatial_encoding_2d(b1, b2, dims);
  enc.dir3d = relative_direction_3d(b1, b2, dims, cam);
  return enc;
}

/// Inference-tolerant variant: degenerate pairs yield a zero dir3d instead of
/// an error, so overlapping detections still produce a score.
inline SpatialEncoding spatial_encoding_lenient(const HeadBox& b1,
                                                const HeadBox& b2,
                                                const ImageDims& dims,
                                                const CameraIntrinsics& cam) {
  SpatialEncoding enc;
  enc.enc2d = spatial_encoding_2d(b1, b2, dims);
  const Vec3 raw = relative_direction_raw(b1, b2, dims, cam);
  const double n = norm(raw);
  enc.dir3d = (n < kDegenerateNormThreshold) ? Vec3{0.0, 0.0, 0.0}
                                             : Vec3{raw[0] / n, raw[1] / n,
                                                    raw[2] / n};
  return enc;
}

/// Deterministic head ordering: the first head is the one with the
/// lexicographically smaller (cx, cy) center; ties break on smaller area.
inline bool boxes_in_canonical_order(const HeadBox& b1, const HeadBox& b2) {
  if (b1.cx != b2.cx) return b1.cx < b2.cx;
  if (b1.cy != b2.cy) return b1.cy < b2.cy;
  return b1.area() <= b2.area();
}

}  // namespace mugaze
