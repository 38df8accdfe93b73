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

#include "mugaze/geometry.hpp"
#include "mugaze/rng.hpp"

using namespace mugaze;

namespace {

HeadBox random_box(Rng& rng, const ImageDims& dims) {
  HeadBox b;
  b.w = rng.uniform(5.0, 120.0);
  b.h = rng.uniform(5.0, 120.0);
  b.cx = rng.uniform(0.0, static_cast<double>(dims.width));
  b.cy = rng.uniform(0.0, static_cast<double>(dims.height));
  return b;
}

}  // namespace

TEST(FocalFromFov, MatchesDirectEvaluation) {
  // f = max(w,h)/2 * cot(fov/2); evaluated here with the cot identity.
  const CameraIntrinsics cam = focal_from_fov({1920, 1080}, 53.0);
  const double expected = 960.0 / std::tan(53.0 * M_PI / 360.0);
  EXPECT_NEAR(cam.focal_px, expected, 1e-9);
  EXPECT_NEAR(cam.focal_px, 1925.45, 0.05);
}

TEST(FocalFromFov, NinetyDegreesIsHalfSide) {
  EXPECT_NEAR(focal_from_fov({100, 100}, 90.0).focal_px, 50.0, 1e-12);
}

TEST(FocalFromFov, FiftyThreeDegreesApproximatesMaxSide) {
  const CameraIntrinsics cam = focal_from_fov({200, 100}, 53.0);
  EXPECT_NEAR(cam.focal_px, 200.56, 0.01);
  EXPECT_LT(std::abs(cam.focal_px - 200.0) / 200.0, 0.004);
}

TEST(FocalFromFov, RejectsOutOfRange) {
  EXPECT_THROW(focal_from_fov({100, 100}, 0.0), OutOfRangeFov);
  EXPECT_THROW(focal_from_fov({100, 100}, 180.0), OutOfRangeFov);
  EXPECT_THROW(focal_from_fov({100, 100}, -10.0), OutOfRangeFov);
}

TEST(SpatialEncoding2d, DividesByMaxSide) {
  const HeadBox b1{50.0, 50.0, 20.0, 20.0};
  const HeadBox b2{100.0, 60.0, 10.0, 30.0};
  const auto enc = spatial_encoding_2d(b1, b2, {200, 100});
  EXPECT_DOUBLE_EQ(enc[0], 0.25);
  EXPECT_DOUBLE_EQ(enc[1], 0.25);
  EXPECT_DOUBLE_EQ(enc[2], 0.10);
  EXPECT_DOUBLE_EQ(enc[3], 0.10);
}

TEST(SpatialEncoding2d, IdenticalBoxesGiveIdenticalHalves) {
  const HeadBox b{77.0, 31.0, 12.0, 9.0};
  const auto enc = spatial_encoding_2d(b, b, {320, 240});
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(enc[i], enc[i + 4]);
}

TEST(SpatialEncoding2d, BoundaryBox) {
  const HeadBox b{200.0, 100.0, 40.0, 60.0};
  const auto enc = spatial_encoding_2d(b, b, {200, 100});
  EXPECT_DOUBLE_EQ(enc[0], 1.0);
  EXPECT_DOUBLE_EQ(enc[1], 0.5);
  EXPECT_DOUBLE_EQ(enc[2], 0.2);
  EXPECT_DOUBLE_EQ(enc[3], 0.3);
}

TEST(RelativeDirection3d, HandComputedExample) {
  const ImageDims dims{200, 100};
  const CameraIntrinsics cam{200.0, 53.0};
  const HeadBox b1{50.0, 50.0, 20.0, 20.0};
  const HeadBox b2{150.0, 50.0, 20.0, 20.0};
  const Vec3 v = relative_direction_3d(b1, b2, dims, cam);
  EXPECT_NEAR(v[0], 1.0, 1e-12);
  EXPECT_NEAR(v[1], 0.0, 1e-12);
  EXPECT_NEAR(v[2], 0.0, 1e-12);

  const Vec3 swapped = relative_direction_3d(b2, b1, dims, cam);
  EXPECT_NEAR(swapped[0], -1.0, 1e-12);
}

TEST(RelativeDirection3d, DegenerateThrows) {
  const HeadBox b{50.0, 50.0, 20.0, 20.0};
  EXPECT_THROW(
      relative_direction_3d(b, b, {200, 100}, CameraIntrinsics{200.0, 53.0}),
      DegenerateGeometry);
}

TEST(RelativeDirection3d, DepthOrderingSign) {
  // Matched scaled centers with A2 > A1: head 2 is nearer, v = (0,0,-1).
  const ImageDims dims{400, 400};
  const CameraIntrinsics cam = focal_from_fov(dims, 53.0);
  const HeadBox b1{200.0 + 10.0, 200.0 + 20.0, 10.0, 10.0};
  const HeadBox b2{200.0 + 20.0, 200.0 + 40.0, 20.0, 20.0};
  const Vec3 v = relative_direction_3d(b1, b2, dims, cam);
  EXPECT_NEAR(v[0], 0.0, 1e-12);
  EXPECT_NEAR(v[1], 0.0, 1e-12);
  EXPECT_NEAR(v[2], -1.0, 1e-12);
}

TEST(RelativeDirection3d, RandomizedProperties) {
  const ImageDims dims{640, 480};
  const CameraIntrinsics cam = focal_from_fov(dims, 53.0);
  Rng rng(202601);
  for (int i = 0; i < 5000; ++i) {
    const HeadBox b1 = random_box(rng, dims);
    const HeadBox b2 = random_box(rng, dims);
    Vec3 v;
    try {
      v = relative_direction_3d(b1, b2, dims, cam);
    } catch (const DegenerateGeometry&) {
      continue;
    }
    EXPECT_NEAR(norm(v), 1.0, 1e-9);

    const Vec3 w = relative_direction_3d(b2, b1, dims, cam);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(v[k], -w[k], 1e-12);

    // Horizontal flip negates only the x component.
    HeadBox f1 = b1, f2 = b2;
    f1.cx = static_cast<double>(dims.width) - b1.cx;
    f2.cx = static_cast<double>(dims.width) - b2.cx;
    const Vec3 vf = relative_direction_3d(f1, f2, dims, cam);
    EXPECT_NEAR(vf[0], -v[0], 1e-9);
    EXPECT_NEAR(vf[1], v[1], 1e-9);
    EXPECT_NEAR(vf[2], v[2], 1e-9);

    // Joint rescaling of dims, focal and boxes leaves the direction alone.
    const double s = static_cast<double>(2 + rng.uniform_index(4));
    const ImageDims sdims{
        static_cast<std::size_t>(dims.width * static_cast<std::size_t>(s)),
        static_cast<std::size_t>(dims.height * static_cast<std::size_t>(s))};
    const CameraIntrinsics scam = focal_from_fov(sdims, cam.fov_deg);
    HeadBox s1{b1.cx * s, b1.cy * s, b1.w * s, b1.h * s};
    HeadBox s2{b2.cx * s, b2.cy * s, b2.w * s, b2.h * s};
    const Vec3 vs = relative_direction_3d(s1, s2, sdims, scam);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(vs[k], v[k], 1e-9);
  }
}

TEST(PseudoGazeLabels, Definition) {
  const auto labels = pseudo_gaze_labels({1.0, 0.0, 0.0});
  EXPECT_EQ(labels.g1, (Vec3{1.0, 0.0, 0.0}));
  EXPECT_EQ(labels.g2, (Vec3{-1.0, 0.0, 0.0}));

  EXPECT_EQ(pseudo_gaze_labels({0.0, 0.0, 1.0}).g2, (Vec3{0.0, 0.0, -1.0}));

  const auto diag = pseudo_gaze_labels({0.6, 0.8, 0.0});
  EXPECT_EQ(diag.g1, (Vec3{0.6, 0.8, 0.0}));
  EXPECT_EQ(diag.g2, (Vec3{-0.6, -0.8, 0.0}));
}

TEST(PseudoGazeLabels, ExactCancellation) {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    Vec3 v{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
           rng.uniform(-1.0, 1.0)};
    if (norm(v) < 1e-6) continue;
    v = normalized(v);
    const auto labels = pseudo_gaze_labels(v);
    for (int k = 0; k < 3; ++k) {
      EXPECT_EQ(labels.g1[k] + labels.g2[k], 0.0);
    }
  }
}

TEST(PseudoGazeLabels, RejectsNonUnit) {
  EXPECT_THROW(pseudo_gaze_labels({0.5, 0.0, 0.0}), NotUnit);
}

TEST(SpatialEncodingFull, ComposesBothParts) {
  const ImageDims dims{200, 100};
  const CameraIntrinsics cam{200.0, 53.0};
  const HeadBox b1{50.0, 50.0, 20.0, 20.0};
  const HeadBox b2{150.0, 50.0, 20.0, 20.0};
  const SpatialEncoding enc = spatial_encoding(b1, b2, dims, cam);
  EXPECT_NEAR(enc.dir3d[0], 1.0, 1e-12);
  EXPECT_NEAR(enc.dir3d[1], 0.0, 1e-12);
  EXPECT_NEAR(enc.dir3d[2], 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(enc.enc2d[0], 0.25);
  EXPECT_THROW(spatial_encoding(b1, b1, dims, cam), DegenerateGeometry);
}

TEST(SpatialEncodingLenient, DegenerateGivesZeroDirection) {
  const HeadBox b{50.0, 50.0, 20.0, 20.0};
  const SpatialEncoding enc =
      spatial_encoding_lenient(b, b, {200, 100}, CameraIntrinsics{200.0, 53.0});
  EXPECT_EQ(enc.dir3d, (Vec3{0.0, 0.0, 0.0}));
}

TEST(CanonicalOrder, LexicographicWithAreaTieBreak) {
  EXPECT_TRUE(boxes_in_canonical_order({10, 10, 5, 5}, {20, 10, 5, 5}));
  EXPECT_FALSE(boxes_in_canonical_order({20, 10, 5, 5}, {10, 10, 5, 5}));
  EXPECT_TRUE(boxes_in_canonical_order({10, 10, 5, 5}, {10, 20, 5, 5}));
  EXPECT_TRUE(boxes_in_canonical_order({10, 10, 4, 4}, {10, 10, 5, 5}));
  EXPECT_FALSE(boxes_in_canonical_order({10, 10, 6, 6}, {10, 10, 5, 5}));
}
