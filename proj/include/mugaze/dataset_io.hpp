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

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mugaze/data.hpp"
#include "mugaze/errors.hpp"
#include "mugaze/geometry.hpp"

// On-disk dataset layout (all paths relative to the dataset directory):
//   manifest.json      counts, dims, channels, fov and file names
//   annotations.jsonl  one pair per line:
//     {"image": "synthetic:<id>" | <relative path>, "width": int,
//      "height": int, "box1": [cx, cy, w, h], "box2": [cx, cy, w, h],
//      "label": 0|1, "gaze1": [x, y, z] (optional), "gaze2": ... (optional)}
//   patches.bin        sidecar patch container for synthetic records:
//     magic "MGZPATS1", u32 version, u64 pair count, u32 channels,
//     u32 height, u32 width, then f32 row-major values for patch pairs in
//     record order (record i owns patches 2i and 2i+1).

namespace mugaze::data {

struct AnnotationRecord {
  std::string image;
  ImageDims dims;
  HeadBox box1;
  HeadBox box2;
  int label = 0;
  std::optional<Vec3> gaze1;
  std::optional<Vec3> gaze2;
  std::size_t record_index = 0;  // position in the annotation file
  bool swapped = false;          // heads were reordered at load time
};

inline bool is_synthetic_image(const std::string& image) {
  return image.rfind("synthetic:", 0) == 0;
}

namespace detail {

inline HeadBox parse_box(const nlohmann::json& j, const char* key,
                         std::size_t line_no) {
  if (!j.is_array() || j.size() != 4) {
    throw ParseError("line " + std::to_string(line_no) + ": " + key +
                     " must be [cx, cy, w, h]");
  }
  HeadBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
            j[3].get<double>()};
  if (!b.valid()) {
    throw ParseError("line " + std::to_string(line_no) + ": " + key +
                     " must have positive size");
  }
  return b;
}

inline std::optional<Vec3> parse_gaze(const nlohmann::json& j, const char* key,
                                      std::size_t line_no) {
  if (!j.contains(key)) return std::nullopt;
  const auto& g = j.at(key);
  if (!g.is_array() || g.size() != 3) {
    throw ParseError("line " + std::to_string(line_no) + ": " + key +
                     " must be a 3-vector");
  }
  return Vec3{g[0].get<double>(), g[1].get<double>(), g[2].get<double>()};
}

}  // namespace detail

/// Parses a JSONL annotation file. Head order is normalized to the canonical
/// rule; positive records with degenerate pair geometry are skipped with a
/// log line rather than failing the load. For non-synthetic records the
/// referenced image file must exist under root.
inline std::vector<AnnotationRecord> load_annotations(
    const std::filesystem::path& path,
    const std::filesystem::path& root = {}) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open annotation file " + path.string());
  std::vector<AnnotationRecord> records;
  std::string line;
  std::size_t line_no = 0;
  std::size_t record_index = 0;
  std::size_t skipped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    AnnotationRecord rec;
    rec.record_index = record_index++;
    try {
      rec.image = j.at("image").get<std::string>();
      const auto w = j.at("width").get<long long>();
      const auto h = j.at("height").get<long long>();
      if (w <= 0 || h <= 0) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": width/height must be positive");
      }
      rec.dims = ImageDims{static_cast<std::size_t>(w),
                           static_cast<std::size_t>(h)};
      rec.box1 = detail::parse_box(j.at("box1"), "box1", line_no);
      rec.box2 = detail::parse_box(j.at("box2"), "box2", line_no);
      const auto label = j.at("label").get<long long>();
      if (label != 0 && label != 1) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": label must be 0 or 1");
      }
      rec.label = static_cast<int>(label);
      rec.gaze1 = detail::parse_gaze(j, "gaze1", line_no);
      rec.gaze2 = detail::parse_gaze(j, "gaze2", line_no);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }

    if (!is_synthetic_image(rec.image)) {
      const std::filesystem::path img =
          root.empty() ? std::filesystem::path(rec.image) : root / rec.image;
      if (!std::filesystem::exists(img)) {
        throw MissingImage("line " + std::to_string(line_no) +
                           ": image not found: " + img.string());
      }
    }

    if (!boxes_in_canonical_order(rec.box1, rec.box2)) {
      std::swap(rec.box1, rec.box2);
      std::swap(rec.gaze1, rec.gaze2);
      rec.swapped = true;
    }

    if (rec.label == 1) {
      const CameraIntrinsics cam = focal_from_fov(rec.dims, 53.0);
      const Vec3 raw = relative_direction_raw(rec.box1, rec.box2, rec.dims, cam);
      if (norm(raw) < kDegenerateNormThreshold) {
        std::cerr << "load_annotations: skipping degenerate positive at line "
                  << line_no << "\n";
        ++skipped;
        continue;
      }
    }
    records.push_back(std::move(rec));
  }
  if (skipped > 0) {
    std::cerr << "load_annotations: skipped " << skipped
              << " degenerate positive record(s)\n";
  }
  return records;
}

// --- sidecar patch container -------------------------------------------------

constexpr char kPatchMagic[8] = {'M', 'G', 'Z', 'P', 'A', 'T', 'S', '1'};
constexpr std::uint32_t kPatchVersion = 1;

inline void save_patches(const std::filesystem::path& path,
                         const Dataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open patch file for writing: " + path.string());
  os.write(kPatchMagic, sizeof(kPatchMagic));
  const std::uint32_t version = kPatchVersion;
  const std::uint64_t count = ds.samples.size();
  const std::uint32_t channels = static_cast<std::uint32_t>(ds.channels);
  const std::uint32_t side = static_cast<std::uint32_t>(kPatchSide);
  os.write(reinterpret_cast<const char*>(&version), sizeof(version));
  os.write(reinterpret_cast<const char*>(&count), sizeof(count));
  os.write(reinterpret_cast<const char*>(&channels), sizeof(channels));
  os.write(reinterpret_cast<const char*>(&side), sizeof(side));
  os.write(reinterpret_cast<const char*>(&side), sizeof(side));
  std::vector<float> buf;
  const auto dump = [&](const Tensor& t) {
    buf.resize(t.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      buf[i] = static_cast<float>(t.data[i]);
    }
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  };
  for (const PairSample& s : ds.samples) {
    dump(s.patch1);
    dump(s.patch2);
  }
  if (!os) throw ParseError("failed writing patch file " + path.string());
}

struct PatchFile {
  std::uint64_t count = 0;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;

  Tensor patch(std::uint64_t pair_index, int which) const {
    const std::size_t patch_elems = channels * height * width;
    const std::size_t offset =
        (2 * pair_index + static_cast<std::size_t>(which)) * patch_elems;
    if (offset + patch_elems > values.size()) {
      throw ParseError("patch index out of range");
    }
    Tensor t({channels, height, width});
    for (std::size_t i = 0; i < patch_elems; ++i) {
      t.data[i] = static_cast<double>(values[offset + i]);
    }
    return t;
  }
};

inline PatchFile load_patches(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open patch file " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kPatchMagic, sizeof(kPatchMagic)) != 0) {
    throw ParseError("not a mugaze patch container: " + path.string());
  }
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kPatchVersion) {
    throw ParseError("unsupported patch container version");
  }
  PatchFile pf;
  std::uint32_t channels = 0, height = 0, width = 0;
  is.read(reinterpret_cast<char*>(&pf.count), sizeof(pf.count));
  is.read(reinterpret_cast<char*>(&channels), sizeof(channels));
  is.read(reinterpret_cast<char*>(&height), sizeof(height));
  is.read(reinterpret_cast<char*>(&width), sizeof(width));
  if (!is) throw ParseError("truncated patch container header");
  pf.channels = channels;
  pf.height = height;
  pf.width = width;
  const std::size_t total = 2 * pf.count * pf.channels * pf.height * pf.width;
  pf.values.resize(total);
  is.read(reinterpret_cast<char*>(pf.values.data()),
          static_cast<std::streamsize>(total * sizeof(float)));
  if (!is) throw ParseError("truncated patch container payload");
  return pf;
}

// --- plain netpbm image loading (P5 grayscale / P6 color) ---------------------

inline Tensor load_netpbm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingImage("cannot open image " + path.string());
  std::string magic;
  is >> magic;
  if (magic != "P5" && magic != "P6") {
    throw ParseError("unsupported image format (need P5/P6 netpbm): " +
                     path.string());
  }
  const auto next_token = [&]() {
    std::string tok;
    while (is >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(is, rest);
        continue;
      }
      return tok;
    }
    throw ParseError("truncated netpbm header: " + path.string());
  };
  const std::size_t width = std::stoul(next_token());
  const std::size_t height = std::stoul(next_token());
  const std::size_t maxval = std::stoul(next_token());
  if (width == 0 || height == 0 || maxval == 0 || maxval > 255) {
    throw ParseError("bad netpbm header: " + path.string());
  }
  is.get();  // single whitespace after maxval
  const std::size_t channels = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> raw(width * height * channels);
  is.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (!is) throw ParseError("truncated netpbm payload: " + path.string());
  Tensor img({channels, height, width});
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        img.at(c, y, x) =
            static_cast<double>(raw[(y * width + x) * channels + c]) /
            static_cast<double>(maxval);
      }
    }
  }
  return img;
}

// --- whole-dataset IO -----------------------------------------------------------

inline void save_dataset(const std::filesystem::path& dir, const Dataset& ds,
                         const nlohmann::json& generator_config = {}) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "annotations.jsonl");
    if (!os) throw ParseError("cannot write annotations.jsonl");
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      const PairSample& s = ds.samples[i];
      nlohmann::json j{
          {"image", "synthetic:" + std::to_string(i)},
          {"width", s.dims.width},
          {"height", s.dims.height},
          {"box1", {s.box1.cx, s.box1.cy, s.box1.w, s.box1.h}},
          {"box2", {s.box2.cx, s.box2.cy, s.box2.w, s.box2.h}},
          {"label", s.label},
      };
      if (s.true_gaze1) j["gaze1"] = *s.true_gaze1;
      if (s.true_gaze2) j["gaze2"] = *s.true_gaze2;
      os << j.dump() << "\n";
    }
  }
  save_patches(dir / "patches.bin", ds);
  nlohmann::json manifest{
      {"format", "mugaze-dataset"},
      {"version", 1},
      {"count", ds.samples.size()},
      {"positives", ds.positives()},
      {"channels", ds.channels},
      {"width", ds.dims.width},
      {"height", ds.dims.height},
      {"fov_deg", ds.fov_deg},
      {"annotations", "annotations.jsonl"},
      {"patches", "patches.bin"},
  };
  if (!generator_config.empty()) manifest["generator"] = generator_config;
  std::ofstream os(dir / "manifest.json");
  os << manifest.dump(2) << "\n";
}

/// Loads a dataset directory. Synthetic records take their patches from the
/// sidecar container; image records are cropped from netpbm files resolved
/// relative to the dataset directory.
inline Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw ParseError("cannot open manifest.json in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest.json: ") + e.what());
  }
  if (manifest.value("format", "") != "mugaze-dataset") {
    throw ParseError("not a mugaze dataset manifest");
  }

  Dataset ds;
  ds.channels = manifest.value("channels", 1);
  ds.dims = ImageDims{manifest.value("width", std::size_t{0}),
                      manifest.value("height", std::size_t{0})};
  ds.fov_deg = manifest.value("fov_deg", 53.0);

  const auto records = load_annotations(
      dir / manifest.value("annotations", "annotations.jsonl"), dir);

  std::optional<PatchFile> patches;
  const auto patch_path = dir / manifest.value("patches", "patches.bin");
  if (std::filesystem::exists(patch_path)) {
    patches = load_patches(patch_path);
  }

  for (const AnnotationRecord& rec : records) {
    PairSample s;
    s.dims = rec.dims;
    s.label = rec.label;
    s.box1 = rec.box1;
    s.box2 = rec.box2;
    s.true_gaze1 = rec.gaze1;
    s.true_gaze2 = rec.gaze2;
    if (is_synthetic_image(rec.image)) {
      if (!patches) {
        throw ParseError("synthetic record without a patch container");
      }
      s.patch1 = patches->patch(rec.record_index, rec.swapped ? 1 : 0);
      s.patch2 = patches->patch(rec.record_index, rec.swapped ? 0 : 1);
    } else {
      const Tensor img = load_netpbm(dir / rec.image);
      s.patch1 = crop_head_patch(img, s.box1);
      s.patch2 = crop_head_patch(img, s.box2);
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace mugaze::data
