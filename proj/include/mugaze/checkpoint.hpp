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
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mugaze/errors.hpp"
#include "mugaze/nn.hpp"
#include "mugaze/tensor.hpp"

// Versioned binary checkpoint container (little-endian):
//   magic   "MGZCKPT1"
//   u32     version (currently 1)
//   u32     named tensor count
//   per tensor: u32 name length, name bytes, u8 layer kind,
//               u32 rank, u64 dims..., f64 row-major values
//   u8      optimizer-state flag
//   if set: u64 step_count, f64 base_lr, f64 decay_factor, u64 decay_every,
//           f64 rho, f64 eps, u32 accumulator count,
//           per accumulator: u32 rank, u64 dims..., f64 values
//
// The format is stable: readers must reject unknown magics and versions.

namespace mugaze::ckpt {

constexpr char kMagic[8] = {'M', 'G', 'Z', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

struct NamedTensor {
  std::string name;
  nn::LayerKind kind;
  const Tensor* tensor;
};

namespace detail {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw CheckpointError("truncated checkpoint stream");
  return v;
}

inline void put_tensor(std::ostream& os, const Tensor& t) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape) put<std::uint64_t>(os, d);
  os.write(reinterpret_cast<const char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

inline Tensor get_tensor(std::istream& is) {
  const std::uint32_t rank = get<std::uint32_t>(is);
  if (rank > 8) throw CheckpointError("implausible tensor rank");
  std::vector<std::size_t> shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(is));
  Tensor t(shape);
  is.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  if (!is) throw CheckpointError("truncated tensor payload");
  return t;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os,
                             const std::vector<NamedTensor>& tensors,
                             const nn::OptimizerState* opt) {
  os.write(kMagic, sizeof(kMagic));
  detail::put<std::uint32_t>(os, kVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor& nt : tensors) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(nt.name.size()));
    os.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(nt.kind));
    detail::put_tensor(os, *nt.tensor);
  }
  detail::put<std::uint8_t>(os, opt ? 1 : 0);
  if (opt) {
    detail::put<std::uint64_t>(os, opt->step_count);
    detail::put<double>(os, opt->base_lr);
    detail::put<double>(os, opt->decay_factor);
    detail::put<std::uint64_t>(os, opt->decay_every);
    detail::put<double>(os, opt->rho);
    detail::put<double>(os, opt->eps);
    detail::put<std::uint32_t>(os,
                               static_cast<std::uint32_t>(opt->accum.size()));
    for (const Tensor& a : opt->accum) detail::put_tensor(os, a);
  }
}

struct LoadedTensor {
  std::string name;
  nn::LayerKind kind;
  Tensor tensor;
};

struct LoadedCheckpoint {
  std::vector<LoadedTensor> tensors;
  bool has_optimizer = false;
  nn::OptimizerState optimizer;

  const Tensor& find(const std::string& name) const {
    for (const LoadedTensor& t : tensors) {
      if (t.name == name) return t.tensor;
    }
    throw CheckpointError("checkpoint is missing tensor '" + name + "'");
  }
};

inline LoadedCheckpoint read_checkpoint(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a mugaze checkpoint (bad magic)");
  }
  const std::uint32_t version = detail::get<std::uint32_t>(is);
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version));
  }
  LoadedCheckpoint out;
  const std::uint32_t count = detail::get<std::uint32_t>(is);
  out.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    LoadedTensor lt;
    const std::uint32_t name_len = detail::get<std::uint32_t>(is);
    if (name_len > 4096) throw CheckpointError("implausible tensor name");
    lt.name.resize(name_len);
    is.read(lt.name.data(), name_len);
    lt.kind = static_cast<nn::LayerKind>(detail::get<std::uint8_t>(is));
    lt.tensor = detail::get_tensor(is);
    out.tensors.push_back(std::move(lt));
  }
  out.has_optimizer = detail::get<std::uint8_t>(is) != 0;
  if (out.has_optimizer) {
    nn::OptimizerState& s = out.optimizer;
    s.step_count = detail::get<std::uint64_t>(is);
    s.base_lr = detail::get<double>(is);
    s.decay_factor = detail::get<double>(is);
    s.decay_every = detail::get<std::uint64_t>(is);
    s.rho = detail::get<double>(is);
    s.eps = detail::get<double>(is);
    const std::uint32_t n = detail::get<std::uint32_t>(is);
    s.accum.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      s.accum.push_back(detail::get_tensor(is));
    }
    // Rebuild the cached rate with the same left-fold the optimizer uses, so
    // a resumed run continues bit-identically.
    s.current_lr = s.base_lr;
    s.applied_decays = 0;
    const std::uint64_t k = s.step_count / s.decay_every;
    while (s.applied_decays < k) {
      s.current_lr *= s.decay_factor;
      ++s.applied_decays;
    }
  }
  return out;
}

inline void save_checkpoint_file(const std::string& path,
                                 const std::vector<NamedTensor>& tensors,
                                 const nn::OptimizerState* opt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open checkpoint file " + path);
  write_checkpoint(os, tensors, opt);
  if (!os) throw CheckpointError("failed writing checkpoint file " + path);
}

inline LoadedCheckpoint load_checkpoint_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint file " + path);
  return read_checkpoint(is);
}

inline std::string checkpoint_to_string(
    const std::vector<NamedTensor>& tensors, const nn::OptimizerState* opt) {
  std::ostringstream os(std::ios::binary);
  write_checkpoint(os, tensors, opt);
  return os.str();
}

}  // namespace mugaze::ckpt
