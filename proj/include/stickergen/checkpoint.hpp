// Copyright 2026 The Stickergen Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Parameter checkpoint file, little-endian:
//
//   magic "SGCK", u32 version (1), str kind, u64 vocabulary hash,
//   u64 config hash, u32 n_meta, n_meta x (str key, str value),
//   u32 n_tensors, n_tensors x (str name, u32 rows, u32 cols, f64[rows*cols]).
//
// Strings are u32 length + bytes. Tensors are row-major.

#pragma once

#include <fstream>
#include <map>
#include <string>

#include "stickergen/autodiff.hpp"

namespace stickergen {

struct Checkpoint {
  std::string kind;
  std::uint64_t vocab_hash = 0;
  std::uint64_t config_hash = 0;
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, ad::Matrix>> tensors;

  const ad::Matrix& tensor(const std::string& name) const {
    for (const auto& [n, m] : tensors)
      if (n == name) return m;
    throw ParseError("checkpoint has no tensor '" + name + "'");
  }

  void save(std::ostream& os) const {
    binio::put_magic(os, "SGCK");
    binio::put_u32(os, 1);
    binio::put_str(os, kind);
    binio::put_u64(os, vocab_hash);
    binio::put_u64(os, config_hash);
    binio::put_u32(os, std::uint32_t(meta.size()));
    for (const auto& [k, v] : meta) {
      binio::put_str(os, k);
      binio::put_str(os, v);
    }
    binio::put_u32(os, std::uint32_t(tensors.size()));
    for (const auto& [name, m] : tensors) {
      binio::put_str(os, name);
      binio::put_u32(os, std::uint32_t(m.rows()));
      binio::put_u32(os, std::uint32_t(m.cols()));
      for (Eigen::Index i = 0; i < m.size(); ++i) binio::put_f64(os, m.data()[i]);
    }
  }

  static Checkpoint load(std::istream& is) {
    Checkpoint c;
    binio::expect_magic(is, "SGCK");
    if (auto v = binio::get_u32(is); v != 1) throw ParseError("unsupported checkpoint version " + std::to_string(v));
    c.kind = binio::get_str(is);
    c.vocab_hash = binio::get_u64(is);
    c.config_hash = binio::get_u64(is);
    for (std::uint32_t n = binio::get_u32(is); n > 0; --n) {
      std::string k = binio::get_str(is);
      c.meta[k] = binio::get_str(is);
    }
    for (std::uint32_t n = binio::get_u32(is); n > 0; --n) {
      std::string name = binio::get_str(is);
      std::uint32_t rows = binio::get_u32(is), cols = binio::get_u32(is);
      ad::Matrix m(rows, cols);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = binio::get_f64(is);
      c.tensors.emplace_back(std::move(name), std::move(m));
    }
    return c;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint '" + path + "'");
    save(out);
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DependencyError("checkpoint '" + path + "' not found");
    return load(in);
  }

  static Checkpoint from_parameters(std::string kind, const ad::ParameterSet& params) {
    Checkpoint c;
    c.kind = std::move(kind);
    for (std::size_t i = 0; i < params.size(); ++i) c.tensors.emplace_back(params.name(i), params.value(i));
    return c;
  }

  /// Copies matching tensors into `params`; shapes must agree.
  void restore(ad::ParameterSet& params) const {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const ad::Matrix& m = tensor(params.name(i));
      if (m.rows() != params.value(i).rows() || m.cols() != params.value(i).cols())
        throw ParseError("checkpoint tensor '" + params.name(i) + "' has the wrong shape");
      params.value(i) = m;
    }
  }
};

}  // namespace stickergen
