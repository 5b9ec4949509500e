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

#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "stickergen/common.hpp"

namespace stickergen {

using Vec = Eigen::VectorXd;

struct TokenEmbeddingSequence {
  std::vector<std::string> tokens;
  std::vector<Vec> vectors;
  Vec pooled;
  /// Set when the input had no tokens; `tokens` then holds one sentinel with
  /// a zero vector.
  bool empty_input = false;

  /// Rows are token vectors.
  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(vectors.size()), pooled.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) m.row(Eigen::Index(i)) = vectors[i].transpose();
    return m;
  }
};

inline constexpr std::string_view kEmptySentinel = "<empty>";

/// Feature-hash embedder with an optional table of injected vectors. Token
/// vectors from the hash path are unit norm; the provider is stateless after
/// construction.
class EmbeddingProvider {
 public:
  EmbeddingProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim == 0) throw ConfigError("embedding dimension must be > 0");
  }

  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t precomputed_size() const { return table_.size(); }

  /// Deterministic pseudo-random unit vector for a token.
  Vec hash_vector(std::string_view token) const {
    Rng rng(splitmix64(seed_ ^ fnv1a64(token)));
    Vec v(static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < dim_; ++i) v(Eigen::Index(i)) = rng.normal();
    double n = v.norm();
    return n > 0.0 ? Vec(v / n) : v;
  }

  Vec token_vector(const std::string& token) const {
    auto it = table_.find(token);
    if (it != table_.end()) return it->second;
    return hash_vector(token);
  }

  TokenEmbeddingSequence embed_text(std::string_view text) const {
    TokenEmbeddingSequence out;
    out.tokens = tokenize(text);
    if (out.tokens.empty()) {
      out.tokens.push_back(std::string(kEmptySentinel));
      out.vectors.push_back(Vec::Zero(Eigen::Index(dim_)));
      out.pooled = Vec::Zero(Eigen::Index(dim_));
      out.empty_input = true;
      return out;
    }
    out.pooled = Vec::Zero(Eigen::Index(dim_));
    for (const auto& t : out.tokens) {
      out.vectors.push_back(token_vector(t));
      out.pooled += out.vectors.back();
    }
    out.pooled /= double(out.tokens.size());
    return out;
  }

  /// Reads "token v1 ... vD" lines. Throws ParseError on a dimension mismatch
  /// or malformed number.
  void load_precomputed(std::istream& in) {
    std::string line;
    std::size_t n = 0;
    std::unordered_map<std::string, Vec> table;
    while (std::getline(in, line)) {
      ++n;
      std::istringstream ls(line);
      std::string token;
      if (!(ls >> token)) continue;
      std::vector<double> vals;
      std::string field;
      while (ls >> field) {
        try {
          std::size_t used = 0;
          vals.push_back(std::stod(field, &used));
          if (used != field.size()) throw std::invalid_argument(field);
        } catch (const std::exception&) {
          throw ParseError("malformed number '" + field + "'", n);
        }
      }
      if (vals.size() != dim_)
        throw ParseError("dimension mismatch: token '" + token + "' has " +
                             std::to_string(vals.size()) + " values, provider expects " +
                             std::to_string(dim_),
                         n);
      table[token] = Eigen::Map<Vec>(vals.data(), Eigen::Index(vals.size()));
    }
    for (auto& [k, v] : table) table_[k] = std::move(v);
  }

  void load_precomputed(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding file '" + path + "'");
    load_precomputed(in);
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  std::unordered_map<std::string, Vec> table_;
};

inline double cosine(const Vec& a, const Vec& b) {
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace stickergen
