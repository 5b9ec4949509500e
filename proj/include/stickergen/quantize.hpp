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

// Identifier codes for property values: product quantization, residual
// k-means, atomic integers and raw token strings.
//
// Codebook file layout (all integers little-endian, reals IEEE-754 binary64):
//
//   magic    "SGCB"
//   u32      format version (1)
//   u8       scheme (0 = pq, 1 = rq)
//   u32      D
//   u32      groups (m subspaces for pq, L levels for rq)
//   u32      k
//   u64      seed
//   f64[...] centroids, group-major, then centroid-major, then dimension

#pragma once

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "stickergen/common.hpp"

namespace stickergen {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class CodeScheme : std::uint8_t { kPq = 0, kRq = 1, kAtomic = 2, kString = 3 };

inline std::string_view scheme_name(CodeScheme s) {
  switch (s) {
    case CodeScheme::kPq: return "pq";
    case CodeScheme::kRq: return "rq";
    case CodeScheme::kAtomic: return "atomic";
    case CodeScheme::kString: return "string";
  }
  return "?";
}

inline CodeScheme parse_scheme(std::string_view s) {
  for (auto c : {CodeScheme::kPq, CodeScheme::kRq, CodeScheme::kAtomic, CodeScheme::kString})
    if (scheme_name(c) == s) return c;
  throw ConfigError("unknown identifier scheme '" + std::string(s) + "'");
}

using Code = std::vector<std::uint32_t>;

struct PropertyCode {
  CodeScheme scheme = CodeScheme::kPq;
  Code code;
  friend bool operator==(const PropertyCode&, const PropertyCode&) = default;
};

// ---------------------------------------------------------------------------
// Lloyd's k-means.
// ---------------------------------------------------------------------------

struct KMeansResult {
  RowMatrix centroids;                  // k x dim
  std::vector<std::uint32_t> assignment;
  int iterations = 0;
  double sse = 0.0;
};

inline double squared_distance(const double* a, const double* b, Eigen::Index n) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Nearest row of `centroids` to `x`; ties go to the lowest index.
inline std::uint32_t nearest_centroid(const RowMatrix& centroids, const double* x, double* dist = nullptr) {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    double d = squared_distance(centroids.row(c).data(), x, centroids.cols());
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::uint32_t>(c);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

/// Number of distinct rows of `points` (exact comparison).
inline std::size_t count_distinct_rows(const RowMatrix& points) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    rows[std::size_t(i)].assign(points.row(i).data(), points.row(i).data() + points.cols());
  std::sort(rows.begin(), rows.end());
  return static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

/// Seeded init with k distinct points, assignment fixpoint or `max_iter`
/// iterations, empty clusters reseeded with the point farthest from its
/// centroid. Throws TrainingError if fewer than k distinct points exist.
inline KMeansResult kmeans(const RowMatrix& points, std::size_t k, std::uint64_t seed,
                           int max_iter = 100, const std::string& label = "data") {
  const Eigen::Index n = points.rows(), dim = points.cols();
  if (k == 0) throw ConfigError("k-means needs k >= 1");

  // Distinct points in first-seen order.
  std::vector<Eigen::Index> distinct;
  {
    std::vector<std::pair<std::vector<double>, Eigen::Index>> rows;
    rows.reserve(std::size_t(n));
    for (Eigen::Index i = 0; i < n; ++i)
      rows.emplace_back(std::vector<double>(points.row(i).data(), points.row(i).data() + dim), i);
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (i == 0 || rows[i].first != rows[i - 1].first) distinct.push_back(rows[i].second);
    std::sort(distinct.begin(), distinct.end());
  }
  if (distinct.size() < k)
    throw TrainingError(label + ": " + std::to_string(distinct.size()) +
                        " distinct vectors, fewer than k = " + std::to_string(k));

  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) std::swap(distinct[i], distinct[i + rng.uniform(distinct.size() - i)]);

  KMeansResult r;
  r.centroids.resize(Eigen::Index(k), dim);
  for (std::size_t c = 0; c < k; ++c) r.centroids.row(Eigen::Index(c)) = points.row(distinct[c]);
  r.assignment.assign(std::size_t(n), std::numeric_limits<std::uint32_t>::max());

  std::vector<double> dist(static_cast<std::size_t>(n));
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      std::uint32_t a = nearest_centroid(r.centroids, points.row(i).data(), &dist[std::size_t(i)]);
      if (a != r.assignment[std::size_t(i)]) changed = true;
      r.assignment[std::size_t(i)] = a;
    }
    r.iterations = it + 1;
    if (!changed && it > 0) break;

    RowMatrix sums = RowMatrix::Zero(Eigen::Index(k), dim);
    std::vector<std::size_t> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(r.assignment[std::size_t(i)]) += points.row(i);
      ++counts[r.assignment[std::size_t(i)]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        r.centroids.row(Eigen::Index(c)) = sums.row(Eigen::Index(c)) / double(counts[c]);
        continue;
      }
      // Empty: take the point farthest from its own centroid.
      std::size_t far = 0;
      for (std::size_t i = 1; i < dist.size(); ++i)
        if (dist[i] > dist[far]) far = i;
      r.centroids.row(Eigen::Index(c)) = points.row(Eigen::Index(far));
      dist[far] = 0.0;
      r.assignment[far] = static_cast<std::uint32_t>(c);
    }
  }
  r.sse = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double d = 0.0;
    r.assignment[std::size_t(i)] = nearest_centroid(r.centroids, points.row(i).data(), &d);
    r.sse += d;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Product and residual quantization.
// ---------------------------------------------------------------------------

/// Centroid tables for either scheme. For pq, `groups` = m subspaces of width
/// D/m; for rq, `groups` = L levels of full width D.
class Codebook {
 public:
  Codebook() = default;
  Codebook(CodeScheme scheme, std::size_t dim, std::size_t groups, std::size_t k, std::uint64_t seed,
           std::vector<RowMatrix> tables)
      : scheme_(scheme), dim_(dim), groups_(groups), k_(k), seed_(seed), tables_(std::move(tables)) {
    if (scheme != CodeScheme::kPq && scheme != CodeScheme::kRq)
      throw ConfigError("codebooks exist only for pq and rq schemes");
    if (tables_.size() != groups_) throw ValidationError("codebook table count mismatch");
    for (const auto& t : tables_) {
      if (std::size_t(t.rows()) != k_ || std::size_t(t.cols()) != width())
        throw ValidationError("codebook table shape mismatch");
      if (!t.allFinite()) throw ValidationError("codebook holds non-finite centroids");
    }
  }

  CodeScheme scheme() const { return scheme_; }
  std::size_t dim() const { return dim_; }
  std::size_t groups() const { return groups_; }
  std::size_t k() const { return k_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t width() const { return scheme_ == CodeScheme::kPq ? dim_ / groups_ : dim_; }
  const RowMatrix& table(std::size_t g) const { return tables_.at(g); }

  Code encode(const Eigen::VectorXd& x) const {
    if (std::size_t(x.size()) != dim_)
      throw ContractError("encode: vector has dimension " + std::to_string(x.size()) +
                          ", codebook expects " + std::to_string(dim_));
    Code code(groups_);
    if (scheme_ == CodeScheme::kPq) {
      const std::size_t w = width();
      for (std::size_t j = 0; j < groups_; ++j)
        code[j] = nearest_centroid(tables_[j], x.data() + j * w);
    } else {
      Eigen::VectorXd residual = x;
      for (std::size_t l = 0; l < groups_; ++l) {
        code[l] = nearest_centroid(tables_[l], residual.data());
        residual -= tables_[l].row(code[l]).transpose();
      }
    }
    return code;
  }

  /// Throws ParseError on a wrong length or out-of-range symbol.
  Eigen::VectorXd reconstruct(const Code& code) const {
    if (code.size() != groups_)
      throw ParseError("code length " + std::to_string(code.size()) + " != " + std::to_string(groups_));
    for (auto s : code)
      if (s >= k_) throw ParseError("code symbol " + std::to_string(s) + " out of range (k = " + std::to_string(k_) + ")");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(Eigen::Index(dim_));
    if (scheme_ == CodeScheme::kPq) {
      const std::size_t w = width();
      for (std::size_t j = 0; j < groups_; ++j)
        out.segment(Eigen::Index(j * w), Eigen::Index(w)) = tables_[j].row(code[j]).transpose();
    } else {
      for (std::size_t l = 0; l < groups_; ++l) out += tables_[l].row(code[l]).transpose();
    }
    return out;
  }

  void save(std::ostream& os) const {
    binio::put_magic(os, "SGCB");
    binio::put_u32(os, 1);
    binio::put_u8(os, static_cast<std::uint8_t>(scheme_));
    binio::put_u32(os, std::uint32_t(dim_));
    binio::put_u32(os, std::uint32_t(groups_));
    binio::put_u32(os, std::uint32_t(k_));
    binio::put_u64(os, seed_);
    for (const auto& t : tables_)
      for (Eigen::Index i = 0; i < t.size(); ++i) binio::put_f64(os, t.data()[i]);
  }

  static Codebook load(std::istream& is) {
    binio::expect_magic(is, "SGCB");
    if (auto v = binio::get_u32(is); v != 1) throw ParseError("unsupported codebook version " + std::to_string(v));
    auto scheme = static_cast<CodeScheme>(binio::get_u8(is));
    std::size_t dim = binio::get_u32(is), groups = binio::get_u32(is), k = binio::get_u32(is);
    std::uint64_t seed = binio::get_u64(is);
    if (groups == 0 || (scheme == CodeScheme::kPq && dim % groups != 0))
      throw ParseError("codebook header is inconsistent");
    std::size_t w = scheme == CodeScheme::kPq ? dim / groups : dim;
    std::vector<RowMatrix> tables(groups, RowMatrix(Eigen::Index(k), Eigen::Index(w)));
    for (auto& t : tables)
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = binio::get_f64(is);
    return Codebook(scheme, dim, groups, k, seed, std::move(tables));
  }

  friend bool operator==(const Codebook& a, const Codebook& b) {
    if (a.scheme_ != b.scheme_ || a.dim_ != b.dim_ || a.groups_ != b.groups_ || a.k_ != b.k_ ||
        a.seed_ != b.seed_)
      return false;
    for (std::size_t i = 0; i < a.tables_.size(); ++i)
      if (!(a.tables_[i].array() == b.tables_[i].array()).all()) return false;
    return true;
  }

 private:
  CodeScheme scheme_ = CodeScheme::kPq;
  std::size_t dim_ = 0, groups_ = 0, k_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<RowMatrix> tables_;
};

/// Smallest per-subspace distinct count; the largest k train_pq accepts.
inline std::size_t max_pq_clusters(const RowMatrix& vectors, std::size_t m) {
  if (m == 0 || vectors.cols() % Eigen::Index(m) != 0) return 0;
  const Eigen::Index w = vectors.cols() / Eigen::Index(m);
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (std::size_t j = 0; j < m; ++j)
    best = std::min(best, count_distinct_rows(vectors.middleCols(Eigen::Index(j) * w, w)));
  return best;
}

/// Rows of `vectors` are training points.
inline Codebook train_pq(const RowMatrix& vectors, std::size_t m, std::size_t k, std::uint64_t seed) {
  const std::size_t dim = std::size_t(vectors.cols());
  if (m == 0 || dim % m != 0)
    throw ConfigError("dimension " + std::to_string(dim) + " is not divisible by m = " + std::to_string(m));
  const Eigen::Index w = Eigen::Index(dim / m);
  std::vector<RowMatrix> tables;
  tables.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    RowMatrix sub = vectors.middleCols(Eigen::Index(j) * w, w);
    auto r = kmeans(sub, k, derive_seed(seed, "pq/" + std::to_string(j)), 100,
                    "subspace " + std::to_string(j));
    tables.push_back(std::move(r.centroids));
  }
  return Codebook(CodeScheme::kPq, dim, m, k, seed, std::move(tables));
}

/// Level l clusters the residuals left by levels 0..l-1. With
/// `pad_short_levels`, a level with fewer than k distinct residuals is
/// clustered with as many centroids as it has distinct residuals and the table
/// is padded by repeating its last row; padded rows are never selected
/// because ties go to the lowest index.
inline Codebook train_rq(const RowMatrix& vectors, std::size_t levels, std::size_t k, std::uint64_t seed,
                         bool pad_short_levels = false) {
  if (levels == 0) throw ConfigError("rq needs at least one level");
  RowMatrix residual = vectors;
  std::vector<RowMatrix> tables;
  for (std::size_t l = 0; l < levels; ++l) {
    std::size_t kl = k;
    if (pad_short_levels) kl = std::max<std::size_t>(1, std::min(k, count_distinct_rows(residual)));
    auto r = kmeans(residual, kl, derive_seed(seed, "rq/" + std::to_string(l)), 100,
                    "level " + std::to_string(l));
    for (Eigen::Index i = 0; i < residual.rows(); ++i)
      residual.row(i) -= r.centroids.row(r.assignment[std::size_t(i)]);
    RowMatrix table(Eigen::Index(k), vectors.cols());
    table.topRows(Eigen::Index(kl)) = r.centroids;
    for (std::size_t c = kl; c < k; ++c) table.row(Eigen::Index(c)) = r.centroids.row(Eigen::Index(kl - 1));
    tables.push_back(std::move(table));
  }
  return Codebook(CodeScheme::kRq, std::size_t(vectors.cols()), levels, k, seed, std::move(tables));
}

/// Mean squared reconstruction error over the rows of `vectors`.
inline double quantization_mse(const Codebook& cb, const RowMatrix& vectors) {
  if (vectors.rows() == 0) return 0.0;
  double s = 0.0;
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    Eigen::VectorXd x = vectors.row(i).transpose();
    s += (cb.reconstruct(cb.encode(x)) - x).squaredNorm();
  }
  return s / double(vectors.rows());
}

inline void save_codebook(const std::string& path, const Codebook& cb) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write codebook '" + path + "'");
  cb.save(out);
}

inline Codebook load_codebook(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read codebook '" + path + "'");
  return Codebook::load(in);
}

// ---------------------------------------------------------------------------
// Atomic and string identifiers.
// ---------------------------------------------------------------------------

/// Dense integers in first-seen order: [x, y, x] -> [0, 1, 0].
inline std::vector<Code> build_atomic(std::span<const std::string> properties) {
  std::unordered_map<std::string, std::uint32_t> ids;
  std::vector<Code> out;
  out.reserve(properties.size());
  for (const auto& p : properties) {
    auto [it, inserted] = ids.emplace(p, static_cast<std::uint32_t>(ids.size()));
    out.push_back(Code{it->second});
  }
  return out;
}

struct StringCodes {
  std::vector<Code> codes;
  std::size_t truncated = 0;
};

/// Token-id sequence of each property, truncated to `max_steps` tokens.
/// `token_id` maps a normalized token to its symbol. Empty text maps to the
/// "<empty>" sentinel token.
template <typename TokenId>
StringCodes build_string(std::span<const std::string> properties, std::size_t max_steps, TokenId&& token_id) {
  StringCodes out;
  out.codes.reserve(properties.size());
  for (const auto& p : properties) {
    auto tokens = tokenize(p);
    if (tokens.empty()) tokens.push_back("<empty>");
    if (tokens.size() > max_steps) {
      tokens.resize(max_steps);
      ++out.truncated;
    }
    Code c;
    for (const auto& t : tokens) c.push_back(token_id(t));
    out.codes.push_back(std::move(c));
  }
  return out;
}

}  // namespace stickergen
