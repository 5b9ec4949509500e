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


#include <gtest/gtest.h>

#include <sstream>

#include "stickergen/quantize.hpp"

namespace stickergen {
namespace {

RowMatrix random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  RowMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal();
  return m;
}

// Brute-force nearest centroid per subspace, lowest index on ties.
Code brute_force_pq(const Codebook& cb, const Eigen::VectorXd& x) {
  Code out;
  const std::size_t w = cb.width();
  for (std::size_t j = 0; j < cb.groups(); ++j) {
    const RowMatrix& t = cb.table(j);
    std::uint32_t best = 0;
    double best_d = 0.0;
    for (Eigen::Index c = 0; c < t.rows(); ++c) {
      double d = (t.row(c).transpose() - x.segment(Eigen::Index(j * w), Eigen::Index(w))).squaredNorm();
      if (c == 0 || d < best_d) best = std::uint32_t(c), best_d = d;
    }
    out.push_back(best);
  }
  return out;
}

TEST(KMeans, ExactCoverHasZeroError) {
  RowMatrix pts = random_rows(6, 3, 1);
  auto r = kmeans(pts, 6, 42);
  EXPECT_EQ(r.sse, 0.0);
  std::set<std::uint32_t> used(r.assignment.begin(), r.assignment.end());
  EXPECT_EQ(used.size(), 6u);
}

TEST(KMeans, TooFewDistinctPointsNamesLabel) {
  RowMatrix pts(4, 2);
  pts << 1, 1, 1, 1, 2, 2, 2, 2;
  try {
    kmeans(pts, 3, 1, 100, "subspace 5");
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("subspace 5"), std::string::npos);
  }
}

TEST(TrainPq, EightGroupsOf256) {
  RowMatrix x = random_rows(600, 64, 2);
  auto cb = train_pq(x, 8, 256, 5);
  EXPECT_EQ(cb.groups(), 8u);
  EXPECT_EQ(cb.k(), 256u);
  auto code = cb.encode(x.row(17).transpose());
  EXPECT_EQ(code.size(), 8u);
  for (auto s : code) EXPECT_LT(s, 256u);
}

TEST(TrainPq, SingleClusterIsSubspaceMean) {
  RowMatrix x(3, 4);
  x << 1, 2, 3, 4,  //
      5, 6, 7, 8,   //
      0, 1, -1, 3;
  auto cb = train_pq(x, 2, 1, 0);
  Eigen::RowVectorXd mean = x.colwise().mean();
  EXPECT_NEAR((cb.table(0).row(0) - mean.head(2)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((cb.table(1).row(0) - mean.tail(2)).norm(), 0.0, 1e-12);
}

TEST(TrainPq, DimensionNotDivisible) {
  RowMatrix x = random_rows(10, 6, 3);
  EXPECT_THROW(train_pq(x, 4, 2, 0), ConfigError);
}

TEST(TrainPq, ErrorNamesSubspace) {
  RowMatrix x = random_rows(10, 4, 3);
  x.col(2).setConstant(1.0);
  x.col(3).setConstant(2.0);
  try {
    train_pq(x, 2, 3, 0);
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("subspace 1"), std::string::npos) << e.what();
  }
}

TEST(PqCodebook, CentroidConcatenationRoundTrips) {
  RowMatrix x = random_rows(200, 16, 4);
  auto cb = train_pq(x, 4, 8, 9);
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    Code c;
    for (int j = 0; j < 4; ++j) c.push_back(std::uint32_t(rng.uniform(8)));
    EXPECT_EQ(cb.encode(cb.reconstruct(c)), c);
  }
}

TEST(PqCodebook, TieGoesToLowestIndex) {
  RowMatrix t = RowMatrix::Zero(6, 2);
  t.row(2) << 1, 0;
  t.row(5) << -1, 0;
  for (int c : {0, 1, 3, 4}) t.row(c) << 10 + c, 10;
  Codebook cb(CodeScheme::kPq, 2, 1, 6, 0, {t});
  EXPECT_EQ(cb.encode(Eigen::Vector2d(0, 0)), Code{2});
}

TEST(PqCodebook, OutOfRangeSymbolRejected) {
  RowMatrix x = random_rows(50, 4, 4);
  auto cb = train_pq(x, 2, 4, 1);
  EXPECT_THROW(cb.reconstruct({0, 4}), ParseError);
  EXPECT_THROW(cb.reconstruct({0}), ParseError);
}

TEST(PqCodebook, EncodeMatchesBruteForce) {
  RowMatrix train = random_rows(512, 32, 6);
  auto cb = train_pq(train, 8, 16, 2);
  RowMatrix probe = random_rows(1000, 32, 7);
  for (Eigen::Index i = 0; i < probe.rows(); ++i) {
    Eigen::VectorXd v = probe.row(i).transpose();
    ASSERT_EQ(cb.encode(v), brute_force_pq(cb, v)) << i;
  }
  for (Eigen::Index i = 0; i < train.rows(); ++i) {
    Eigen::VectorXd v = train.row(i).transpose();
    ASSERT_EQ(cb.encode(v), brute_force_pq(cb, v)) << i;
  }
}

TEST(PqCodebook, ErrorNonIncreasingInK) {
  RowMatrix x = random_rows(512, 32, 8);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k : {2, 4, 8, 16}) {
    double e = quantization_mse(train_pq(x, 8, k, 3), x);
    EXPECT_LE(e, prev) << "k=" << k;
    prev = e;
  }
}

TEST(PqCodebook, ErrorSeparatesAcrossSubspaces) {
  RowMatrix x = random_rows(300, 12, 10);
  auto cb = train_pq(x, 3, 5, 4);
  double per_subspace = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    const RowMatrix& t = cb.table(j);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < t.rows(); ++c)
        best = std::min(best, (x.row(i).segment(Eigen::Index(4 * j), 4) - t.row(c)).squaredNorm());
      per_subspace += best;
    }
  }
  EXPECT_NEAR(quantization_mse(cb, x) * 300.0, per_subspace, 1e-9);
}

TEST(PqCodebook, SerializationBitExact) {
  RowMatrix x = random_rows(100, 8, 11);
  auto cb = train_pq(x, 2, 4, 12);
  std::stringstream a;
  cb.save(a);
  auto back = Codebook::load(a);
  EXPECT_TRUE(back == cb);
  std::stringstream b;
  back.save(b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(PqCodebook, DeterministicUnderSeed) {
  RowMatrix x = random_rows(100, 8, 13);
  EXPECT_TRUE(train_pq(x, 2, 4, 1) == train_pq(x, 2, 4, 1));
}

TEST(TrainRq, OneLevelIsPlainKMeans) {
  RowMatrix x = random_rows(100, 6, 14);
  auto cb = train_rq(x, 1, 5, 3);
  auto km = kmeans(x, 5, derive_seed(3, "rq/0"));
  EXPECT_TRUE(cb.table(0) == km.centroids);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    EXPECT_EQ(cb.encode(x.row(i).transpose()), Code{km.assignment[std::size_t(i)]});
}

TEST(TrainRq, ErrorNonIncreasingInLevels) {
  RowMatrix x = random_rows(256, 8, 15);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t l = 1; l <= 4; ++l) {
    double e = quantization_mse(train_rq(x, l, 8, 5), x);
    EXPECT_LE(e, prev + 1e-12) << "L=" << l;
    prev = e;
  }
}

TEST(TrainRq, TwoLevelsSingleClusterIsGlobalMean) {
  RowMatrix x = random_rows(40, 5, 16);
  auto cb = train_rq(x, 2, 1, 1);
  Eigen::VectorXd mean = x.colwise().mean().transpose();
  Eigen::VectorXd rec = cb.reconstruct({0, 0});
  EXPECT_NEAR(cb.table(1).row(0).norm(), 0.0, 1e-12);
  EXPECT_NEAR((rec - mean).norm(), 0.0, 1e-12);
}

TEST(TrainRq, PaddingKeepsAlphabetAndNeverSelectsPadding) {
  RowMatrix x(3, 2);
  x << 0, 0, 1, 0, 0, 1;
  EXPECT_THROW(train_rq(x, 2, 4, 0), TrainingError);
  auto cb = train_rq(x, 2, 4, 0, true);
  EXPECT_EQ(cb.k(), 4u);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (auto s : cb.encode(x.row(i).transpose())) EXPECT_LT(s, 3u);
}

TEST(Atomic, FirstSeenOrder) {
  std::vector<std::string> p = {"x", "y", "x"};
  EXPECT_EQ(build_atomic(p), (std::vector<Code>{{0}, {1}, {0}}));
}

TEST(StringCodes, TokenIdsAndTruncation) {
  std::map<std::string, std::uint32_t> ids;
  auto id = [&](const std::string& t) { return ids.emplace(t, std::uint32_t(ids.size())).first->second; };
  std::string long_text;
  for (int i = 0; i < 17; ++i) long_text += "w" + std::to_string(i) + " ";
  std::vector<std::string> p = {"good morning", long_text, ""};
  auto sc = build_string(p, 15, id);
  EXPECT_EQ(sc.codes[0].size(), 2u);
  EXPECT_EQ(sc.codes[1].size(), 15u);
  EXPECT_EQ(sc.codes[2].size(), 1u);
  EXPECT_EQ(sc.truncated, 1u);
  EXPECT_EQ(sc.codes[1][0], ids.at("w0"));
}

TEST(Scheme, NamesRoundTrip) {
  for (auto s : {CodeScheme::kPq, CodeScheme::kRq, CodeScheme::kAtomic, CodeScheme::kString})
    EXPECT_EQ(parse_scheme(scheme_name(s)), s);
  EXPECT_THROW(parse_scheme("vae"), ConfigError);
}

}  // namespace
}  // namespace stickergen
