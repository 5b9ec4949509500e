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

#include "stickergen/embed.hpp"

namespace stickergen {
namespace {

TEST(EmbedText, Deterministic) {
  EmbeddingProvider a(64, 11), b(64, 11);
  auto x = a.embed_text("Cute cat, so happy");
  auto y = b.embed_text("Cute cat, so happy");
  ASSERT_EQ(x.tokens, y.tokens);
  ASSERT_EQ(x.vectors.size(), 4u);
  for (std::size_t i = 0; i < x.vectors.size(); ++i) EXPECT_EQ(x.vectors[i], y.vectors[i]);
  EXPECT_EQ(x.pooled, y.pooled);
}

TEST(EmbedText, SingleTokenPoolsToItself) {
  EmbeddingProvider e(32, 1);
  auto s = e.embed_text("hello");
  ASSERT_EQ(s.vectors.size(), 1u);
  EXPECT_EQ(s.pooled, s.vectors[0]);
  EXPECT_NEAR(s.pooled.norm(), 1.0, 1e-12);
}

TEST(EmbedText, PooledIsMeanWithNormAtMostOne) {
  EmbeddingProvider e(16, 2);
  auto s = e.embed_text("a b c a");
  Vec mean = Vec::Zero(16);
  for (auto& t : s.tokens) mean += e.hash_vector(t);
  mean /= 4.0;
  EXPECT_LT((s.pooled - mean).norm(), 1e-12);
  EXPECT_LE(s.pooled.norm(), 1.0 + 1e-12);
}

TEST(EmbedText, EmptyTextIsFlaggedSentinel) {
  EmbeddingProvider e(8, 3);
  auto s = e.embed_text("  ...  ");
  EXPECT_TRUE(s.empty_input);
  ASSERT_EQ(s.tokens.size(), 1u);
  EXPECT_EQ(s.tokens[0], kEmptySentinel);
  EXPECT_EQ(s.vectors[0].norm(), 0.0);
  EXPECT_EQ(s.matrix().rows(), 1);
}

TEST(EmbedText, DisjointTextsNearlyOrthogonal) {
  EmbeddingProvider e(256, 5);
  Rng rng(99);
  for (int pair = 0; pair < 100; ++pair) {
    std::string a, b;
    std::size_t na = 1 + rng.uniform(4), nb = 1 + rng.uniform(4);
    for (std::size_t i = 0; i < na; ++i) a += "a" + std::to_string(pair) + "x" + std::to_string(i) + " ";
    for (std::size_t i = 0; i < nb; ++i) b += "b" + std::to_string(pair) + "y" + std::to_string(i) + " ";
    EXPECT_LT(std::abs(cosine(e.embed_text(a).pooled, e.embed_text(b).pooled)), 0.2) << a << " | " << b;
  }
}

TEST(Precomputed, MatchingDimensionLoadsAndOverrides) {
  EmbeddingProvider e(4, 1);
  std::istringstream in("cat 1 0 0 0\ndog 0 1 0 0.5\n");
  e.load_precomputed(in);
  EXPECT_EQ(e.precomputed_size(), 2u);
  EXPECT_EQ(e.token_vector("cat"), (Vec(4) << 1, 0, 0, 0).finished());
  EXPECT_EQ(e.embed_text("Dog").pooled, (Vec(4) << 0, 1, 0, 0.5).finished());
}

TEST(Precomputed, DimensionMismatch) {
  EmbeddingProvider e(128, 1);
  std::ostringstream line;
  line << "cat";
  for (int i = 0; i < 64; ++i) line << " 0.1";
  std::istringstream in(line.str());
  EXPECT_THROW(e.load_precomputed(in), ParseError);
  EXPECT_EQ(e.precomputed_size(), 0u);
}

TEST(Precomputed, UnlistedTokenFallsBackToHash) {
  EmbeddingProvider e(4, 9), plain(4, 9);
  std::istringstream in("cat 1 0 0 0\n");
  e.load_precomputed(in);
  EXPECT_EQ(e.token_vector("owl"), plain.hash_vector("owl"));
  EXPECT_EQ(e.token_vector("owl"), e.token_vector("owl"));
}

TEST(Precomputed, MalformedNumber) {
  EmbeddingProvider e(2, 1);
  std::istringstream in("cat 1 zero\n");
  EXPECT_THROW(e.load_precomputed(in), ParseError);
}

}  // namespace
}  // namespace stickergen
