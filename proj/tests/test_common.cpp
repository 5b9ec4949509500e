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

#include <set>
#include <sstream>

#include "stickergen/common.hpp"

namespace stickergen {
namespace {

TEST(DecayWeight, MatchesReciprocalLog2) {
  // 1/log2(r+1), written out by hand.
  const double expected[] = {1.0, 0.6309297535714574, 0.5, 0.43067655807339306, 0.38685280723454163};
  for (std::size_t r = 1; r <= 5; ++r) EXPECT_NEAR(decay_weight(r), expected[r - 1], 1e-12) << r;
}

TEST(DecayWeight, StrictlyDecreasing) {
  for (std::size_t r = 1; r < 10; ++r) EXPECT_GT(decay_weight(r), decay_weight(r + 1));
}

TEST(Tokenize, LowercasesAndStripsPunctuation) {
  EXPECT_EQ(tokenize("  Good, Morning!!  you "), (std::vector<std::string>{"good", "morning", "you"}));
  EXPECT_TRUE(tokenize(" ?! ").empty());
  EXPECT_EQ(normalize_text("\"Super HAPPY\" now."), "super happy now");
}

TEST(UserGroup, EightDistinctRoundTrip) {
  std::set<std::string> names;
  for (std::size_t i = 0; i < kNumGroups; ++i) {
    UserGroup g = UserGroup::from_index(i);
    EXPECT_EQ(g.index(), i);
    EXPECT_EQ(UserGroup::parse(g.name()), g);
    names.insert(g.name());
  }
  EXPECT_EQ(names.size(), 8u);
  EXPECT_THROW(UserGroup::parse("60-99/male"), ParseError);
}

TEST(IntentRanking, ParseAndRank) {
  auto r = IntentRanking::parse("cvemo");
  EXPECT_EQ(r.symbols(), "cvemo");
  EXPECT_EQ(r.rank(Property::kIp), 1u);
  EXPECT_EQ(r.rank(Property::kOcr), 5u);
  EXPECT_THROW(IntentRanking::parse("cvem"), ParseError);
  EXPECT_THROW(IntentRanking::parse("ccemo"), ParseError);
  EXPECT_THROW(IntentRanking::parse("cvemx"), ParseError);
}

TEST(Seeds, DerivationIsStableAndNameSensitive) {
  EXPECT_EQ(derive_seed(7, "a"), derive_seed(7, "a"));
  EXPECT_NE(derive_seed(7, "a"), derive_seed(7, "b"));
  EXPECT_NE(derive_seed(7, "a"), derive_seed(8, "a"));
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Rng, SameSeedSameStream) {
  Rng a(3), b(3);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.uniform(17), b.uniform(17));
    EXPECT_EQ(a.unit(), b.unit());
  }
}

TEST(Rng, UniformAndCategoricalStayInRange) {
  Rng r(5);
  std::vector<int> counts(3);
  for (int i = 0; i < 30000; ++i) {
    auto u = r.uniform(10);
    ASSERT_LT(u, 10u);
    counts[r.categorical({1.0, 0.0, 3.0})]++;
  }
  EXPECT_EQ(counts[1], 0);
  EXPECT_NEAR(counts[2] / 30000.0, 0.75, 0.02);
}

TEST(BinIo, RoundTripsScalars) {
  std::stringstream ss;
  binio::put_magic(ss, "TEST");
  binio::put_u64(ss, 0x0123456789abcdefULL);
  binio::put_u32(ss, 77);
  binio::put_f64(ss, -0.1);
  binio::put_str(ss, "hello");
  binio::expect_magic(ss, "TEST");
  EXPECT_EQ(binio::get_u64(ss), 0x0123456789abcdefULL);
  EXPECT_EQ(binio::get_u32(ss), 77u);
  EXPECT_EQ(binio::get_f64(ss), -0.1);
  EXPECT_EQ(binio::get_str(ss), "hello");
  EXPECT_THROW(binio::get_u32(ss), ParseError);
}

TEST(Errors, ExitCodesAreDistinct) {
  std::set<int> codes;
  codes.insert(ConfigError("x").exit_code());
  codes.insert(ParseError("x").exit_code());
  codes.insert(ValidationError("x").exit_code());
  codes.insert(DependencyError("x").exit_code());
  codes.insert(TrainingError("x").exit_code());
  codes.insert(TransportError("x").exit_code());
  codes.insert(IoError("x").exit_code());
  codes.insert(EvaluationError("x").exit_code());
  codes.insert(ContractError("x").exit_code());
  EXPECT_EQ(codes.size(), 9u);
  EXPECT_EQ(codes.count(0), 0u);
  EXPECT_EQ(codes.count(1), 0u);
}

}  // namespace
}  // namespace stickergen
