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

#include <fstream>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "stickergen/index.hpp"

namespace stickergen {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

IndexConfig small_config(CodeScheme s) {
  IndexConfig c;
  c.scheme = s;
  c.m = 4;
  c.k = 4;
  c.embed_dim = 16;
  return c;
}

TEST(Vocabulary, FamiliesAreDisjoint) {
  IdentifierVocabulary v({"b", "a", "<empty>", "a"}, CodeSpace{CodeScheme::kPq, 3, 4});
  EXPECT_EQ(v.text_count(), 3u);
  std::set<std::uint32_t> ids{IdentifierVocabulary::kUnk};
  for (auto& t : v.text_tokens()) ids.insert(v.text_token(t));
  for (Property p : kAllProperties) ids.insert(v.prefix_token(p));
  for (std::size_t g = 0; g < kNumGroups; ++g) ids.insert(v.group_token(UserGroup::from_index(g)));
  for (std::size_t j = 0; j < 3; ++j)
    for (std::uint32_t c = 0; c < 4; ++c) ids.insert(v.code_token(j, c));
  EXPECT_EQ(ids.size(), 1 + 3 + 5 + 8 + 12u);
  EXPECT_EQ(v.size(), ids.size());
  EXPECT_EQ(*ids.rbegin() + 1, v.size());
}

TEST(Vocabulary, OutputIndexRoundTrip) {
  IdentifierVocabulary v({"x"}, CodeSpace{CodeScheme::kPq, 2, 3});
  EXPECT_EQ(v.output_size(), 5u + 6u);
  for (std::uint32_t i = 0; i < v.output_size(); ++i) EXPECT_EQ(v.output_index(v.output_token(i)), i);
  EXPECT_EQ(v.output_index(v.prefix_token(Property::kMeaning)), 4u);
  EXPECT_THROW(v.output_index(v.group_token(UserGroup{})), ContractError);
  EXPECT_THROW(v.code_token(2, 0), ContractError);
  EXPECT_THROW(v.code_token(0, 3), ContractError);
}

TEST(Vocabulary, EncodeTextUsesUnkAndSentinel) {
  IdentifierVocabulary v({"<empty>", "cat"}, CodeSpace{CodeScheme::kAtomic, 1, 2});
  EXPECT_EQ(v.encode_text("Cat dog"), (std::vector<std::uint32_t>{v.text_token("cat"), IdentifierVocabulary::kUnk}));
  EXPECT_EQ(v.encode_text(""), std::vector<std::uint32_t>{v.text_token("<empty>")});
}

TEST(PrefixTree, SharedPrefixConstruction) {
  PrefixTree t(Property::kIp);
  t.insert({1, 2});
  t.insert({1, 3});
  t.insert({1, 2});
  ASSERT_EQ(t.node(PrefixTree::root()).children.size(), 1u);
  auto c = t.child(PrefixTree::root(), 1);
  ASSERT_TRUE(c);
  EXPECT_EQ(t.node(*c).children.size(), 2u);
  EXPECT_EQ(t.leaf_count(), 2u);
  EXPECT_TRUE(t.contains({1, 3}));
  EXPECT_FALSE(t.contains({1}));
  EXPECT_FALSE(t.contains({1, 4}));
  EXPECT_EQ(t.codes(), (std::vector<Code>{{1, 2}, {1, 3}}));
}

TEST(PrefixTree, RoundTripAndPrefixClosure) {
  Rng rng(4);
  PrefixTree t(Property::kStyle);
  std::set<Code> codes;
  for (int i = 0; i < 80; ++i) {
    Code c;
    for (int j = 0; j < 4; ++j) c.push_back(std::uint32_t(rng.uniform(5)));
    t.insert(c);
    codes.insert(c);
  }
  EXPECT_EQ(t.leaf_count(), codes.size());
  EXPECT_EQ(t.codes(), std::vector<Code>(codes.begin(), codes.end()));
  for (std::uint32_t n = 1; n < t.node_count(); ++n) {
    if (!t.node(n).terminal) { EXPECT_FALSE(t.node(n).children.empty()) << n; }
  }
  std::stringstream ss;
  t.save(ss);
  EXPECT_TRUE(PrefixTree::load(ss) == t);
}

class BuiltIndex : public ::testing::TestWithParam<CodeScheme> {};

TEST_P(BuiltIndex, CodesTreesAndPostingsAgree) {
  auto ds = generate_synthetic(testing::small_synthetic_config(120, 5));
  EmbeddingProvider emb(16, 11);
  auto idx = build_identifiers(ds.corpus, emb, small_config(GetParam()));
  ASSERT_EQ(idx.size(), ds.corpus.size());
  std::size_t assignments = 0;
  for (Property p : kAllProperties) {
    std::set<Code> distinct;
    std::map<std::string, Code> by_text;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const Code& c = idx.code(i, p);
      ++assignments;
      distinct.insert(c);
      if (GetParam() == CodeScheme::kPq || GetParam() == CodeScheme::kRq) { EXPECT_EQ(c.size(), 4u); }
      if (GetParam() == CodeScheme::kAtomic) { EXPECT_EQ(c.size(), 1u); }
      // Same text, same code.
      auto [it, fresh] = by_text.emplace(ds.corpus[i].text(p), c);
      if (!fresh) { EXPECT_EQ(it->second, c); }
      // Reachable through tree walk and postings.
      EXPECT_TRUE(idx.tree(p).contains(c));
      const auto& post = idx.lookup(p, c);
      EXPECT_TRUE(std::binary_search(post.begin(), post.end(), std::uint32_t(i)));
      for (auto tok : idx.code_tokens(c)) EXPECT_TRUE(idx.vocab.is_code_token(tok));
    }
    EXPECT_EQ(idx.tree(p).leaf_count(), distinct.size());
    EXPECT_EQ(idx.tree(p).codes(), std::vector<Code>(distinct.begin(), distinct.end()));
    std::size_t covered = 0;
    for (const auto& [c, ids] : idx.postings.of(p)) covered += ids.size();
    EXPECT_EQ(covered, idx.size());
  }
  EXPECT_EQ(assignments, 5 * ds.corpus.size());
  EXPECT_TRUE(idx.lookup(Property::kIp, Code{999}).empty());
}

TEST_P(BuiltIndex, BundleRoundTripIsBitExact) {
  auto ds = generate_synthetic(testing::small_synthetic_config(80, 6));
  EmbeddingProvider emb(16, 11);
  auto idx = build_identifiers(ds.corpus, emb, small_config(GetParam()), {"extra query words"});
  auto a = testing::scratch("index_a"), b = testing::scratch("index_b");
  idx.save(a.string());
  auto back = StickerIndex::load(a.string());
  EXPECT_TRUE(back.vocab == idx.vocab);
  EXPECT_EQ(back.codes, idx.codes);
  EXPECT_TRUE(back.postings == idx.postings);
  for (Property p : kAllProperties) EXPECT_TRUE(back.tree(p) == idx.tree(p));
  back.save(b.string());
  for (const auto& f : std::filesystem::directory_iterator(a))
    EXPECT_EQ(slurp(f.path()), slurp(b / f.path().filename())) << f.path().filename();
}

INSTANTIATE_TEST_SUITE_P(Schemes, BuiltIndex,
                         ::testing::Values(CodeScheme::kPq, CodeScheme::kRq, CodeScheme::kAtomic,
                                           CodeScheme::kString),
                         [](const auto& info) { return std::string(scheme_name(info.param)); });

TEST(BuildIdentifiers, DefaultShapeCodeLength) {
  auto ds = generate_synthetic(testing::small_synthetic_config(200, 7));
  IndexConfig c;
  c.k = 4;
  EmbeddingProvider emb(64, 11);
  auto idx = build_identifiers(ds.corpus, emb, c);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (Property p : kAllProperties) EXPECT_EQ(idx.code(i, p).size(), 8u);
}

TEST(BuildIdentifiers, SharedIpTextSharesCode) {
  Corpus c = testing::tiny_corpus();
  EmbeddingProvider emb(16, 11);
  auto idx = build_identifiers(c, emb, small_config(CodeScheme::kPq));
  EXPECT_EQ(idx.code(0, Property::kIp), idx.code(1, Property::kIp));
  EXPECT_EQ(idx.code(2, Property::kIp), idx.code(3, Property::kIp));
  EXPECT_EQ(idx.lookup(Property::kIp, idx.code(0, Property::kIp)), (std::vector<std::uint32_t>{0, 1}));
}

TEST(BuildIdentifiers, KIsClampedToDistinctValues) {
  Corpus c = testing::tiny_corpus();
  EmbeddingProvider emb(16, 11);
  IndexConfig cfg = small_config(CodeScheme::kPq);
  cfg.k = 256;
  auto idx = build_identifiers(c, emb, cfg);
  EXPECT_EQ(idx.stats.k_used[index_of(Property::kIp)], 3u);
  EXPECT_EQ(idx.stats.distinct_codes[index_of(Property::kIp)], 3u);
}

TEST(BuildIdentifiers, StringCodesSpellTheProperty) {
  Corpus c = testing::tiny_corpus();
  EmbeddingProvider emb(16, 11);
  auto idx = build_identifiers(c, emb, small_config(CodeScheme::kString));
  const Code& code = idx.code(3, Property::kStyle);
  ASSERT_EQ(code.size(), 2u);
  EXPECT_EQ(idx.vocab.text_tokens()[code[0]], "pixel");
  EXPECT_EQ(idx.vocab.text_tokens()[code[1]], "art");
  EXPECT_EQ(idx.code(2, Property::kOcr).size(), 1u);
}

TEST(BuildIdentifiers, Errors) {
  EmbeddingProvider emb(16, 11);
  EXPECT_THROW(build_identifiers(Corpus(), emb, small_config(CodeScheme::kPq)), ValidationError);
  IndexConfig bad = small_config(CodeScheme::kPq);
  bad.embed_dim = 32;
  EXPECT_THROW(build_identifiers(testing::tiny_corpus(), emb, bad), ConfigError);
  IndexConfig long_code = small_config(CodeScheme::kRq);
  long_code.m = 16;
  EXPECT_THROW(build_identifiers(testing::tiny_corpus(), emb, long_code), ConfigError);
}

TEST(StickerIndex, MissingBundleNamesProducer) {
  try {
    StickerIndex::load("/nonexistent/index");
    FAIL();
  } catch (const DependencyError& e) {
    EXPECT_NE(std::string(e.what()).find("build-index"), std::string::npos);
  }
}

TEST(StickerIndex, FindById) {
  Corpus c = testing::tiny_corpus();
  EmbeddingProvider emb(16, 11);
  auto idx = build_identifiers(c, emb, small_config(CodeScheme::kAtomic));
  EXPECT_EQ(idx.find("s4"), std::optional<std::size_t>(4));
  EXPECT_FALSE(idx.find("s9"));
}

}  // namespace
}  // namespace stickergen
