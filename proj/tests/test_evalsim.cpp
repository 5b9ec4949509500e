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

#include "stickergen/evalsim.hpp"

namespace stickergen {
namespace {

std::vector<std::string> ids(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// First seed whose coin gives the first slot to `owner`.
std::uint64_t seed_starting_with(Owner owner) {
  for (std::uint64_t s = 0;; ++s)
    if (balanced_interleave({"a"}, {"b"}, s).items.front().owner == owner) return s;
}

TEST(Offline, MrrAndRecallDefinitions) {
  std::set<std::string> rel = {"r1", "r2", "r3", "r4", "r5"};
  EXPECT_DOUBLE_EQ(mrr_at_k({"x", "y", "r1", "r2"}, rel, 10), 1.0 / 3.0);
  EXPECT_EQ(mrr_at_k({"x", "y", "r1"}, rel, 2), 0.0);
  EXPECT_EQ(recall_at_k({"x", "y", "r1"}, rel, 2), 0.0);
  std::vector<std::string> list = {"a", "r1", "b", "c", "r3", "d", "e", "f", "g", "h", "r2"};
  EXPECT_DOUBLE_EQ(recall_at_k(list, rel, 10), 0.4);
  EXPECT_DOUBLE_EQ(recall_at_k({"r1", "r1"}, rel, 2), 0.2);
  EXPECT_THROW(mrr_at_k({"a"}, {}, 10), EvaluationError);
  EXPECT_THROW(recall_at_k({"a"}, rel, 0), EvaluationError);
}

TEST(Offline, TableHasEightColumnsAndAverages) {
  std::vector<QueryJudgments> js = {{UserGroup{}, "q1", {"a"}}, {UserGroup{}, "q2", {"b", "z"}}};
  Ranker r = [](UserGroup, const std::string& q) {
    return q == "q1" ? std::vector<std::string>{"a"} : std::vector<std::string>{"x", "b"};
  };
  auto t = run_offline_eval(r, js);
  EXPECT_EQ(t.columns().size(), 8u);
  EXPECT_EQ(t.columns()[2], "MRR@10");
  EXPECT_EQ(t.columns()[7], "Recall@20");
  EXPECT_DOUBLE_EQ(t.mrr_at(1), 0.5);
  EXPECT_DOUBLE_EQ(t.mrr_at(10), 0.75);
  EXPECT_DOUBLE_EQ(t.recall[2], 0.75);
  EXPECT_EQ(t.pairs, 2u);
  EXPECT_THROW(t.mrr_at(3), EvaluationError);
  EXPECT_THROW(run_offline_eval(r, {}), EvaluationError);
  std::ostringstream os;
  write_metric_table(os, {{"sys", t}});
  EXPECT_NE(os.str().find("Recall@5"), std::string::npos);
}

TEST(Interleave, AlternatingTrace) {
  auto s = balanced_interleave({"a1", "a2"}, {"b1", "b2"}, seed_starting_with(Owner::kP));
  std::vector<InterleavedItem> expect = {{"a1", Owner::kP}, {"b1", Owner::kB}, {"a2", Owner::kP}, {"b2", Owner::kB}};
  EXPECT_EQ(s.items, expect);
}

TEST(Interleave, SkipsSeenItems) {
  auto s = balanced_interleave({"x", "a2"}, {"x", "b2"}, seed_starting_with(Owner::kP));
  std::vector<InterleavedItem> expect = {{"x", Owner::kP}, {"b2", Owner::kB}, {"a2", Owner::kP}};
  EXPECT_EQ(s.items, expect);
}

TEST(Interleave, CoinToB) {
  auto s = balanced_interleave({"a1", "a2"}, {"b1", "b2"}, seed_starting_with(Owner::kB));
  std::vector<InterleavedItem> expect = {{"b1", Owner::kB}, {"a1", Owner::kP}, {"b2", Owner::kB}, {"a2", Owner::kP}};
  EXPECT_EQ(s.items, expect);
}

TEST(Interleave, DisjointTopTenGivesTwenty) {
  auto s = balanced_interleave(ids("p", 10), ids("b", 10), 3);
  EXPECT_EQ(s.items.size(), 20u);
}

TEST(Interleave, ExhaustedDrafterYields) {
  auto s = balanced_interleave({"a"}, {"b1", "b2", "b3"}, seed_starting_with(Owner::kP));
  ASSERT_EQ(s.items.size(), 4u);
  EXPECT_EQ(s.items[2].sticker_id, "b2");
  EXPECT_EQ(s.items[3].sticker_id, "b3");
}

TEST(Interleave, PreservesOrderAndCoinIsFair) {
  std::size_t p_first = 0;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    Rng rng(seed * 7 + 1);
    auto p = ids("i", 10), b = ids("i", 14);
    rng.shuffle(p);
    rng.shuffle(b);
    b.resize(10);
    auto s = balanced_interleave(p, b, seed);
    std::set<std::string> all(p.begin(), p.end());
    all.insert(b.begin(), b.end());
    ASSERT_EQ(s.items.size(), all.size());
    for (Owner o : {Owner::kP, Owner::kB}) {
      const auto& src = o == Owner::kP ? p : b;
      long last = -1;
      for (const auto& it : s.items)
        if (it.owner == o) {
          long pos = long(std::find(src.begin(), src.end(), it.sticker_id) - src.begin());
          ASSERT_LT(pos, long(src.size()));
          EXPECT_GT(pos, last);
          last = pos;
        }
    }
    p_first += s.items.front().owner == Owner::kP;
  }
  EXPECT_NEAR(double(p_first) / 2000.0, 0.5, 0.05);
}

TEST(Clicks, NoRelevantNoClicks) {
  auto s = balanced_interleave(ids("p", 10), ids("b", 10), 1);
  Rng rng(2);
  EXPECT_TRUE(simulate_clicks(s, {}, ClickModelConfig{}, rng).empty());
}

TEST(Clicks, AlwaysExaminedAllRelevantClicksEverything) {
  auto s = balanced_interleave(ids("p", 10), ids("b", 10), 1);
  std::set<std::string> rel;
  for (const auto& it : s.items) rel.insert(it.sticker_id);
  ClickModelConfig cfg;
  cfg.curve = ExaminationCurve::kAlways;
  Rng rng(4);
  auto c = simulate_clicks(s, rel, cfg, rng);
  ASSERT_EQ(c.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(c[i], i + 1);
}

TEST(Clicks, ExaminationCurveMonteCarlo) {
  auto s = balanced_interleave(ids("p", 5), ids("b", 5), 1);
  std::set<std::string> rel;
  for (const auto& it : s.items) rel.insert(it.sticker_id);
  ClickModelConfig logc, always;
  always.curve = ExaminationCurve::kAlways;
  std::array<double, 11> hits{}, base{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    Rng a(derive_seed(1, std::to_string(i))), b(derive_seed(2, std::to_string(i)));
    for (auto pos : simulate_clicks(s, rel, logc, a)) hits[pos] += 1;
    for (auto pos : simulate_clicks(s, rel, always, b)) base[pos] += 1;
  }
  EXPECT_EQ(hits[1], base[1]);
  EXPECT_NEAR(hits[3] / base[3], 0.5, 0.02);
  EXPECT_NEAR(hits[4] / base[4], 1.0 / std::log2(5.0), 0.02);
}

TEST(Clicks, DeterministicPerSeed) {
  auto s = balanced_interleave(ids("p", 10), ids("b", 10), 1);
  std::set<std::string> rel = {"p0", "b3", "p7"};
  Rng a(9), b(9);
  EXPECT_EQ(simulate_clicks(s, rel, {}, a), simulate_clicks(s, rel, {}, b));
}

TEST(Deltas, FormulaExamples) {
  QueryOutcome q;
  q.exposures_p = 10;
  q.clicks_p = 3;
  q.exposures_b = 10;
  q.clicks_b = 2;
  EXPECT_NEAR(delta_ctr({q}), 0.1, 1e-12);

  QueryOutcome a;
  a.clicks_p = 2;
  a.click_pos_sum_p = 1 + 3;
  a.clicks_b = 1;
  a.click_pos_sum_b = 4;
  EXPECT_DOUBLE_EQ(delta_acp({a}), -2.0);

  EXPECT_DOUBLE_EQ(delta_gsb({3, 1, 1}), 0.4);
}

TEST(Deltas, AcpDropsOneSidedQueries) {
  QueryOutcome a, b;
  a.clicks_p = 1;
  a.click_pos_sum_p = 2;
  a.clicks_b = 1;
  a.click_pos_sum_b = 5;
  b.clicks_p = 3;
  b.click_pos_sum_p = 6;
  std::size_t used = 0;
  EXPECT_DOUBLE_EQ(delta_acp({a, b}, &used), -3.0);
  EXPECT_EQ(used, 1u);
  EXPECT_THROW(delta_acp({b}), EvaluationError);
  EXPECT_THROW(delta_ctr({}), EvaluationError);
  EXPECT_THROW(delta_gsb({}), EvaluationError);
}

TEST(Deltas, AccumulateCreditsDrafter) {
  SessionRecord s;
  s.items = {{"a", Owner::kP}, {"b", Owner::kB}, {"c", Owner::kP}};
  s.clicks = {1, 2, 3};
  QueryOutcome q;
  accumulate(q, s);
  EXPECT_EQ(q.exposures_p, 2u);
  EXPECT_EQ(q.exposures_b, 1u);
  EXPECT_EQ(q.clicks_p, 2u);
  EXPECT_DOUBLE_EQ(q.click_pos_sum_p, 4.0);
  EXPECT_DOUBLE_EQ(q.click_pos_sum_b, 2.0);
}

std::vector<QueryJudgments> sim_queries() {
  std::vector<QueryJudgments> qs;
  for (std::size_t i = 0; i < 50; ++i) {
    QueryJudgments j{UserGroup::from_index(i % 8), "q" + std::to_string(i), {}};
    for (std::size_t r = 0; r < 8; ++r) j.relevant_ids.push_back("rel" + std::to_string(i) + "_" + std::to_string(r));
    std::sort(j.relevant_ids.begin(), j.relevant_ids.end());
    qs.push_back(j);
  }
  return qs;
}

// Ten items per list. The leading list puts four relevant items on top; the
// trailing list puts four different relevant items at the bottom.
std::vector<std::string> mixed_list(const std::string& q, bool relevant_first) {
  std::string n = q.substr(1);
  std::vector<std::string> rel, other;
  for (std::size_t r = 0; r < 4; ++r) rel.push_back("rel" + n + "_" + std::to_string(relevant_first ? r : r + 4));
  for (std::size_t r = 0; r < 6; ++r) other.push_back("junk" + n + "_" + std::to_string(r));
  std::vector<std::string> out = relevant_first ? rel : other;
  const auto& tail = relevant_first ? other : rel;
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

TEST(OnlineSim, IdenticalRankersNull) {
  Ranker r = [](UserGroup, const std::string& q) { return mixed_list(q, q.size() % 2 == 0); };
  OnlineSimConfig cfg;
  cfg.bootstrap = 200;
  auto rep = run_online_sim(r, r, sim_queries(), cfg);
  EXPECT_EQ(rep.sessions, 10000u);
  EXPECT_LT(std::abs(rep.ctr), 0.01);
  EXPECT_LT(std::abs(rep.gsb), 0.02);
  EXPECT_LE(rep.ctr_ci.lo, rep.ctr_ci.hi);
}

TEST(OnlineSim, DominatingRanker) {
  Ranker good = [](UserGroup, const std::string& q) { return mixed_list(q, true); };
  Ranker bad = [](UserGroup, const std::string& q) {
    auto l = mixed_list(q, false);
    for (auto& s : l)
      if (s.rfind("junk", 0) == 0) s = "other" + s;
    return l;
  };
  OnlineSimConfig cfg;
  cfg.bootstrap = 200;
  auto rep = run_online_sim(good, bad, sim_queries(), cfg);
  EXPECT_GT(rep.ctr, 0.0);
  ASSERT_TRUE(rep.acp_defined);
  EXPECT_LT(rep.acp, 0.0);
  EXPECT_GE(rep.gsb, -1.0);
  EXPECT_LE(rep.gsb, 1.0);
  EXPECT_GE(rep.ctr, -1.0);
  EXPECT_LE(rep.ctr, 1.0);
  auto j = rep.to_json();
  EXPECT_TRUE(j.contains("delta_acp_ci"));
  std::ostringstream os;
  write_delta_report(os, rep);
  EXPECT_NE(os.str().find("dGSB"), std::string::npos);
}

TEST(OnlineSim, PureFunctionOfSeed) {
  Ranker a = [](UserGroup, const std::string& q) { return mixed_list(q, true); };
  Ranker b = [](UserGroup, const std::string& q) { return mixed_list(q, false); };
  OnlineSimConfig cfg;
  cfg.sessions = 500;
  cfg.bootstrap = 50;
  auto r1 = run_online_sim(a, b, sim_queries(), cfg);
  auto r2 = run_online_sim(a, b, sim_queries(), cfg);
  EXPECT_EQ(r1.to_json(), r2.to_json());
  cfg.seed = 30;
  EXPECT_NE(run_online_sim(a, b, sim_queries(), cfg).to_json().dump(), r1.to_json().dump());
}

TEST(OnlineSim, Errors) {
  Ranker r = [](UserGroup, const std::string&) { return std::vector<std::string>{}; };
  EXPECT_THROW(run_online_sim(r, r, {}, {}), EvaluationError);
  OnlineSimConfig cfg;
  cfg.sessions = 0;
  EXPECT_THROW(run_online_sim(r, r, sim_queries(), cfg), EvaluationError);
}

TEST(Utility, CountsRelevantInTopTen) {
  std::vector<std::string> l = ids("x", 12);
  EXPECT_EQ(session_utility(l, {"x0", "x9", "x11"}), 2.0);
}

}  // namespace
}  // namespace stickergen
