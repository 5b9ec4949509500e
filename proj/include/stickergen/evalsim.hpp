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

// Offline ranking metrics and a simulated interleaving experiment.
//
// Online protocol: for every session the two systems' top-10 lists are merged
// by balanced interleaving, a position-biased click model clicks examined
// relevant items, and clicks are credited to the drafting system. Per query:
//
//   CTR_X(q)  clicks on X-drafted items / X-drafted exposures
//   ACP_X(q)  mean interleaved position of clicks on X-drafted items
//
// dCTR and dACP average the paired differences over queries; a query where
// either system has no clicks is left out of dACP. dGSB = (G - B)/(G + S + B)
// with one verdict per session from the count of relevant items in each
// system's own top-10.

#pragma once

#include <functional>
#include <iomanip>
#include <set>

#include "json.hpp"
#include "stickergen/corpus.hpp"

namespace stickergen {

// ---------------------------------------------------------------------------
// Offline metrics.
// ---------------------------------------------------------------------------

inline void require_relevant(const std::set<std::string>& relevant, std::size_t k) {
  if (relevant.empty()) throw EvaluationError("relevant set is empty");
  if (k == 0) throw EvaluationError("k must be >= 1");
}

inline double mrr_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& relevant, std::size_t k) {
  require_relevant(relevant, k);
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
    if (relevant.count(ranked[i])) return 1.0 / double(i + 1);
  return 0.0;
}

inline double recall_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& relevant,
                          std::size_t k) {
  require_relevant(relevant, k);
  std::set<std::string> seen;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
    if (relevant.count(ranked[i]) && seen.insert(ranked[i]).second) ++hit;
  return double(hit) / double(relevant.size());
}

using Ranker = std::function<std::vector<std::string>(UserGroup, const std::string&)>;

inline const std::vector<std::size_t>& default_cutoffs() {
  static const std::vector<std::size_t> k = {1, 5, 10, 20};
  return k;
}

struct MetricTable {
  std::vector<std::size_t> ks;
  std::vector<double> mrr, recall;
  std::size_t pairs = 0;

  std::vector<std::string> columns() const {
    std::vector<std::string> out;
    for (auto k : ks) out.push_back("MRR@" + std::to_string(k));
    for (auto k : ks) out.push_back("Recall@" + std::to_string(k));
    return out;
  }
  std::vector<double> values() const {
    std::vector<double> out = mrr;
    out.insert(out.end(), recall.begin(), recall.end());
    return out;
  }
  double mrr_at(std::size_t k) const {
    for (std::size_t i = 0; i < ks.size(); ++i)
      if (ks[i] == k) return mrr[i];
    throw EvaluationError("cutoff " + std::to_string(k) + " not evaluated");
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"pairs", pairs}};
    auto cols = columns();
    auto vals = values();
    for (std::size_t i = 0; i < cols.size(); ++i) j[cols[i]] = vals[i];
    return j;
  }
};

/// Averages MRR@k and Recall@k over the (group, query) pairs.
inline MetricTable run_offline_eval(const Ranker& ranker, const std::vector<QueryJudgments>& judgments,
                                    const std::vector<std::size_t>& ks = default_cutoffs()) {
  if (judgments.empty()) throw EvaluationError("no judgments to evaluate");
  MetricTable t;
  t.ks = ks;
  t.mrr.assign(ks.size(), 0.0);
  t.recall.assign(ks.size(), 0.0);
  for (const auto& j : judgments) {
    std::set<std::string> rel(j.relevant_ids.begin(), j.relevant_ids.end());
    auto ranked = ranker(j.group, j.query);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      t.mrr[i] += mrr_at_k(ranked, rel, ks[i]);
      t.recall[i] += recall_at_k(ranked, rel, ks[i]);
    }
  }
  t.pairs = judgments.size();
  for (auto& x : t.mrr) x /= double(t.pairs);
  for (auto& x : t.recall) x /= double(t.pairs);
  return t;
}

inline void write_metric_table(std::ostream& os, const std::vector<std::pair<std::string, MetricTable>>& rows) {
  if (rows.empty()) return;
  os << std::left << std::setw(16) << "system";
  for (const auto& c : rows[0].second.columns()) os << std::right << std::setw(11) << c;
  os << "\n";
  for (const auto& [name, t] : rows) {
    os << std::left << std::setw(16) << name;
    for (double v : t.values()) os << std::right << std::setw(11) << std::fixed << std::setprecision(4) << v;
    os << "\n";
  }
  os.unsetf(std::ios::fixed);
  os << std::left;
}

// ---------------------------------------------------------------------------
// Interleaving and clicks.
// ---------------------------------------------------------------------------

enum class Owner : std::uint8_t { kP, kB };

struct InterleavedItem {
  std::string sticker_id;
  Owner owner = Owner::kP;
  friend bool operator==(const InterleavedItem&, const InterleavedItem&) = default;
};

struct SessionRecord {
  std::string query;
  std::vector<InterleavedItem> items;
  std::vector<std::size_t> clicks;  // 1-based positions
  double utility_p = 0.0, utility_b = 0.0;
};

/// A fair coin picks the first drafter; drafters then alternate, each
/// appending its highest-ranked item not yet in the list. A drafter with
/// nothing left yields to the other until both are exhausted.
inline SessionRecord balanced_interleave(const std::vector<std::string>& list_p, const std::vector<std::string>& list_b,
                                         Rng& rng) {
  SessionRecord s;
  std::set<std::string> used;
  std::size_t ip = 0, ib = 0;
  Owner turn = rng.bernoulli(0.5) ? Owner::kP : Owner::kB;
  auto next_unseen = [&](const std::vector<std::string>& l, std::size_t& i) -> const std::string* {
    while (i < l.size() && used.count(l[i])) ++i;
    return i < l.size() ? &l[i] : nullptr;
  };
  while (true) {
    const std::string* pp = next_unseen(list_p, ip);
    const std::string* pb = next_unseen(list_b, ib);
    if (!pp && !pb) break;
    if ((turn == Owner::kP && !pp) || (turn == Owner::kB && !pb)) turn = turn == Owner::kP ? Owner::kB : Owner::kP;
    const std::string* pick = turn == Owner::kP ? pp : pb;
    used.insert(*pick);
    s.items.push_back({*pick, turn});
    turn = turn == Owner::kP ? Owner::kB : Owner::kP;
  }
  return s;
}

inline SessionRecord balanced_interleave(const std::vector<std::string>& list_p, const std::vector<std::string>& list_b,
                                         std::uint64_t seed) {
  Rng rng(seed);
  return balanced_interleave(list_p, list_b, rng);
}

enum class ExaminationCurve { kLogarithmic, kAlways };

struct ClickModelConfig {
  ExaminationCurve curve = ExaminationCurve::kLogarithmic;
  /// Examination probability at position pos is min(1, scale / log2(pos + 1)).
  double scale = 1.0;
  /// Items whose relevance (1 relevant, 0 not) reaches this value are clicked
  /// when examined.
  double relevance_threshold = 0.5;
  std::uint64_t seed = 23;

  double examination(std::size_t pos) const {
    if (curve == ExaminationCurve::kAlways) return 1.0;
    return std::clamp(scale / std::log2(double(pos) + 1.0), 0.0, 1.0);
  }
};

inline std::vector<std::size_t> simulate_clicks(const SessionRecord& session, const std::set<std::string>& relevant,
                                                const ClickModelConfig& cfg, Rng& rng) {
  std::vector<std::size_t> clicks;
  for (std::size_t i = 0; i < session.items.size(); ++i) {
    const std::size_t pos = i + 1;
    bool examined = rng.bernoulli(cfg.examination(pos));
    double rel = relevant.count(session.items[i].sticker_id) ? 1.0 : 0.0;
    if (examined && rel >= cfg.relevance_threshold) clicks.push_back(pos);
  }
  return clicks;
}

// ---------------------------------------------------------------------------
// Deltas.
// ---------------------------------------------------------------------------

struct QueryOutcome {
  std::size_t exposures_p = 0, exposures_b = 0;
  std::size_t clicks_p = 0, clicks_b = 0;
  double click_pos_sum_p = 0.0, click_pos_sum_b = 0.0;

  double ctr_p() const { return exposures_p ? double(clicks_p) / double(exposures_p) : 0.0; }
  double ctr_b() const { return exposures_b ? double(clicks_b) / double(exposures_b) : 0.0; }
};

inline void accumulate(QueryOutcome& q, const SessionRecord& s) {
  for (const auto& it : s.items) (it.owner == Owner::kP ? q.exposures_p : q.exposures_b)++;
  for (auto pos : s.clicks) {
    Owner o = s.items.at(pos - 1).owner;
    if (o == Owner::kP) {
      ++q.clicks_p;
      q.click_pos_sum_p += double(pos);
    } else {
      ++q.clicks_b;
      q.click_pos_sum_b += double(pos);
    }
  }
}

inline double delta_ctr(const std::vector<QueryOutcome>& qs) {
  if (qs.empty()) throw EvaluationError("dCTR needs at least one query");
  double s = 0.0;
  for (const auto& q : qs) s += q.ctr_p() - q.ctr_b();
  return s / double(qs.size());
}

/// Throws EvaluationError when every query lacks clicks on one side.
inline double delta_acp(const std::vector<QueryOutcome>& qs, std::size_t* used = nullptr) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& q : qs) {
    if (q.clicks_p == 0 || q.clicks_b == 0) continue;
    s += q.click_pos_sum_p / double(q.clicks_p) - q.click_pos_sum_b / double(q.clicks_b);
    ++n;
  }
  if (used) *used = n;
  if (n == 0) throw EvaluationError("dACP undefined: no query has clicks for both systems");
  return s / double(n);
}

struct GsbCounts {
  std::size_t good = 0, same = 0, bad = 0;
};

inline double delta_gsb(const GsbCounts& c) {
  std::size_t n = c.good + c.same + c.bad;
  if (n == 0) throw EvaluationError("dGSB needs at least one verdict");
  return (double(c.good) - double(c.bad)) / double(n);
}

/// Count of relevant items among the first `depth` entries.
inline double session_utility(const std::vector<std::string>& list, const std::set<std::string>& relevant,
                              std::size_t depth = 10) {
  double u = 0.0;
  for (std::size_t i = 0; i < std::min(depth, list.size()); ++i) u += relevant.count(list[i]) ? 1.0 : 0.0;
  return u;
}

struct Interval {
  double lo = 0.0, hi = 0.0;
};

/// 95% percentile bootstrap over items; `stat` maps a resample to a value.
template <typename T, typename Stat>
Interval bootstrap_ci(const std::vector<T>& items, Stat&& stat, std::size_t resamples, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> vals;
  std::vector<T> sample(items.size());
  for (std::size_t r = 0; r < resamples; ++r) {
    for (auto& s : sample) s = items[rng.uniform(items.size())];
    try {
      vals.push_back(stat(sample));
    } catch (const EvaluationError&) {
    }
  }
  if (vals.empty()) return {};
  std::sort(vals.begin(), vals.end());
  auto at = [&](double q) { return vals[std::min(vals.size() - 1, std::size_t(q * double(vals.size())))]; };
  return {at(0.025), at(0.975)};
}

struct OnlineSimConfig {
  std::size_t sessions = 10000;
  std::size_t list_depth = 10;
  ClickModelConfig clicks;
  std::size_t bootstrap = 1000;
  std::uint64_t seed = 29;
};

struct DeltaReport {
  double ctr = 0.0, acp = 0.0, gsb = 0.0;
  bool acp_defined = false;
  Interval ctr_ci, acp_ci, gsb_ci;
  std::size_t sessions = 0, queries = 0, acp_queries = 0;
  GsbCounts verdicts;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"seed", seed},
                        {"sessions", sessions},
                        {"queries", queries},
                        {"delta_ctr", ctr},
                        {"delta_ctr_ci", {ctr_ci.lo, ctr_ci.hi}},
                        {"delta_gsb", gsb},
                        {"delta_gsb_ci", {gsb_ci.lo, gsb_ci.hi}},
                        {"good", verdicts.good},
                        {"same", verdicts.same},
                        {"bad", verdicts.bad},
                        {"acp_queries", acp_queries}};
    if (acp_defined) {
      j["delta_acp"] = acp;
      j["delta_acp_ci"] = {acp_ci.lo, acp_ci.hi};
    } else {
      j["delta_acp"] = nullptr;
    }
    return j;
  }
};

/// Session i replays judgment i mod |Q| with its own derived seed. Ranker
/// outputs are computed once per (group, query).
inline DeltaReport run_online_sim(const Ranker& ranker_p, const Ranker& ranker_b,
                                  const std::vector<QueryJudgments>& queries, const OnlineSimConfig& cfg) {
  if (queries.empty()) throw EvaluationError("online simulation needs at least one query");
  if (cfg.sessions == 0) throw EvaluationError("online simulation needs at least one session");
  struct Lists {
    std::vector<std::string> p, b;
    std::set<std::string> relevant;
  };
  std::vector<Lists> lists;
  for (const auto& q : queries) {
    Lists l;
    l.p = ranker_p(q.group, q.query);
    l.b = ranker_b(q.group, q.query);
    if (l.p.size() > cfg.list_depth) l.p.resize(cfg.list_depth);
    if (l.b.size() > cfg.list_depth) l.b.resize(cfg.list_depth);
    l.relevant.insert(q.relevant_ids.begin(), q.relevant_ids.end());
    lists.push_back(std::move(l));
  }

  std::vector<QueryOutcome> outcomes(queries.size());
  std::vector<int> verdict_of_session;  // +1 good, 0 same, -1 bad
  DeltaReport rep;
  for (std::size_t i = 0; i < cfg.sessions; ++i) {
    const std::size_t qi = i % queries.size();
    const Lists& l = lists[qi];
    Rng rng(derive_seed(cfg.seed, "session/" + std::to_string(i)));
    SessionRecord s = balanced_interleave(l.p, l.b, rng);
    s.query = queries[qi].query;
    s.clicks = simulate_clicks(s, l.relevant, cfg.clicks, rng);
    s.utility_p = session_utility(l.p, l.relevant, cfg.list_depth);
    s.utility_b = session_utility(l.b, l.relevant, cfg.list_depth);
    accumulate(outcomes[qi], s);
    int v = s.utility_p > s.utility_b ? 1 : (s.utility_p < s.utility_b ? -1 : 0);
    verdict_of_session.push_back(v);
    (v > 0 ? rep.verdicts.good : v < 0 ? rep.verdicts.bad : rep.verdicts.same)++;
  }
  rep.seed = cfg.seed;
  rep.sessions = cfg.sessions;
  rep.queries = std::min(cfg.sessions, queries.size());
  outcomes.resize(rep.queries);
  rep.ctr = delta_ctr(outcomes);
  try {
    rep.acp = delta_acp(outcomes, &rep.acp_queries);
    rep.acp_defined = true;
  } catch (const EvaluationError&) {
    rep.acp_defined = false;
  }
  rep.gsb = delta_gsb(rep.verdicts);

  const std::uint64_t bs = derive_seed(cfg.seed, "bootstrap");
  rep.ctr_ci = bootstrap_ci(outcomes, [](const std::vector<QueryOutcome>& s) { return delta_ctr(s); }, cfg.bootstrap,
                            derive_seed(bs, "ctr"));
  if (rep.acp_defined)
    rep.acp_ci = bootstrap_ci(outcomes, [](const std::vector<QueryOutcome>& s) { return delta_acp(s); },
                              cfg.bootstrap, derive_seed(bs, "acp"));
  rep.gsb_ci = bootstrap_ci(
      verdict_of_session,
      [](const std::vector<int>& vs) {
        GsbCounts c;
        for (int v : vs) (v > 0 ? c.good : v < 0 ? c.bad : c.same)++;
        return delta_gsb(c);
      },
      cfg.bootstrap, derive_seed(bs, "gsb"));
  return rep;
}

inline void write_delta_report(std::ostream& os, const DeltaReport& r) {
  os << std::fixed << std::setprecision(4);
  os << "sessions " << r.sessions << ", queries " << r.queries << ", seed " << r.seed << "\n";
  os << "dCTR  " << std::showpos << r.ctr << std::noshowpos << "  [" << r.ctr_ci.lo << ", " << r.ctr_ci.hi << "]\n";
  if (r.acp_defined)
    os << "dACP  " << std::showpos << r.acp << std::noshowpos << "  [" << r.acp_ci.lo << ", " << r.acp_ci.hi
       << "]  (" << r.acp_queries << " queries)\n";
  else
    os << "dACP  undefined (no query has clicks for both systems)\n";
  os << "dGSB  " << std::showpos << r.gsb << std::noshowpos << "  [" << r.gsb_ci.lo << ", " << r.gsb_ci.hi
     << "]  (G " << r.verdicts.good << " / S " << r.verdicts.same << " / B " << r.verdicts.bad << ")\n";
  os.unsetf(std::ios::fixed);
}

}  // namespace stickergen
