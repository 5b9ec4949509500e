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

// Constrained decoding over prefix trees and funnel inference.
//
// constrained_search returns the exact top-B complete codes of a tree by
// sequence log-probability. It expands hypotheses best-first: log-probs are
// never positive, so a hypothesis never outscores its parent and complete
// codes leave the queue in final order (score descending, then lexicographic
// code order).

#pragma once

#include <iomanip>
#include <queue>

#include "stickergen/seqmodel.hpp"

namespace stickergen {

struct ScoredCode {
  Code code;
  double logprob = 0.0;
  friend bool operator==(const ScoredCode&, const ScoredCode&) = default;
};

/// `next(prefix)` returns a callable symbol -> log-prob for the token after
/// `prefix` (a code prefix of the searched tree).
template <typename NextLogProbs>
std::vector<ScoredCode> constrained_search(const PrefixTree& tree, std::size_t beam, std::size_t max_steps,
                                           NextLogProbs&& next) {
  if (beam == 0) throw ConfigError("beam size must be >= 1");
  struct Hyp {
    double score;
    Code code;
    std::uint32_t node;
  };
  auto worse = [](const Hyp& a, const Hyp& b) {
    if (a.score != b.score) return a.score < b.score;
    return b.code < a.code;
  };
  std::priority_queue<Hyp, std::vector<Hyp>, decltype(worse)> queue(worse);
  queue.push({0.0, {}, PrefixTree::root()});
  std::vector<ScoredCode> out;
  while (!queue.empty() && out.size() < beam) {
    Hyp h = queue.top();
    queue.pop();
    const auto& node = tree.node(h.node);
    if (node.terminal && !h.code.empty()) out.push_back({h.code, h.score});
    if (node.children.empty() || h.code.size() >= max_steps) continue;
    auto lp = next(h.code);
    for (auto [sym, child] : node.children) {
      Hyp c{h.score + lp(sym), h.code, child};
      c.code.push_back(sym);
      queue.push(std::move(c));
    }
  }
  return out;
}

/// Model-backed search for property `p`.
inline std::vector<ScoredCode> constrained_beam_search(const SeqModel& model, const EncodedQuery& q,
                                                       const PrefixTree& tree, std::size_t beam,
                                                       std::size_t max_steps = kMaxDecodeSteps) {
  if (tree.max_depth() > max_steps)
    throw ConfigError("prefix tree depth " + std::to_string(tree.max_depth()) + " exceeds max decode steps " +
                      std::to_string(max_steps));
  const auto& vocab = model.vocab();
  const Property p = tree.property();
  return constrained_search(tree, beam, max_steps, [&](const Code& prefix) {
    std::vector<std::uint32_t> toks{vocab.prefix_token(p)};
    for (std::size_t j = 0; j < prefix.size(); ++j) toks.push_back(vocab.code_token(j, prefix[j]));
    auto lp = model.next_token_logprobs(toks, q);
    const std::size_t pos = prefix.size();
    return [lp = std::move(lp), &vocab, pos](std::uint32_t sym) {
      return lp[vocab.output_index(vocab.code_token(pos, sym))];
    };
  });
}

// ---------------------------------------------------------------------------
// Funnel.
// ---------------------------------------------------------------------------

enum class InferenceMode { kFunnel, kFlat };

struct RetrieveOptions {
  std::size_t beam = 10;
  std::size_t topk = 20;
  std::size_t max_steps = kMaxDecodeSteps;
  /// kFlat decodes every property once with equal weights and ranks the union
  /// of candidates, without staged intersection.
  InferenceMode mode = InferenceMode::kFunnel;
};

struct StageDiagnostics {
  Property property = Property::kOcr;
  double weight = 1.0;
  std::vector<ScoredCode> codes;
  std::size_t candidates = 0;
  std::size_t survivors = 0;
  bool fallback = false;
};

struct RetrievedSticker {
  std::uint32_t index = 0;
  std::string id;
  double score = 0.0;
  /// Per stage of `stages`: whether this sticker's code was decoded there.
  std::vector<bool> decoded;
};

struct RetrievalResult {
  std::vector<RetrievedSticker> items;
  std::vector<StageDiagnostics> stages;
  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& i : items) out.push_back(i.id);
    return out;
  }
};

namespace detail {

inline void rank_and_cut(const StickerIndex& index, const std::vector<std::uint32_t>& pool,
                         const std::vector<double>& score, const std::vector<std::vector<bool>>& decoded,
                         std::size_t topk, RetrievalResult& res) {
  std::vector<std::uint32_t> order = pool;
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return index.sticker_ids[a] < index.sticker_ids[b];
  });
  if (order.size() > topk) order.resize(topk);
  for (auto s : order) {
    RetrievedSticker r{s, index.sticker_ids[s], score[s], {}};
    for (const auto& d : decoded) r.decoded.push_back(d[s]);
    res.items.push_back(std::move(r));
  }
}

}  // namespace detail

/// Stage i decodes property R[i], expands codes through the posting lists and
/// intersects with the survivors of stage i-1 (all stickers before stage 1).
/// An empty intersection keeps the previous survivors and flags the stage.
/// Survivors are ranked by the sum over stages of d_p times the log-prob of
/// their decoded code (0 where not decoded), ties by sticker id.
inline RetrievalResult funnel_retrieve(const SeqModel& model, const StickerIndex& index,
                                       std::optional<UserGroup> group, std::string_view query,
                                       const std::vector<Property>& stages, const IntentRanking& ranking,
                                       const RetrieveOptions& opt) {
  if (stages.empty()) throw ContractError("funnel needs at least one stage");
  const std::size_t n = index.size();
  EncodedQuery q = model.encode(group, query);
  RetrievalResult res;
  std::vector<double> score(n, 0.0);
  std::vector<std::vector<bool>> decoded;

  if (opt.mode == InferenceMode::kFlat) {
    std::vector<bool> in_union(n, false);
    for (Property p : stages) {
      StageDiagnostics st{p, 1.0, constrained_beam_search(model, q, index.tree(p), opt.beam, opt.max_steps), 0, 0, false};
      std::vector<bool> dec(n, false);
      for (const auto& sc : st.codes)
        for (auto s : index.lookup(p, sc.code)) dec[s] = in_union[s] = true;
      decoded.push_back(std::move(dec));
      res.stages.push_back(std::move(st));
    }
    std::vector<std::uint32_t> pool;
    for (std::uint32_t s = 0; s < n; ++s)
      if (in_union[s]) pool.push_back(s);
    // Every candidate is scored on all stage properties with forced decoding.
    std::map<std::pair<std::size_t, Code>, double> cache;
    for (auto s : pool)
      for (Property p : stages) {
        const Code& c = index.code(s, p);
        auto key = std::make_pair(index_of(p), c);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, model.sequence_logprob(p, index.code_tokens(c), q)).first;
        score[s] += it->second;
      }
    for (auto& st : res.stages) st.candidates = st.survivors = pool.size();
    detail::rank_and_cut(index, pool, score, decoded, opt.topk, res);
    return res;
  }

  std::vector<std::uint32_t> alive(n);
  for (std::uint32_t s = 0; s < n; ++s) alive[s] = s;
  for (Property p : stages) {
    StageDiagnostics st;
    st.property = p;
    st.weight = decay_weight(ranking.rank(p));
    st.codes = constrained_beam_search(model, q, index.tree(p), opt.beam, opt.max_steps);
    std::vector<bool> dec(n, false);
    std::vector<double> lp(n, 0.0);
    for (const auto& sc : st.codes)
      for (auto s : index.lookup(p, sc.code)) {
        dec[s] = true;
        lp[s] = sc.logprob;
        ++st.candidates;
      }
    std::vector<std::uint32_t> next;
    for (auto s : alive)
      if (dec[s]) next.push_back(s);
    if (next.empty()) {
      st.fallback = true;
      next = alive;
    }
    for (auto s : next)
      if (dec[s]) score[s] += st.weight * lp[s];
    st.survivors = next.size();
    alive = std::move(next);
    decoded.push_back(std::move(dec));
    res.stages.push_back(std::move(st));
  }
  detail::rank_and_cut(index, alive, score, decoded, opt.topk, res);
  return res;
}

/// Full funnel over all five properties in ranking order.
inline RetrievalResult funnel_retrieve(const SeqModel& model, const StickerIndex& index,
                                       std::optional<UserGroup> group, std::string_view query,
                                       const IntentRanking& ranking, const RetrieveOptions& opt) {
  std::vector<Property> stages(ranking.order().begin(), ranking.order().end());
  return funnel_retrieve(model, index, group, query, stages, ranking, opt);
}

// ---------------------------------------------------------------------------
// Output.
// ---------------------------------------------------------------------------

inline nlohmann::json result_records(const RetrievalResult& r, std::optional<UserGroup> group, std::string_view query) {
  auto out = nlohmann::json::array();
  for (std::size_t i = 0; i < r.items.size(); ++i) {
    const auto& it = r.items[i];
    nlohmann::json stages = nlohmann::json::array();
    for (std::size_t s = 0; s < r.stages.size(); ++s)
      stages.push_back({{"property", std::string(1, property_symbol(r.stages[s].property))},
                        {"decoded", bool(it.decoded[s])},
                        {"fallback", r.stages[s].fallback}});
    out.push_back({{"query", std::string(query)},
                   {"group", group ? group->name() : ""},
                   {"rank", i + 1},
                   {"sticker_id", it.id},
                   {"score", it.score},
                   {"stages", stages}});
  }
  return out;
}

inline void write_result_jsonl(std::ostream& os, const RetrievalResult& r, std::optional<UserGroup> group,
                               std::string_view query) {
  for (const auto& rec : result_records(r, group, query)) os << rec.dump() << "\n";
}

inline void write_result_table(std::ostream& os, const RetrievalResult& r) {
  os << "stage  prop  weight  codes  candidates  survivors  fallback\n";
  for (std::size_t s = 0; s < r.stages.size(); ++s) {
    const auto& st = r.stages[s];
    os << std::setw(5) << s + 1 << "  " << std::setw(4) << property_symbol(st.property) << "  " << std::fixed
       << std::setprecision(4) << st.weight << "  " << std::setw(5) << st.codes.size() << "  " << std::setw(10)
       << st.candidates << "  " << std::setw(9) << st.survivors << "  " << (st.fallback ? "yes" : "no") << "\n";
  }
  os << "\nrank  sticker_id  score\n";
  for (std::size_t i = 0; i < r.items.size(); ++i)
    os << std::setw(4) << i + 1 << "  " << std::setw(10) << r.items[i].id << "  " << std::setprecision(6)
       << r.items[i].score << "\n";
  os.unsetf(std::ios::fixed);
}

}  // namespace stickergen
