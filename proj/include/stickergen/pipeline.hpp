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

// Run configuration and the end-to-end stages shared by the command line tool
// and the benchmark harness.
//
// A RunConfig is a flat key=value map over a fixed key set. Every key has a
// default; files and --set overrides may only name known keys. All stage
// seeds are derived from the root `seed` by name.

#pragma once

#include <fstream>
#include <memory>

#include "json.hpp"
#include "stickergen/evalsim.hpp"
#include "stickergen/intent.hpp"
#include "stickergen/retrieve.hpp"

namespace stickergen {

class RunConfig {
 public:
  RunConfig() : values_(defaults()) {}

  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"seed", "7"},
        {"data.stickers", "1000"},
        {"data.train_pairs", "480"},
        {"data.test_pairs", "160"},
        {"data.logs_per_group", "240"},
        {"data.dominant_mass", "0.86"},
        {"embed.dim", "64"},
        {"embed.vectors", ""},
        {"index.scheme", "pq"},
        {"index.m", "8"},
        {"index.k", "16"},
        {"user.steps", "300"},
        {"user.hidden", "128"},
        {"user.lr", "0.001"},
        {"user.tasks", "click,intent,interest"},
        {"model.d_model", "64"},
        {"model.ff", "128"},
        {"train.epochs", "30"},
        {"train.lr", "0.003"},
        {"train.batch_tokens", "256"},
        {"train.ue", "true"},
        {"train.ial", "true"},
        {"retrieve.beam", "10"},
        {"retrieve.topk", "20"},
        {"retrieve.funnel", "true"},
        {"intent.mode", "table-first"},
        {"intent.concurrency", "4"},
        {"sim.sessions", "10000"},
        {"sim.bootstrap", "1000"},
    };
    return d;
  }

  void set(const std::string& key, const std::string& value) {
    if (!defaults().count(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  /// "key=value" form.
  void set(const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  /// key=value lines; blank lines and '#' comments ignored.
  void merge(std::istream& in) {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      if (trim(line).empty()) continue;
      try {
        set(line);
      } catch (const ConfigError& e) {
        throw ConfigError("config line " + std::to_string(n) + ": " + e.what());
      }
    }
  }

  void merge_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file '" + path + "'");
    merge(in);
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  std::uint64_t u64(const std::string& key) const {
    const auto& v = str(key);
    try {
      std::size_t pos = 0;
      if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
      auto x = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing");
      return x;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' needs a non-negative integer, got '" + v + "'");
    }
  }

  std::size_t size(const std::string& key) const { return std::size_t(u64(key)); }

  std::size_t positive(const std::string& key) const {
    auto x = size(key);
    if (x == 0) throw ConfigError("config key '" + key + "' must be >= 1");
    return x;
  }

  double real(const std::string& key) const {
    const auto& v = str(key);
    try {
      std::size_t pos = 0;
      double x = std::stod(v, &pos);
      if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument("bad");
      return x;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' needs a number, got '" + v + "'");
    }
  }

  bool flag(const std::string& key) const {
    const auto& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "' needs true or false, got '" + v + "'");
  }

  std::uint64_t seed(std::string_view stage) const { return derive_seed(u64("seed"), stage); }

  std::string canonical() const {
    std::string s;
    for (const auto& [k, v] : values_) s += k + "=" + v + "\n";
    return s;
  }
  std::uint64_t hash() const { return fnv1a64(canonical()); }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

/// Report envelope: the resolved config, its hash, then the payload.
inline nlohmann::json report_json(const RunConfig& cfg, const std::string& command, nlohmann::json payload) {
  return {{"command", command}, {"config", cfg.to_json()}, {"config_hash", hex64(cfg.hash())}, {"result", payload}};
}

namespace pipeline {

// -- Stage configs -------------------------------------------------------------

inline SyntheticConfig synthetic_config(const RunConfig& c) {
  SyntheticConfig s;
  s.num_stickers = c.positive("data.stickers");
  s.num_train_pairs = c.positive("data.train_pairs");
  s.num_test_pairs = c.positive("data.test_pairs");
  s.logs_per_group = c.positive("data.logs_per_group");
  s.dominant_mass = c.real("data.dominant_mass");
  s.seed = c.seed("data");
  s.validate();
  return s;
}

inline EmbeddingProvider make_embedder(const RunConfig& c) {
  EmbeddingProvider e(c.positive("embed.dim"), c.seed("embed"));
  if (!c.str("embed.vectors").empty()) e.load_precomputed(c.str("embed.vectors"));
  return e;
}

inline UserRepConfig user_config(const RunConfig& c) {
  UserRepConfig u;
  u.dim = c.positive("model.d_model");
  u.hidden = c.positive("user.hidden");
  u.learning_rate = c.real("user.lr");
  u.steps = c.positive("user.steps");
  u.seed = c.seed("user");
  const auto& tasks = c.str("user.tasks");
  u.use_click = u.use_intent = u.use_interest = false;
  std::size_t start = 0;
  while (start <= tasks.size()) {
    auto comma = tasks.find(',', start);
    std::string t = tasks.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (t == "click") u.use_click = true;
    else if (t == "intent") u.use_intent = true;
    else if (t == "interest") u.use_interest = true;
    else throw ConfigError("unknown user task '" + t + "' (click, intent, interest)");
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return u;
}

inline IndexConfig index_config(const RunConfig& c) {
  IndexConfig i;
  i.scheme = parse_scheme(c.str("index.scheme"));
  i.m = c.positive("index.m");
  i.k = c.positive("index.k");
  i.embed_dim = c.positive("embed.dim");
  i.embed_seed = c.seed("embed");
  i.seed = c.seed("index");
  return i;
}

inline SeqModelConfig model_config(const RunConfig& c) {
  SeqModelConfig m;
  m.d_model = c.positive("model.d_model");
  m.ff = c.positive("model.ff");
  m.use_user_embedding = c.flag("train.ue");
  m.seed = c.seed("model");
  return m;
}

inline TrainingConfig training_config(const RunConfig& c) {
  TrainingConfig t;
  t.epochs = c.positive("train.epochs");
  t.learning_rate = c.real("train.lr");
  t.batch_tokens = c.positive("train.batch_tokens");
  t.use_intent_loss = c.flag("train.ial");
  t.seed = c.seed("train");
  return t;
}

inline RetrieveOptions retrieve_options(const RunConfig& c) {
  RetrieveOptions o;
  o.beam = c.positive("retrieve.beam");
  o.topk = c.positive("retrieve.topk");
  o.mode = c.flag("retrieve.funnel") ? InferenceMode::kFunnel : InferenceMode::kFlat;
  return o;
}

inline OnlineSimConfig sim_config(const RunConfig& c) {
  OnlineSimConfig s;
  s.sessions = c.positive("sim.sessions");
  s.bootstrap = c.size("sim.bootstrap");
  s.seed = c.seed("sim");
  s.clicks.seed = c.seed("clicks");
  return s;
}

// -- Stages ----------------------------------------------------------------------

using RankingFn = std::function<IntentRanking(const std::string&)>;

inline RankingFn table_ranking(const IntentTable& table) {
  return [&table](const std::string& q) {
    auto r = table.find(q);
    if (!r) throw DependencyError("no intent ranking for query '" + q + "' (run resolve-intents)");
    return *r;
  };
}

inline UserRepTrainingResult train_users(const RunConfig& c, const std::vector<ClickLogRecord>& logs,
                                         const Corpus& corpus, const EmbeddingProvider& embed,
                                         const RankingFn& ranking) {
  UserRepModel model(user_config(c));
  auto ex = make_userrep_examples(logs, corpus, embed, [&](const std::string& q) { return ranking(q).at(0); });
  return train_user_embeddings(model, ex);
}

inline std::vector<std::string> query_texts(const std::vector<Triplet>& train, const std::vector<QueryJudgments>& test) {
  std::set<std::string> qs;
  for (const auto& t : train) qs.insert(t.query);
  for (const auto& j : test) qs.insert(j.query);
  return {qs.begin(), qs.end()};
}

inline StickerIndex build_index(const RunConfig& c, const Corpus& corpus, const EmbeddingProvider& embed,
                                const std::vector<std::string>& queries) {
  return build_identifiers(corpus, embed, index_config(c), queries);
}

struct TrainedModel {
  std::unique_ptr<SeqModel> model;
  TrainingReport report;
};

inline TrainedModel train_model(const RunConfig& c, const StickerIndex& index, const Corpus& corpus,
                                const std::vector<Triplet>& train, const RankingFn& ranking,
                                const UserEmbeddingTable* users,
                                const std::function<void(const TrainingLogEntry&)>& on_epoch = {}) {
  auto mc = model_config(c);
  TrainedModel out;
  out.model = std::make_unique<SeqModel>(mc, index.vocab, mc.use_user_embedding ? users : nullptr);
  auto tc = training_config(c);
  auto ix = make_indexing_examples(corpus, index, *out.model);
  auto rx = make_retrieval_examples(train, index, *out.model, ranking, tc.use_intent_loss);
  out.report = train_seqmodel(*out.model, ix, rx, tc, on_epoch);
  return out;
}

inline Ranker make_ranker(const SeqModel& model, const StickerIndex& index, const RankingFn& ranking,
                          const RetrieveOptions& opt) {
  return [&model, &index, ranking, opt](UserGroup g, const std::string& q) {
    return funnel_retrieve(model, index, g, q, ranking(q), opt).ids();
  };
}

// -- In-memory experiment ----------------------------------------------------------

/// Data, planted intents, embeddings and user vectors for one root seed.
struct Experiment {
  RunConfig config;
  SyntheticDataset data;
  IntentTable intents;
  EmbeddingProvider embed{1, 0};
  UserEmbeddingTable users;
  std::vector<std::string> queries;

  static Experiment prepare(const RunConfig& c) {
    Experiment e;
    e.config = c;
    e.data = generate_synthetic(synthetic_config(c));
    e.intents = IntentTable::from_pairs(e.data.intents);
    e.embed = make_embedder(c);
    e.users = train_users(c, e.data.logs, e.data.corpus, e.embed, table_ranking(e.intents)).table;
    e.queries = query_texts(e.data.train, e.data.test);
    return e;
  }
};

struct System {
  StickerIndex index;
  TrainedModel trained;
};

/// Index build and training under `c` (which may differ from the
/// experiment's config in index, model, and training keys).
inline System train_system(const Experiment& e, const RunConfig& c,
                           const std::function<void(const TrainingLogEntry&)>& on_epoch = {}) {
  System s;
  s.index = build_index(c, e.data.corpus, e.embed, e.queries);
  s.trained = train_model(c, s.index, e.data.corpus, e.data.train, table_ranking(e.intents), &e.users, on_epoch);
  return s;
}

inline MetricTable evaluate_system(const Experiment& e, const System& s, const RetrieveOptions& opt) {
  return run_offline_eval(make_ranker(*s.trained.model, s.index, table_ranking(e.intents), opt), e.data.test);
}

}  // namespace pipeline
}  // namespace stickergen
