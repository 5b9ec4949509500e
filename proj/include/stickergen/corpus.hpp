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

// Sticker corpus, user click logs, labeled triplets and evaluation judgments,
// stored as JSON lines (one record per line, named fields).

#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "stickergen/common.hpp"

namespace stickergen {

struct Sticker {
  std::string id;
  std::string ocr;
  std::string ip;
  std::string entity;
  std::string style;
  std::string meaning;

  const std::string& text(Property p) const {
    switch (p) {
      case Property::kOcr: return ocr;
      case Property::kIp: return ip;
      case Property::kEntity: return entity;
      case Property::kStyle: return style;
      case Property::kMeaning: return meaning;
    }
    return meaning;
  }
  std::string& text(Property p) { return const_cast<std::string&>(std::as_const(*this).text(p)); }

  friend bool operator==(const Sticker&, const Sticker&) = default;
};

struct CorpusStats {
  std::size_t stickers = 0;
  std::size_t distinct_ips = 0;
  std::size_t distinct_entities = 0;
  std::size_t distinct_styles = 0;
  std::array<std::size_t, kNumProperties> empty_fields{};
};

/// Immutable after construction; lookups by id are O(1).
class Corpus {
 public:
  Corpus() = default;

  /// Throws ValidationError on a duplicated sticker id.
  explicit Corpus(std::vector<Sticker> stickers) : stickers_(std::move(stickers)) {
    by_id_.reserve(stickers_.size());
    for (std::size_t i = 0; i < stickers_.size(); ++i) {
      if (!by_id_.emplace(stickers_[i].id, i).second)
        throw ValidationError("duplicate sticker id '" + stickers_[i].id + "'");
    }
  }

  std::size_t size() const { return stickers_.size(); }
  bool empty() const { return stickers_.empty(); }
  const std::vector<Sticker>& stickers() const { return stickers_; }
  const Sticker& operator[](std::size_t i) const { return stickers_[i]; }

  bool contains(const std::string& id) const { return by_id_.count(id) != 0; }
  std::optional<std::size_t> find(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }
  const Sticker& at(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw ValidationError("unknown sticker id '" + id + "'");
    return stickers_[it->second];
  }

  /// Distinct non-empty values of a property, sorted.
  std::vector<std::string> lexicon(Property p) const {
    std::set<std::string> s;
    for (const auto& st : stickers_)
      if (!st.text(p).empty()) s.insert(st.text(p));
    return {s.begin(), s.end()};
  }

  CorpusStats stats() const {
    CorpusStats out;
    out.stickers = stickers_.size();
    out.distinct_ips = lexicon(Property::kIp).size();
    out.distinct_entities = lexicon(Property::kEntity).size();
    out.distinct_styles = lexicon(Property::kStyle).size();
    for (const auto& st : stickers_)
      for (Property p : kAllProperties)
        if (st.text(p).empty()) ++out.empty_fields[index_of(p)];
    return out;
  }

 private:
  std::vector<Sticker> stickers_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct UserProfile {
  UserGroup group;
  std::set<std::string> ip_history;
  std::set<std::string> entity_history;
  friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

struct ClickLogRecord {
  UserProfile profile;
  std::string query;
  std::string sticker_id;
  bool clicked = false;
  friend bool operator==(const ClickLogRecord&, const ClickLogRecord&) = default;
};

/// A positive (group, query, sticker) judgment used for training.
struct Triplet {
  UserGroup group;
  std::string query;
  std::string sticker_id;
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Evaluation container: every relevant sticker for one (group, query) pair.
struct QueryJudgments {
  UserGroup group;
  std::string query;
  std::vector<std::string> relevant_ids;  // sorted, non-empty
  friend bool operator==(const QueryJudgments&, const QueryJudgments&) = default;
};

// ---------------------------------------------------------------------------
// JSON-lines IO.
// ---------------------------------------------------------------------------

namespace jsonl {

using nlohmann::json;

inline std::string require_string(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field '") + key + "'", line);
  if (!it->is_string()) throw ParseError(std::string("field '") + key + "' must be a string", line);
  return it->get<std::string>();
}

inline std::vector<std::string> require_strings(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field '") + key + "'", line);
  if (!it->is_array()) throw ParseError(std::string("field '") + key + "' must be an array", line);
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw ParseError(std::string("field '") + key + "' holds a non-string", line);
    out.push_back(v.get<std::string>());
  }
  return out;
}

inline UserGroup require_group(const json& j, std::size_t line) {
  try {
    return UserGroup::parse(require_string(j, "group", line));
  } catch (const ParseError& e) {
    if (e.line()) throw;
    throw ParseError(e.what(), line);
  }
}

/// Calls fn(json, line_number) for every non-blank line.
template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), n);
    }
    if (!j.is_object()) throw ParseError("record is not an object", n);
    fn(j, n);
  }
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

inline json to_json(const Sticker& s) {
  return json{{"id", s.id}, {"ocr", s.ocr}, {"ip", s.ip}, {"entity", s.entity},
              {"style", s.style}, {"meaning", s.meaning}};
}

inline json to_json(const ClickLogRecord& r) {
  return json{{"group", r.profile.group.name()},
              {"ip_history", r.profile.ip_history},
              {"entity_history", r.profile.entity_history},
              {"query", r.query},
              {"sticker_id", r.sticker_id},
              {"clicked", r.clicked}};
}

inline json to_json(const Triplet& t) {
  return json{{"group", t.group.name()}, {"query", t.query}, {"sticker_id", t.sticker_id}};
}

inline json to_json(const QueryJudgments& q) {
  return json{{"group", q.group.name()}, {"query", q.query}, {"relevant", q.relevant_ids}};
}

template <typename T>
void write_records(std::ostream& out, const std::vector<T>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

template <typename T>
void write_records(const std::string& path, const std::vector<T>& records) {
  auto out = open_out(path);
  write_records(out, records);
}

}  // namespace jsonl

struct LoadReport {
  std::vector<std::string> warnings;
};

inline Corpus read_corpus(std::istream& in, LoadReport* report = nullptr) {
  std::vector<Sticker> stickers;
  std::set<std::string> seen;
  jsonl::for_each_record(in, [&](const jsonl::json& j, std::size_t line) {
    Sticker s;
    s.id = jsonl::require_string(j, "id", line);
    if (s.id.empty()) throw ParseError("empty sticker id", line);
    for (Property p : kAllProperties)
      s.text(p) = jsonl::require_string(j, std::string(property_name(p)).c_str(), line);
    if (!seen.insert(s.id).second)
      throw ValidationError("duplicate sticker id '" + s.id + "' at line " + std::to_string(line));
    stickers.push_back(std::move(s));
  });
  if (stickers.empty() && report) report->warnings.push_back("corpus is empty");
  return Corpus(std::move(stickers));
}

/// Loads a corpus file. Malformed lines raise ParseError with the line number;
/// duplicate ids raise ValidationError naming the id.
inline Corpus load_corpus(const std::string& path, LoadReport* report = nullptr) {
  auto in = jsonl::open_in(path);
  return read_corpus(in, report);
}

inline void save_corpus(const std::string& path, const Corpus& corpus) {
  jsonl::write_records(path, corpus.stickers());
}

namespace detail {

inline void check_resolves(const Corpus& corpus, const std::string& id, std::size_t line) {
  if (!corpus.contains(id))
    throw ValidationError("line " + std::to_string(line) + ": sticker id '" + id +
                          "' does not resolve in the corpus");
}

}  // namespace detail

inline std::vector<ClickLogRecord> load_click_logs(const std::string& path, const Corpus& corpus) {
  auto in = jsonl::open_in(path);
  std::vector<ClickLogRecord> out;
  jsonl::for_each_record(in, [&](const jsonl::json& j, std::size_t line) {
    ClickLogRecord r;
    r.profile.group = jsonl::require_group(j, line);
    for (auto& s : jsonl::require_strings(j, "ip_history", line)) r.profile.ip_history.insert(s);
    for (auto& s : jsonl::require_strings(j, "entity_history", line))
      r.profile.entity_history.insert(s);
    r.query = jsonl::require_string(j, "query", line);
    r.sticker_id = jsonl::require_string(j, "sticker_id", line);
    auto it = j.find("clicked");
    if (it == j.end() || !it->is_boolean()) throw ParseError("field 'clicked' must be a boolean", line);
    r.clicked = it->get<bool>();
    detail::check_resolves(corpus, r.sticker_id, line);
    out.push_back(std::move(r));
  });
  return out;
}

inline std::vector<Triplet> load_triplets(const std::string& path, const Corpus& corpus) {
  auto in = jsonl::open_in(path);
  std::vector<Triplet> out;
  jsonl::for_each_record(in, [&](const jsonl::json& j, std::size_t line) {
    Triplet t{jsonl::require_group(j, line), jsonl::require_string(j, "query", line),
              jsonl::require_string(j, "sticker_id", line)};
    detail::check_resolves(corpus, t.sticker_id, line);
    out.push_back(std::move(t));
  });
  return out;
}

inline std::vector<QueryJudgments> load_judgments(const std::string& path, const Corpus& corpus) {
  auto in = jsonl::open_in(path);
  std::vector<QueryJudgments> out;
  jsonl::for_each_record(in, [&](const jsonl::json& j, std::size_t line) {
    QueryJudgments q{jsonl::require_group(j, line), jsonl::require_string(j, "query", line),
                     jsonl::require_strings(j, "relevant", line)};
    if (q.relevant_ids.empty()) throw ValidationError("line " + std::to_string(line) + ": empty relevant set");
    for (const auto& id : q.relevant_ids) detail::check_resolves(corpus, id, line);
    std::sort(q.relevant_ids.begin(), q.relevant_ids.end());
    out.push_back(std::move(q));
  });
  return out;
}

/// Ground-truth intent per query, tab separated: "<query>\t<5 symbols>".
inline void write_intent_lines(std::ostream& out,
                               const std::vector<std::pair<std::string, IntentRanking>>& rows) {
  for (const auto& [q, r] : rows) out << q << '\t' << r.symbols() << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic benchmark generation.
//
// IPs are partitioned into clusters; every user group has a row in the
// preference matrix giving the probability that one of its positives comes
// from each cluster. Queries are composed from lexicon values of one or two
// properties and carry a planted intent ranking. A sticker is relevant to a
// (group, query) pair when it matches every constrained property and, if the
// query leaves the IP open, its IP lies in the group's dominant cluster.
// ---------------------------------------------------------------------------

struct SyntheticConfig {
  std::size_t num_stickers = 1000;
  std::size_t num_ips = 32;
  std::size_t num_ip_clusters = 8;
  std::size_t num_entities = 24;
  std::size_t num_styles = 8;
  std::size_t num_emotions = 20;
  std::size_t num_train_pairs = 480;
  std::size_t num_test_pairs = 160;
  std::size_t triplets_per_pair = 6;
  std::size_t logs_per_group = 240;
  /// Rows: user groups (8); columns: IP clusters. Empty means the default
  /// planted matrix (dominant cluster g mod C with `dominant_mass`).
  std::vector<std::vector<double>> preference;
  double dominant_mass = 0.86;
  std::uint64_t seed = 7;

  std::vector<std::vector<double>> resolved_preference() const {
    if (!preference.empty()) return preference;
    std::vector<std::vector<double>> m(kNumGroups, std::vector<double>(num_ip_clusters, 0.0));
    double rest = num_ip_clusters > 1 ? (1.0 - dominant_mass) / double(num_ip_clusters - 1) : 0.0;
    for (std::size_t g = 0; g < kNumGroups; ++g)
      for (std::size_t c = 0; c < num_ip_clusters; ++c)
        m[g][c] = (c == g % num_ip_clusters) ? (num_ip_clusters > 1 ? dominant_mass : 1.0) : rest;
    return m;
  }

  /// Throws ConfigError on an unusable configuration.
  void validate() const {
    if (num_stickers == 0) throw ConfigError("num_stickers must be > 0");
    if (num_ips == 0 || num_ip_clusters == 0 || num_ip_clusters > num_ips)
      throw ConfigError("need 0 < num_ip_clusters <= num_ips");
    if (num_entities == 0 || num_styles == 0 || num_emotions == 0)
      throw ConfigError("lexicon sizes must be > 0");
    if (num_emotions > 24) throw ConfigError("num_emotions must be <= 24");
    if (num_entities > 40) throw ConfigError("num_entities must be <= 40");
    if (num_styles > 12) throw ConfigError("num_styles must be <= 12");
    auto pref = resolved_preference();
    if (pref.size() != kNumGroups) throw ConfigError("preference matrix must have 8 rows");
    for (std::size_t g = 0; g < pref.size(); ++g) {
      if (pref[g].size() != num_ip_clusters)
        throw ConfigError("preference row " + std::to_string(g) + " must have " +
                          std::to_string(num_ip_clusters) + " columns");
      double s = 0.0;
      for (double x : pref[g]) {
        if (!(x >= 0.0)) throw ConfigError("preference entries must be non-negative");
        s += x;
      }
      if (std::abs(s - 1.0) > 1e-9)
        throw ConfigError("preference row " + std::to_string(g) + " sums to " +
                          std::to_string(s) + ", expected 1");
    }
  }
};

struct SyntheticQuery {
  std::string text;
  IntentRanking intent;
  /// Constrained property values; empty string = unconstrained.
  std::array<std::string, kNumProperties> constraint;
  std::string emotion;  // meaning constraint is by emotion word
};

struct SyntheticDataset {
  Corpus corpus;
  std::vector<ClickLogRecord> logs;
  std::vector<Triplet> train;
  std::vector<QueryJudgments> test;
  /// Planted ground-truth intent ranking for every distinct query text.
  std::vector<std::pair<std::string, IntentRanking>> intents;
  /// IP name -> cluster index (for tests and diagnostics).
  std::map<std::string, std::size_t> ip_cluster;
  std::vector<std::vector<double>> preference;
};

namespace synth {

inline const std::vector<std::string>& emotion_words() {
  static const std::vector<std::string> k = {
      "happy", "sad", "angry", "shy", "tired", "excited", "confused", "scared",
      "proud", "bored", "love", "thanks", "sorry", "hello", "goodbye", "goodnight",
      "awkward", "crying", "laughing", "surprised", "hungry", "sleepy", "cool", "lonely"};
  return k;
}

inline const std::vector<std::string>& entity_words() {
  static const std::vector<std::string> k = {
      "cat", "dog", "rabbit", "bear", "panda", "duck", "pig", "frog", "penguin", "fox",
      "tiger", "monkey", "heart", "flower", "cake", "coffee", "star", "sun", "moon", "cloud",
      "ghost", "robot", "baby", "girl", "boy", "hamster", "chick", "whale", "dino", "owl",
      "cactus", "pizza", "ball", "rocket", "unicorn", "sheep", "cow", "koala", "otter", "seal"};
  return k;
}

inline const std::vector<std::string>& style_words() {
  static const std::vector<std::string> k = {
      "cute", "funny", "realistic", "pixel art", "hand drawn", "watercolor",
      "cartoon", "minimalist", "3d render", "retro", "sketch", "neon"};
  return k;
}

inline const std::vector<std::string>& meaning_templates() {
  static const std::vector<std::string> k = {"feeling {}", "{} mood", "so {}", "{} vibes"};
  return k;
}

inline const std::vector<std::string>& ocr_templates() {
  static const std::vector<std::string> k = {"{} today", "{} haha", "super {} now"};
  return k;
}

inline std::string fill(const std::string& tmpl, const std::string& word) {
  auto pos = tmpl.find("{}");
  return tmpl.substr(0, pos) + word + tmpl.substr(pos + 2);
}

/// Pronounceable, unique two-word IP names.
inline std::vector<std::string> ip_names(std::size_t n, Rng& rng) {
  static const char* kOnsets[] = {"k", "m", "p", "t", "r", "n", "b", "d", "s", "l", "z", "g"};
  static const char* kVowels[] = {"a", "o", "i", "u", "e"};
  std::set<std::string> used;
  auto word = [&] {
    std::string w;
    for (int s = 0; s < 2; ++s) {
      w += kOnsets[rng.uniform(12)];
      w += kVowels[rng.uniform(5)];
    }
    return w;
  };
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string a = word(), b = word();
    if (a == b || used.count(a) || used.count(b)) continue;
    used.insert(a);
    used.insert(b);
    out.push_back(a + " " + b);
  }
  return out;
}

}  // namespace synth

/// Deterministic synthetic benchmark; a pure function of `config`.
inline SyntheticDataset generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  const auto pref = config.resolved_preference();
  Rng rng(derive_seed(config.seed, "synthetic"));

  const auto ips = synth::ip_names(config.num_ips, rng);
  const std::vector<std::string> entities(synth::entity_words().begin(),
                                          synth::entity_words().begin() + long(config.num_entities));
  const std::vector<std::string> styles(synth::style_words().begin(),
                                        synth::style_words().begin() + long(config.num_styles));
  const std::vector<std::string> emotions(synth::emotion_words().begin(),
                                          synth::emotion_words().begin() + long(config.num_emotions));

  SyntheticDataset ds;
  ds.preference = pref;
  std::vector<std::size_t> cluster_of(config.num_ips);
  std::vector<std::size_t> primary_entity(config.num_ips), primary_style(config.num_ips);
  for (std::size_t i = 0; i < config.num_ips; ++i) {
    cluster_of[i] = i % config.num_ip_clusters;
    ds.ip_cluster[ips[i]] = cluster_of[i];
    primary_entity[i] = rng.uniform(entities.size());
    primary_style[i] = rng.uniform(styles.size());
  }

  // Stickers. Entity and style correlate with the IP; OCR correlates with the
  // meaning's emotion.
  struct Latent {
    std::size_t ip, entity, style, emotion, ocr_emotion, ocr_tmpl;
  };
  std::vector<Latent> latent(config.num_stickers);
  std::vector<Sticker> stickers(config.num_stickers);
  for (std::size_t i = 0; i < config.num_stickers; ++i) {
    Latent& l = latent[i];
    l.ip = rng.uniform(config.num_ips);
    l.entity = rng.bernoulli(0.7) ? primary_entity[l.ip] : rng.uniform(entities.size());
    l.style = rng.bernoulli(0.6) ? primary_style[l.ip] : rng.uniform(styles.size());
    l.emotion = rng.uniform(emotions.size());
    l.ocr_emotion = rng.bernoulli(0.8) ? l.emotion : rng.uniform(emotions.size());
    l.ocr_tmpl = rng.uniform(synth::ocr_templates().size());
    Sticker& s = stickers[i];
    s.id = "s" + std::to_string(i);
    s.ip = ips[l.ip];
    s.entity = entities[l.entity];
    s.style = styles[l.style];
    s.meaning = synth::fill(synth::meaning_templates()[rng.uniform(synth::meaning_templates().size())],
                            emotions[l.emotion]);
    s.ocr = synth::fill(synth::ocr_templates()[l.ocr_tmpl], emotions[l.ocr_emotion]);
  }
  ds.corpus = Corpus(stickers);

  // Query sampler. Kinds: meaning-only, ip(+emotion), entity+emotion,
  // style+emotion, quoted ocr phrase.
  auto make_query = [&](std::size_t group) {
    SyntheticQuery q;
    using P = Property;
    std::size_t kind = rng.categorical({0.35, 0.2, 0.15, 0.15, 0.15});
    std::size_t emo = rng.uniform(emotions.size());
    switch (kind) {
      case 0:
        q.emotion = emotions[emo];
        q.text = emotions[emo];
        q.intent = IntentRanking({P::kMeaning, P::kOcr, P::kIp, P::kEntity, P::kStyle});
        break;
      case 1: {
        // Users mostly ask for IPs they like.
        std::size_t cluster = rng.categorical(pref[group]);
        std::size_t ip = cluster + config.num_ip_clusters * rng.uniform(
                                       (config.num_ips - cluster + config.num_ip_clusters - 1) /
                                       config.num_ip_clusters);
        q.constraint[index_of(P::kIp)] = ips[ip];
        if (rng.bernoulli(0.5)) {
          q.emotion = emotions[emo];
          q.text = ips[ip] + " " + emotions[emo];
          q.intent = IntentRanking({P::kIp, P::kMeaning, P::kEntity, P::kStyle, P::kOcr});
        } else {
          q.text = ips[ip];
          q.intent = IntentRanking({P::kIp, P::kEntity, P::kStyle, P::kMeaning, P::kOcr});
        }
        break;
      }
      case 2: {
        std::size_t e = rng.uniform(entities.size());
        q.constraint[index_of(P::kEntity)] = entities[e];
        q.emotion = emotions[emo];
        q.text = entities[e] + " " + emotions[emo];
        q.intent = IntentRanking({P::kEntity, P::kMeaning, P::kIp, P::kStyle, P::kOcr});
        break;
      }
      case 3: {
        std::size_t v = rng.uniform(styles.size());
        q.constraint[index_of(P::kStyle)] = styles[v];
        q.emotion = emotions[emo];
        q.text = styles[v] + " " + emotions[emo];
        q.intent = IntentRanking({P::kStyle, P::kMeaning, P::kIp, P::kEntity, P::kOcr});
        break;
      }
      default: {
        std::string phrase = synth::fill(
            synth::ocr_templates()[rng.uniform(synth::ocr_templates().size())], emotions[emo]);
        q.constraint[index_of(P::kOcr)] = phrase;
        q.text = "\"" + phrase + "\"";
        q.intent = IntentRanking({P::kOcr, P::kMeaning, P::kIp, P::kEntity, P::kStyle});
        break;
      }
    }
    return q;
  };

  auto matches = [&](const SyntheticQuery& q, std::size_t i) {
    const Sticker& s = stickers[i];
    for (Property p : kAllProperties)
      if (!q.constraint[index_of(p)].empty() && s.text(p) != q.constraint[index_of(p)]) return false;
    if (!q.emotion.empty() && emotions[latent[i].emotion] != q.emotion) return false;
    return true;
  };
  auto dominant = [&](std::size_t g) {
    return static_cast<std::size_t>(
        std::max_element(pref[g].begin(), pref[g].end()) - pref[g].begin());
  };
  auto relevant = [&](const SyntheticQuery& q, std::size_t g) {
    std::vector<std::size_t> out;
    bool ip_open = q.constraint[index_of(Property::kIp)].empty();
    for (std::size_t i = 0; i < stickers.size(); ++i)
      if (matches(q, i) && (!ip_open || cluster_of[latent[i].ip] == dominant(g))) out.push_back(i);
    return out;
  };
  // Positive sampler: the cluster follows the group's preference row.
  auto sample_positive = [&](const SyntheticQuery& q, std::size_t g) -> std::optional<std::size_t> {
    std::vector<std::vector<std::size_t>> by_cluster(config.num_ip_clusters);
    for (std::size_t i = 0; i < stickers.size(); ++i)
      if (matches(q, i)) by_cluster[cluster_of[latent[i].ip]].push_back(i);
    std::vector<double> w(config.num_ip_clusters);
    for (std::size_t c = 0; c < w.size(); ++c) w[c] = by_cluster[c].empty() ? 0.0 : pref[g][c];
    double total = 0.0;
    for (double x : w) total += x;
    if (total <= 0.0) return std::nullopt;
    auto& bucket = by_cluster[rng.categorical(w)];
    return bucket[rng.uniform(bucket.size())];
  };

  std::map<std::string, IntentRanking> planted;
  std::set<std::pair<std::size_t, std::string>> train_pairs;

  // Training triplets.
  for (std::size_t n = 0; n < config.num_train_pairs; ++n) {
    std::size_t g = n % kNumGroups;
    SyntheticQuery q;
    do {
      q = make_query(g);
    } while (relevant(q, g).empty());
    planted.emplace(q.text, q.intent);
    train_pairs.insert({g, q.text});
    for (std::size_t t = 0; t < config.triplets_per_pair; ++t) {
      auto pos = sample_positive(q, g);
      if (pos) ds.train.push_back(Triplet{UserGroup::from_index(g), q.text, stickers[*pos].id});
    }
  }

  // Test judgments on unseen (group, query) pairs.
  std::set<std::pair<std::size_t, std::string>> test_pairs;
  for (std::size_t n = 0; n < config.num_test_pairs; ++n) {
    std::size_t g = n % kNumGroups;
    SyntheticQuery q;
    std::vector<std::size_t> rel;
    for (int attempt = 0;; ++attempt) {
      q = make_query(g);
      rel = relevant(q, g);
      bool fresh = !train_pairs.count({g, q.text}) && !test_pairs.count({g, q.text});
      if (!rel.empty() && (fresh || attempt > 200)) break;
    }
    planted.emplace(q.text, q.intent);
    test_pairs.insert({g, q.text});
    QueryJudgments j{UserGroup::from_index(g), q.text, {}};
    for (std::size_t i : rel) j.relevant_ids.push_back(stickers[i].id);
    std::sort(j.relevant_ids.begin(), j.relevant_ids.end());
    ds.test.push_back(std::move(j));
  }

  // Click logs: positives from the preference sampler, negatives from
  // matching stickers outside the group's dominant cluster.
  for (std::size_t g = 0; g < kNumGroups; ++g) {
    for (std::size_t n = 0; n < config.logs_per_group; ++n) {
      SyntheticQuery q;
      do {
        q = make_query(g);
      } while (relevant(q, g).empty());
      planted.emplace(q.text, q.intent);
      ClickLogRecord r;
      r.profile.group = UserGroup::from_index(g);
      for (int h = 0; h < 3; ++h) {
        std::size_t c = rng.categorical(pref[g]);
        std::size_t ip = c + config.num_ip_clusters *
                                 rng.uniform((config.num_ips - c + config.num_ip_clusters - 1) /
                                             config.num_ip_clusters);
        r.profile.ip_history.insert(ips[ip]);
        r.profile.entity_history.insert(entities[primary_entity[ip]]);
      }
      r.query = q.text;
      bool positive = (n % 2 == 0);
      std::optional<std::size_t> pick;
      if (positive) {
        pick = sample_positive(q, g);
      } else {
        std::vector<std::size_t> neg;
        for (std::size_t i = 0; i < stickers.size(); ++i)
          if (cluster_of[latent[i].ip] != dominant(g) &&
              (matches(q, i) || q.constraint[index_of(Property::kIp)].empty()))
            neg.push_back(i);
        if (!neg.empty()) pick = neg[rng.uniform(neg.size())];
      }
      if (!pick) pick = rng.uniform(stickers.size()), positive = false;
      r.sticker_id = stickers[*pick].id;
      r.clicked = positive;
      ds.logs.push_back(std::move(r));
    }
  }

  ds.intents.assign(planted.begin(), planted.end());
  return ds;
}

/// Writes corpus.jsonl, logs.jsonl, train.jsonl, test.jsonl and intents.tsv.
inline void save_synthetic(const std::string& dir, const SyntheticDataset& ds) {
  save_corpus(dir + "/corpus.jsonl", ds.corpus);
  jsonl::write_records(dir + "/logs.jsonl", ds.logs);
  jsonl::write_records(dir + "/train.jsonl", ds.train);
  jsonl::write_records(dir + "/test.jsonl", ds.test);
  auto out = jsonl::open_out(dir + "/intents.tsv");
  write_intent_lines(out, ds.intents);
}

}  // namespace stickergen
