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

// Query intent rankings: an LLM prompt and answer parser, a lexicon rule
// detector, and a cached lookup table.
//
// LLM client environment:
//
//   STICKERGEN_LLM_ENDPOINT   chat-completions URL, e.g. http://host:8000/v1/chat/completions
//   STICKERGEN_LLM_MODEL      model id
//   STICKERGEN_LLM_API_KEY    bearer token (optional)
//   STICKERGEN_LLM_TIMEOUT    seconds (default 30)

#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <regex>
#include <shared_mutex>
#include <thread>

#include <Eigen/Core>  // before httplib: <resolv.h> defines a _res macro

#include "httplib.h"
#include "json.hpp"
#include "stickergen/corpus.hpp"

namespace stickergen {

// ---------------------------------------------------------------------------
// Prompt.
// ---------------------------------------------------------------------------

struct PromptExamples {
  std::string ocr = "\"good morning\", \"thank you boss\"";
  std::string ip = "\"Doraemon\", \"Pikachu\"";
  std::string entity = "\"cat\", \"birthday cake\"";
  std::string style = "\"cute\", \"pixel art\"";
  std::string meaning = "\"happy\", \"feeling tired\"";
};

namespace detail {

inline constexpr std::string_view kPromptTemplate =
    "I am a user who is using the sticker search feature, and I have entered a query. Please help me analyze "
    "the intent behind my query.\n"
    "There are five possible intents: OCR, IP, entity, style, and meaning. Here are the descriptions and examples "
    "for each intent.\n"
    "OCR textual content refers to the text extracted from the sticker using Optical Character Recognition (OCR) "
    "technology. \n"
    "Examples: {ocr_examples} \n"
    "Character IP refers to Intellectual Property (IP) related to the characters depicted on the sticker, which "
    "could be a well-known character from a movie, TV show, comic book, video game, or any other form of media.\n"
    "Examples: {ip_examples} \n"
    "Entity refers to the specific object, symbol, or concept that is primarily depicted in the sticker. \n"
    "Examples: {entity_examples} \n"
    "Visual style refers to the specific artistic style that the sticker's design follows.\n"
    "Examples: {style_examples} \n"
    "Meaning refers to the intended message, sentiment, or symbolism that the sticker is designed to convey, "
    "which is typically provided by the source of the sticker. \n"
    "Examples: {meaning_examples} \n"
    "Q: Based on the given explanation, arrange the order of intent for the query: Doraemon cute.\n"
    "A: Let's think step by step. \"Doraemon cute\" is most likely to be an IP intent in OCR, IP, entity, style, "
    "meaning, because Doraemon is a well-known anime character. Excluding the IP intent, among the remaining OCR, "
    "entity, style, meaning, \"Doraemon cute\" is most likely to be a style intent, because the query includes the "
    "style description \"cute\". Excluding IP and style intents, among the remaining OCR, entity, meaning, "
    "\"Doraemon cute\" is most likely to be an entity intent, because Doraemon is a specific character. Excluding "
    "IP, style, and entity intents, among the remaining OCR and meaning, \"Doraemon cute\" is most likely to be a "
    "meaning intent, because \"Doraemon cute\" can be understood as a certain meaning. \"Doraemon cute\" is least "
    "likely to be an OCR intent, because it is not an image or video with text content. Therefore, the answer is: "
    "IP > style > entity > meaning > OCR.\n"
    "Q: Based on the given explanation, arrange the order of intent for the query: {query} \n"
    "A: Let's think step by step.";

inline void replace_all(std::string& s, std::string_view from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
    s.replace(pos, from.size(), to);
}

}  // namespace detail

struct Prompt {
  std::string text;
  bool empty_query = false;
};

inline Prompt build_prompt(std::string_view query, const PromptExamples& ex = {}) {
  Prompt p;
  p.text = std::string(detail::kPromptTemplate);
  detail::replace_all(p.text, "{ocr_examples}", ex.ocr);
  detail::replace_all(p.text, "{ip_examples}", ex.ip);
  detail::replace_all(p.text, "{entity_examples}", ex.entity);
  detail::replace_all(p.text, "{style_examples}", ex.style);
  detail::replace_all(p.text, "{meaning_examples}", ex.meaning);
  detail::replace_all(p.text, "{query}", std::string(query));
  p.empty_query = tokenize(query).empty();
  return p;
}

inline std::uint64_t prompt_template_hash() { return fnv1a64(detail::kPromptTemplate); }

// ---------------------------------------------------------------------------
// Answer parsing.
// ---------------------------------------------------------------------------

namespace detail {

inline std::optional<Property> intent_from_name(std::string name) {
  for (auto& ch : name) ch = char(std::tolower(static_cast<unsigned char>(ch)));
  static const std::vector<std::pair<std::string, Property>> kNames = {
      {"ocr", Property::kOcr},          {"ocr textual content", Property::kOcr}, {"ip", Property::kIp},
      {"character ip", Property::kIp},  {"entity", Property::kEntity},         {"style", Property::kStyle},
      {"visual style", Property::kStyle}, {"meaning", Property::kMeaning}};
  for (const auto& [n, p] : kNames)
    if (n == name) return p;
  return std::nullopt;
}

inline std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (std::isalpha(static_cast<unsigned char>(ch))) {
      cur += ch;
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

/// Maps one chain element; the first element may carry leading words and the
/// last trailing words ("answer is IP", "OCR intent").
inline std::optional<Property> chain_element(const std::string& raw, bool first, bool last) {
  auto w = words(raw);
  if (w.empty()) return std::nullopt;
  auto join = [&](std::size_t b, std::size_t e) {
    std::string s;
    for (std::size_t i = b; i < e; ++i) s += (i > b ? " " : "") + w[i];
    return s;
  };
  if (auto p = intent_from_name(join(0, w.size()))) return p;
  for (std::size_t n = 1; n <= std::min<std::size_t>(2, w.size()); ++n) {
    if (first)
      if (auto p = intent_from_name(join(w.size() - n, w.size()))) return p;
    if (last)
      if (auto p = intent_from_name(join(0, n))) return p;
  }
  return std::nullopt;
}

}  // namespace detail

/// Extracts the final "A > B > C > D > E" chain. Throws ParseError when the
/// chain is missing or is not a permutation of the five intents.
inline IntentRanking parse_llm_ranking(std::string_view response) {
  static const std::regex kChain(R"([A-Za-z][A-Za-z ]*(?:\s*>\s*[A-Za-z][A-Za-z ]*)+)");
  std::string text(response);
  std::string last;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kChain); it != std::sregex_iterator(); ++it)
    last = it->str();
  if (last.empty()) throw ParseError("no intent chain found in LLM response");
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t pos; (pos = last.find('>', start)) != std::string::npos; start = pos + 1)
    parts.push_back(last.substr(start, pos - start));
  parts.push_back(last.substr(start));
  if (parts.size() != kNumProperties)
    throw ParseError("intent chain lists " + std::to_string(parts.size()) + " intents, expected 5");
  std::vector<Property> order;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto p = detail::chain_element(parts[i], i == 0, i + 1 == parts.size());
    if (!p) throw ParseError("unknown intent '" + parts[i] + "' in chain");
    order.push_back(*p);
  }
  return IntentRanking(order);
}

// ---------------------------------------------------------------------------
// Rule-based detector.
// ---------------------------------------------------------------------------

/// Token-sequence lexicons built from the corpus.
struct IntentLexicons {
  std::vector<std::vector<std::string>> ips, entities, styles;

  static IntentLexicons from_corpus(const Corpus& corpus) {
    IntentLexicons lx;
    auto fill = [&](Property p, std::vector<std::vector<std::string>>& out) {
      for (const auto& v : corpus.lexicon(p)) {
        auto t = tokenize(v);
        if (!t.empty()) out.push_back(std::move(t));
      }
    };
    fill(Property::kIp, lx.ips);
    fill(Property::kEntity, lx.entities);
    fill(Property::kStyle, lx.styles);
    return lx;
  }
};

/// Scores: c/e/v get 1 + length for every lexicon entry found as a contiguous
/// token run; o gets 3 for quoted text and 1 for queries of 6+ tokens; m is a
/// constant 1. Sorted descending with ties ordered m > o > c > e > v.
inline IntentRanking detect_rule_based(std::string_view query, const IntentLexicons& lx) {
  const auto toks = tokenize(query);
  auto hits = [&](const std::vector<std::vector<std::string>>& lex) {
    double s = 0.0;
    for (const auto& entry : lex) {
      if (entry.size() > toks.size()) continue;
      for (std::size_t i = 0; i + entry.size() <= toks.size(); ++i)
        if (std::equal(entry.begin(), entry.end(), toks.begin() + long(i))) {
          s += 1.0 + double(entry.size());
          break;
        }
    }
    return s;
  };
  std::array<double, kNumProperties> score{};
  score[index_of(Property::kIp)] = hits(lx.ips);
  score[index_of(Property::kEntity)] = hits(lx.entities);
  score[index_of(Property::kStyle)] = hits(lx.styles);
  score[index_of(Property::kOcr)] =
      (query.find('"') != std::string_view::npos ? 3.0 : 0.0) + (toks.size() >= 6 ? 1.0 : 0.0);
  score[index_of(Property::kMeaning)] = 1.0;
  std::vector<Property> order = {Property::kMeaning, Property::kOcr, Property::kIp, Property::kEntity,
                                 Property::kStyle};
  std::stable_sort(order.begin(), order.end(),
                   [&](Property a, Property b) { return score[index_of(a)] > score[index_of(b)]; });
  return IntentRanking(order);
}

// ---------------------------------------------------------------------------
// Table.
// ---------------------------------------------------------------------------

/// Normalized query -> ranking. Reads are shared, inserts exclusive.
class IntentTable {
 public:
  IntentTable() = default;
  IntentTable(const IntentTable& o) : map_(o.snapshot()) {}
  IntentTable& operator=(const IntentTable& o) {
    auto m = o.snapshot();
    std::unique_lock lock(mu_);
    map_ = std::move(m);
    return *this;
  }

  std::optional<IntentRanking> find(std::string_view query) const {
    std::shared_lock lock(mu_);
    auto it = map_.find(normalize_text(query));
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }

  /// Returns false if the key was already present (value unchanged).
  bool insert(std::string_view query, const IntentRanking& r) {
    std::unique_lock lock(mu_);
    return map_.emplace(normalize_text(query), r).second;
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return map_.size();
  }

  std::map<std::string, IntentRanking> snapshot() const {
    std::shared_lock lock(mu_);
    return map_;
  }

  /// "query<TAB>symbols" lines; throws ParseError with the line number.
  static IntentTable read(std::istream& in) {
    IntentTable t;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      auto tab = line.rfind('\t');
      if (tab == std::string::npos) throw ParseError("expected 'query<TAB>ranking'", n);
      try {
        t.insert(line.substr(0, tab), IntentRanking::parse(line.substr(tab + 1)));
      } catch (const ParseError& e) {
        throw ParseError(e.what(), n);
      }
    }
    return t;
  }

  static IntentTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DependencyError("intent table '" + path + "' not found (run resolve-intents or gen-data)");
    return read(in);
  }

  void save(const std::string& path) const {
    auto out = jsonl::open_out(path);
    auto m = snapshot();
    write_intent_lines(out, std::vector<std::pair<std::string, IntentRanking>>(m.begin(), m.end()));
  }

  static IntentTable from_pairs(const std::vector<std::pair<std::string, IntentRanking>>& pairs) {
    IntentTable t;
    for (const auto& [q, r] : pairs) t.insert(q, r);
    return t;
  }

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, IntentRanking> map_;
};

// ---------------------------------------------------------------------------
// LLM client.
// ---------------------------------------------------------------------------

struct LlmConfig {
  std::string endpoint;
  std::string model = "default";
  std::string api_key;
  double timeout_seconds = 30.0;
  int attempts = 3;
  double backoff_seconds = 0.5;  // doubled after every failed attempt

  static LlmConfig from_env() {
    LlmConfig c;
    auto get = [](const char* k) -> std::string {
      const char* v = std::getenv(k);
      return v ? v : "";
    };
    c.endpoint = get("STICKERGEN_LLM_ENDPOINT");
    if (auto m = get("STICKERGEN_LLM_MODEL"); !m.empty()) c.model = m;
    c.api_key = get("STICKERGEN_LLM_API_KEY");
    if (auto t = get("STICKERGEN_LLM_TIMEOUT"); !t.empty()) {
      try {
        c.timeout_seconds = std::stod(t);
      } catch (const std::exception&) {
        throw ConfigError("STICKERGEN_LLM_TIMEOUT is not a number: '" + t + "'");
      }
    }
    return c;
  }
};

/// Sends one prompt, returns the completion text; throws TransportError.
using ChatTransport = std::function<std::string(const std::string& prompt)>;

/// Minimal chat-completions request over HTTP(S).
inline ChatTransport http_chat_transport(const LlmConfig& cfg) {
  if (cfg.endpoint.empty()) throw ConfigError("llm mode needs STICKERGEN_LLM_ENDPOINT");
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(cfg.endpoint, m, kUrl)) throw ConfigError("malformed LLM endpoint '" + cfg.endpoint + "'");
  std::string base = m[1].str(), path = m[2].matched ? m[2].str() : "/v1/chat/completions";
  return [cfg, base, path](const std::string& prompt) -> std::string {
    httplib::Client cli(base);
    auto secs = std::chrono::duration<double>(cfg.timeout_seconds);
    cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
    httplib::Headers headers;
    if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);
    nlohmann::json body = {{"model", cfg.model},
                           {"temperature", 0},
                           {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("LLM request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw TransportError("LLM endpoint returned HTTP " + std::to_string(res->status));
    try {
      auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed LLM response: ") + e.what());
    }
  };
}

class LlmClient {
 public:
  LlmClient(LlmConfig cfg, ChatTransport transport) : cfg_(std::move(cfg)), transport_(std::move(transport)) {}

  /// Up to cfg.attempts tries with exponential backoff; the final
  /// TransportError reports the attempt count.
  std::string complete(const std::string& prompt) const {
    double delay = cfg_.backoff_seconds;
    std::string last;
    for (int a = 1; a <= cfg_.attempts; ++a) {
      try {
        return transport_(prompt);
      } catch (const TransportError& e) {
        last = e.what();
      }
      if (a < cfg_.attempts && delay > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        delay *= 2.0;
      }
    }
    throw TransportError("LLM unreachable after " + std::to_string(cfg_.attempts) + " attempts: " + last);
  }

 private:
  LlmConfig cfg_;
  ChatTransport transport_;
};

// ---------------------------------------------------------------------------
// Resolution.
// ---------------------------------------------------------------------------

enum class IntentMode { kTableFirst, kLlm, kRules };

inline IntentMode parse_intent_mode(std::string_view s) {
  if (s == "table-first") return IntentMode::kTableFirst;
  if (s == "llm") return IntentMode::kLlm;
  if (s == "rules") return IntentMode::kRules;
  throw ConfigError("unknown intent mode '" + std::string(s) + "' (table-first, llm, rules)");
}

/// Table lookup, then the configured detector; results are cached into the
/// table. In table-first mode a miss falls back to the LLM when a client is
/// configured, otherwise to the rules.
class IntentResolver {
 public:
  IntentResolver(IntentTable table, IntentLexicons lexicons, IntentMode mode,
                 std::optional<LlmClient> llm = std::nullopt, PromptExamples examples = {})
      : table_(std::move(table)), lexicons_(std::move(lexicons)), mode_(mode), llm_(std::move(llm)),
        examples_(std::move(examples)) {
    if (mode_ == IntentMode::kLlm && !llm_) throw ConfigError("llm intent mode needs an LLM client");
  }

  IntentRanking resolve(std::string_view query) {
    if (auto hit = table_.find(query)) return *hit;
    IntentRanking r = detect(query);
    table_.insert(query, r);
    return *table_.find(query);
  }

  /// Resolves in parallel with at most `max_concurrency` workers; output order
  /// follows `queries`.
  std::vector<IntentRanking> resolve_all(const std::vector<std::string>& queries, std::size_t max_concurrency = 1) {
    std::vector<std::optional<IntentRanking>> out(queries.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr err;
    auto worker = [&] {
      for (std::size_t i; (i = next++) < queries.size();) {
        try {
          out[i] = resolve(queries[i]);
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    };
    std::size_t n = std::max<std::size_t>(1, std::min(max_concurrency, queries.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
    std::vector<IntentRanking> res;
    for (auto& r : out) res.push_back(*r);
    return res;
  }

  const IntentTable& table() const { return table_; }
  std::size_t detector_calls() const { return detector_calls_; }
  std::size_t llm_parse_fallbacks() const { return parse_fallbacks_; }

 private:
  IntentRanking detect(std::string_view query) {
    ++detector_calls_;
    bool use_llm = mode_ == IntentMode::kLlm || (mode_ == IntentMode::kTableFirst && llm_);
    if (use_llm) {
      std::string answer = llm_->complete(build_prompt(query, examples_).text);
      try {
        return parse_llm_ranking(answer);
      } catch (const ParseError&) {
        ++parse_fallbacks_;
      }
    }
    return detect_rule_based(query, lexicons_);
  }

  IntentTable table_;
  IntentLexicons lexicons_;
  IntentMode mode_;
  std::optional<LlmClient> llm_;
  PromptExamples examples_;
  std::atomic<std::size_t> detector_calls_{0};
  std::atomic<std::size_t> parse_fallbacks_{0};
};

}  // namespace stickergen
