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

// Property identifiers for a corpus: the token vocabulary, one prefix tree
// per property and code -> sticker posting lists.
//
// Token id layout of IdentifierVocabulary:
//
//   0                      <unk>
//   [1, 1+T)               text tokens (sorted; includes "<empty>")
//   [1+T, 6+T)             property prefix tokens, order o c e v m
//   [6+T, 14+T)            user-group tokens, UserGroup::index() order
//   [14+T, 14+T+C)         code tokens
//
// For pq/rq/atomic, code tokens are position-qualified: token (j, c) sits at
// offset j*alphabet + c. For string codes the alphabet is the text-token list
// and positions are not qualified. The decoder's output vocabulary is the 5
// prefix tokens followed by the C code tokens.
//
// Bundle files (little-endian, u32-length strings):
//
//   vocab.bin     "SGVB" u32 1, u8 scheme, u32 positions, u32 alphabet,
//                 u32 T, T x str
//   tree_<p>.bin  "SGTR" u32 1, u8 property, u32 n_nodes, per node:
//                 u8 terminal, u32 n_children, n x (u32 symbol, u32 child)
//   postings.bin  "SGPL" u32 1, u32 n_stickers, n x str id,
//                 per property: u32 n_codes, per code: u32 len, len x u32,
//                 u32 n_ids, n_ids x u32 sticker index
//   codes.bin     "SGID" u32 1, u32 n_stickers, per sticker and property:
//                 u32 len, len x u32
//   codebook_<p>.bin  (pq/rq only, see quantize.hpp)
//   manifest.json index configuration and statistics

#pragma once

#include <filesystem>
#include <map>
#include <set>

#include "json.hpp"

#include "stickergen/corpus.hpp"
#include "stickergen/embed.hpp"
#include "stickergen/quantize.hpp"

namespace stickergen {

inline constexpr std::size_t kMaxDecodeSteps = 15;

struct CodeSpace {
  CodeScheme scheme = CodeScheme::kPq;
  std::uint32_t positions = 0;  // pq: m, rq: L, atomic: 1, string: 0 (unqualified)
  std::uint32_t alphabet = 0;

  bool positional() const { return scheme != CodeScheme::kString; }
  std::size_t size() const { return positional() ? std::size_t(positions) * alphabet : alphabet; }
};

class IdentifierVocabulary {
 public:
  static constexpr std::uint32_t kUnk = 0;

  IdentifierVocabulary() = default;
  IdentifierVocabulary(std::vector<std::string> text_tokens, CodeSpace space)
      : text_(std::move(text_tokens)), space_(space) {
    std::sort(text_.begin(), text_.end());
    text_.erase(std::unique(text_.begin(), text_.end()), text_.end());
    for (std::size_t i = 0; i < text_.size(); ++i) text_index_[text_[i]] = std::uint32_t(i);
  }

  const CodeSpace& code_space() const { return space_; }
  std::size_t text_count() const { return text_.size(); }
  const std::vector<std::string>& text_tokens() const { return text_; }

  std::uint32_t prefix_base() const { return std::uint32_t(1 + text_.size()); }
  std::uint32_t group_base() const { return prefix_base() + std::uint32_t(kNumProperties); }
  std::uint32_t code_base() const { return group_base() + std::uint32_t(kNumGroups); }
  std::size_t size() const { return code_base() + space_.size(); }

  /// Index into text_tokens(), if present.
  std::optional<std::uint32_t> text_index(const std::string& token) const {
    auto it = text_index_.find(token);
    if (it == text_index_.end()) return std::nullopt;
    return it->second;
  }
  std::uint32_t text_token(const std::string& token) const {
    auto i = text_index(token);
    return i ? 1 + *i : kUnk;
  }
  std::uint32_t prefix_token(Property p) const { return prefix_base() + std::uint32_t(index_of(p)); }
  std::uint32_t group_token(UserGroup g) const { return group_base() + std::uint32_t(g.index()); }

  std::uint32_t code_token(std::size_t position, std::uint32_t symbol) const {
    if (symbol >= space_.alphabet) throw ContractError("code symbol out of range");
    if (!space_.positional()) return code_base() + symbol;
    if (position >= space_.positions) throw ContractError("code position out of range");
    return code_base() + std::uint32_t(position) * space_.alphabet + symbol;
  }
  bool is_code_token(std::uint32_t id) const { return id >= code_base() && id < size(); }
  std::uint32_t symbol_of(std::uint32_t code_token_id) const {
    std::uint32_t off = code_token_id - code_base();
    return space_.positional() ? off % space_.alphabet : off;
  }

  // Decoder output vocabulary: [prefix tokens][code tokens].
  std::size_t output_size() const { return kNumProperties + space_.size(); }
  std::uint32_t output_index(std::uint32_t token) const {
    if (token >= prefix_base() && token < group_base()) return token - prefix_base();
    if (is_code_token(token)) return std::uint32_t(kNumProperties) + (token - code_base());
    throw ContractError("token " + std::to_string(token) + " is not in the output vocabulary");
  }
  std::uint32_t output_token(std::uint32_t index) const {
    if (index < kNumProperties) return prefix_base() + index;
    return code_base() + (index - std::uint32_t(kNumProperties));
  }

  /// Encoder input for free text: one id per normalized token (unknowns ->
  /// <unk>); empty text -> "<empty>".
  std::vector<std::uint32_t> encode_text(std::string_view text) const {
    auto toks = tokenize(text);
    if (toks.empty()) toks.push_back(std::string(kEmptySentinel));
    std::vector<std::uint32_t> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(text_token(t));
    return out;
  }

  std::string token_string(std::uint32_t id) const {
    if (id == kUnk) return "<unk>";
    if (id < prefix_base()) return text_[id - 1];
    if (id < group_base()) return std::string("<w_") + property_symbol(Property(id - prefix_base())) + ">";
    if (id < code_base()) return "<g_" + UserGroup::from_index(id - group_base()).name() + ">";
    if (id < size()) {
      std::uint32_t off = id - code_base();
      if (!space_.positional()) return "<s:" + text_[off] + ">";
      return "<" + std::to_string(off / space_.alphabet) + ":" + std::to_string(off % space_.alphabet) + ">";
    }
    return "<invalid>";
  }

  std::uint64_t hash() const {
    std::uint64_t h = fnv1a64(std::string(scheme_name(space_.scheme)));
    h = splitmix64(h ^ space_.positions) ^ space_.alphabet;
    for (const auto& t : text_) h = splitmix64(h ^ fnv1a64(t));
    return h;
  }

  void save(std::ostream& os) const {
    binio::put_magic(os, "SGVB");
    binio::put_u32(os, 1);
    binio::put_u8(os, std::uint8_t(space_.scheme));
    binio::put_u32(os, space_.positions);
    binio::put_u32(os, space_.alphabet);
    binio::put_u32(os, std::uint32_t(text_.size()));
    for (const auto& t : text_) binio::put_str(os, t);
  }

  static IdentifierVocabulary load(std::istream& is) {
    binio::expect_magic(is, "SGVB");
    if (auto v = binio::get_u32(is); v != 1) throw ParseError("unsupported vocabulary version " + std::to_string(v));
    CodeSpace cs;
    cs.scheme = CodeScheme(binio::get_u8(is));
    cs.positions = binio::get_u32(is);
    cs.alphabet = binio::get_u32(is);
    std::vector<std::string> text(binio::get_u32(is));
    for (auto& t : text) t = binio::get_str(is);
    return IdentifierVocabulary(std::move(text), cs);
  }

  friend bool operator==(const IdentifierVocabulary& a, const IdentifierVocabulary& b) {
    return a.text_ == b.text_ && a.space_.scheme == b.space_.scheme && a.space_.positions == b.space_.positions &&
           a.space_.alphabet == b.space_.alphabet;
  }

 private:
  std::vector<std::string> text_;
  std::unordered_map<std::string, std::uint32_t> text_index_;
  CodeSpace space_;
};

/// Trie over code symbols. A node is terminal when a complete code ends
/// there; with string codes a terminal node may also have children.
class PrefixTree {
 public:
  struct Node {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> children;  // (symbol, node), sorted by symbol
    bool terminal = false;
  };

  PrefixTree() : nodes_(1) {}
  explicit PrefixTree(Property p) : property_(p), nodes_(1) {}

  Property property() const { return property_; }
  static constexpr std::uint32_t root() { return 0; }
  const Node& node(std::uint32_t i) const { return nodes_.at(i); }
  std::size_t node_count() const { return nodes_.size(); }

  void insert(const Code& code) {
    if (code.empty()) throw ContractError("empty code");
    std::uint32_t cur = 0;
    for (std::uint32_t s : code) {
      auto& ch = nodes_[cur].children;
      auto it = std::lower_bound(ch.begin(), ch.end(), std::make_pair(s, 0u),
                                 [](const auto& a, const auto& b) { return a.first < b.first; });
      if (it != ch.end() && it->first == s) {
        cur = it->second;
        continue;
      }
      auto next = std::uint32_t(nodes_.size());
      ch.insert(it, {s, next});
      nodes_.emplace_back();
      cur = next;
    }
    nodes_[cur].terminal = true;
  }

  std::optional<std::uint32_t> child(std::uint32_t n, std::uint32_t symbol) const {
    const auto& ch = nodes_.at(n).children;
    auto it = std::lower_bound(ch.begin(), ch.end(), std::make_pair(symbol, 0u),
                               [](const auto& a, const auto& b) { return a.first < b.first; });
    if (it == ch.end() || it->first != symbol) return std::nullopt;
    return it->second;
  }

  bool contains(const Code& code) const {
    std::uint32_t cur = 0;
    for (auto s : code) {
      auto c = child(cur, s);
      if (!c) return false;
      cur = *c;
    }
    return nodes_[cur].terminal;
  }

  /// Number of complete codes.
  std::size_t leaf_count() const {
    std::size_t n = 0;
    for (const auto& nd : nodes_) n += nd.terminal;
    return n;
  }

  std::size_t max_depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [n, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      for (auto [s, c] : nodes_[n].children) stack.push_back({c, d + 1});
    }
    return best;
  }

  /// All complete codes in lexicographic order.
  std::vector<Code> codes() const {
    std::vector<Code> out;
    Code path;
    walk(0, path, out);
    return out;
  }

  void save(std::ostream& os) const {
    binio::put_magic(os, "SGTR");
    binio::put_u32(os, 1);
    binio::put_u8(os, std::uint8_t(property_));
    binio::put_u32(os, std::uint32_t(nodes_.size()));
    for (const auto& n : nodes_) {
      binio::put_u8(os, n.terminal ? 1 : 0);
      binio::put_u32(os, std::uint32_t(n.children.size()));
      for (auto [s, c] : n.children) {
        binio::put_u32(os, s);
        binio::put_u32(os, c);
      }
    }
  }

  static PrefixTree load(std::istream& is) {
    binio::expect_magic(is, "SGTR");
    if (auto v = binio::get_u32(is); v != 1) throw ParseError("unsupported tree version " + std::to_string(v));
    PrefixTree t(Property(binio::get_u8(is)));
    t.nodes_.resize(binio::get_u32(is));
    for (auto& n : t.nodes_) {
      n.terminal = binio::get_u8(is) != 0;
      n.children.resize(binio::get_u32(is));
      for (auto& [s, c] : n.children) {
        s = binio::get_u32(is);
        c = binio::get_u32(is);
        if (c >= t.nodes_.size()) throw ParseError("tree child index out of range");
      }
    }
    return t;
  }

  friend bool operator==(const PrefixTree& a, const PrefixTree& b) {
    if (a.property_ != b.property_ || a.nodes_.size() != b.nodes_.size()) return false;
    for (std::size_t i = 0; i < a.nodes_.size(); ++i)
      if (a.nodes_[i].terminal != b.nodes_[i].terminal || a.nodes_[i].children != b.nodes_[i].children)
        return false;
    return true;
  }

 private:
  void walk(std::uint32_t n, Code& path, std::vector<Code>& out) const {
    if (nodes_[n].terminal) out.push_back(path);
    for (auto [s, c] : nodes_[n].children) {
      path.push_back(s);
      walk(c, path, out);
      path.pop_back();
    }
  }

  Property property_ = Property::kOcr;
  std::vector<Node> nodes_;
};

/// (property, code) -> sorted sticker indices.
class PostingList {
 public:
  void add(Property p, const Code& code, std::uint32_t sticker) { lists_[index_of(p)][code].push_back(sticker); }

  void finalize() {
    for (auto& m : lists_)
      for (auto& [c, ids] : m) {
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
      }
  }

  const std::vector<std::uint32_t>& lookup(Property p, const Code& code) const {
    static const std::vector<std::uint32_t> kEmpty;
    auto it = lists_[index_of(p)].find(code);
    return it == lists_[index_of(p)].end() ? kEmpty : it->second;
  }

  const std::map<Code, std::vector<std::uint32_t>>& of(Property p) const { return lists_[index_of(p)]; }

  friend bool operator==(const PostingList&, const PostingList&) = default;

 private:
  std::array<std::map<Code, std::vector<std::uint32_t>>, kNumProperties> lists_;
};

struct IndexConfig {
  CodeScheme scheme = CodeScheme::kPq;
  std::size_t m = 8;  // pq subspaces / rq levels
  std::size_t k = 256;
  std::size_t max_steps = kMaxDecodeSteps;
  std::size_t embed_dim = 64;
  std::uint64_t embed_seed = 11;
  std::uint64_t seed = 13;

  nlohmann::json to_json() const {
    return {{"scheme", std::string(scheme_name(scheme))}, {"m", m}, {"k", k}, {"max_steps", max_steps},
            {"embed_dim", embed_dim}, {"embed_seed", embed_seed}, {"seed", seed}};
  }
  static IndexConfig from_json(const nlohmann::json& j) {
    IndexConfig c;
    c.scheme = parse_scheme(j.at("scheme").get<std::string>());
    c.m = j.at("m").get<std::size_t>();
    c.k = j.at("k").get<std::size_t>();
    c.max_steps = j.at("max_steps").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.embed_seed = j.at("embed_seed").get<std::uint64_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  }
};

struct IndexStats {
  std::array<std::size_t, kNumProperties> k_used{};
  std::array<std::size_t, kNumProperties> distinct_codes{};
  std::size_t truncated = 0;
};

/// Everything retrieval needs about the corpus identifiers.
class StickerIndex {
 public:
  IndexConfig config;
  IdentifierVocabulary vocab;
  std::vector<std::string> sticker_ids;
  /// codes[sticker][property]
  std::vector<std::array<Code, kNumProperties>> codes;
  std::array<PrefixTree, kNumProperties> trees{PrefixTree(Property::kOcr), PrefixTree(Property::kIp),
                                               PrefixTree(Property::kEntity), PrefixTree(Property::kStyle),
                                               PrefixTree(Property::kMeaning)};
  PostingList postings;
  std::array<std::optional<Codebook>, kNumProperties> codebooks;
  IndexStats stats;

  std::size_t size() const { return sticker_ids.size(); }
  const Code& code(std::size_t sticker, Property p) const { return codes.at(sticker)[index_of(p)]; }
  const PrefixTree& tree(Property p) const { return trees[index_of(p)]; }

  /// Posting set of `code`; an unknown code yields the empty set.
  const std::vector<std::uint32_t>& lookup(Property p, const Code& c) const { return postings.lookup(p, c); }

  std::optional<std::size_t> find(const std::string& id) const {
    auto it = std::lower_bound(sorted_.begin(), sorted_.end(), std::make_pair(id, std::size_t(0)));
    if (it == sorted_.end() || it->first != id) return std::nullopt;
    return it->second;
  }

  /// Code tokens for `code` of property `p`.
  std::vector<std::uint32_t> code_tokens(const Code& c) const {
    std::vector<std::uint32_t> out;
    out.reserve(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) out.push_back(vocab.code_token(j, c[j]));
    return out;
  }

  /// Rebuilds trees, postings and the id lookup from `codes`. Throws
  /// ConfigError if any code is longer than max_steps.
  void rebuild_structures() {
    postings = PostingList();
    for (Property p : kAllProperties) trees[index_of(p)] = PrefixTree(p);
    for (std::size_t i = 0; i < codes.size(); ++i)
      for (Property p : kAllProperties) {
        const Code& c = codes[i][index_of(p)];
        if (c.size() > config.max_steps)
          throw ConfigError("code of length " + std::to_string(c.size()) + " exceeds max decode steps " +
                            std::to_string(config.max_steps));
        trees[index_of(p)].insert(c);
        postings.add(p, c, std::uint32_t(i));
      }
    postings.finalize();
    for (Property p : kAllProperties) stats.distinct_codes[index_of(p)] = trees[index_of(p)].leaf_count();
    sorted_.clear();
    for (std::size_t i = 0; i < sticker_ids.size(); ++i) sorted_.emplace_back(sticker_ids[i], i);
    std::sort(sorted_.begin(), sorted_.end());
  }

  void save(const std::string& dir) const;
  static StickerIndex load(const std::string& dir);

 private:
  std::vector<std::pair<std::string, std::size_t>> sorted_;
};

/// Text tokens the vocabulary must cover: every corpus property token, the
/// empty sentinel, and the tokens of `extra_texts` (training queries).
inline std::vector<std::string> collect_text_tokens(const Corpus& corpus, const std::vector<std::string>& extra_texts) {
  std::set<std::string> toks{std::string(kEmptySentinel)};
  for (const auto& s : corpus.stickers())
    for (Property p : kAllProperties)
      for (auto& t : tokenize(s.text(p))) toks.insert(std::move(t));
  for (const auto& q : extra_texts)
    for (auto& t : tokenize(q)) toks.insert(std::move(t));
  return {toks.begin(), toks.end()};
}

/// Assigns five codes to every sticker with one codebook per property.
inline StickerIndex build_identifiers(const Corpus& corpus, const EmbeddingProvider& embed, const IndexConfig& config,
                                      const std::vector<std::string>& extra_texts = {}) {
  if (corpus.empty()) throw ValidationError("cannot index an empty corpus");
  if (embed.dim() != config.embed_dim)
    throw ConfigError("embedding provider dimension " + std::to_string(embed.dim()) + " != index embed_dim " +
                      std::to_string(config.embed_dim));
  if ((config.scheme == CodeScheme::kPq || config.scheme == CodeScheme::kRq) && config.m > config.max_steps)
    throw ConfigError("code length " + std::to_string(config.m) + " exceeds max decode steps " +
                      std::to_string(config.max_steps));

  StickerIndex idx;
  idx.config = config;
  const std::size_t n = corpus.size();
  for (const auto& s : corpus.stickers()) idx.sticker_ids.push_back(s.id);
  idx.codes.resize(n);
  auto text_tokens = collect_text_tokens(corpus, extra_texts);

  CodeSpace space;
  space.scheme = config.scheme;
  switch (config.scheme) {
    case CodeScheme::kPq:
    case CodeScheme::kRq: {
      std::size_t alphabet = 1;
      for (Property p : kAllProperties) {
        RowMatrix vecs(Eigen::Index(n), Eigen::Index(config.embed_dim));
        std::unordered_map<std::string, Vec> cache;
        for (std::size_t i = 0; i < n; ++i) {
          const std::string& t = corpus[i].text(p);
          auto it = cache.find(t);
          if (it == cache.end()) it = cache.emplace(t, embed.embed_text(t).pooled).first;
          vecs.row(Eigen::Index(i)) = it->second.transpose();
        }
        const std::string name(property_name(p));
        std::size_t k = config.scheme == CodeScheme::kPq ? std::min(config.k, max_pq_clusters(vecs, config.m))
                                                          : std::min(config.k, count_distinct_rows(vecs));
        k = std::max<std::size_t>(k, 1);
        Codebook cb = config.scheme == CodeScheme::kPq
                          ? train_pq(vecs, config.m, k, derive_seed(config.seed, "codebook/" + name))
                          : train_rq(vecs, config.m, k, derive_seed(config.seed, "codebook/" + name), true);
        for (std::size_t i = 0; i < n; ++i)
          idx.codes[i][index_of(p)] = cb.encode(vecs.row(Eigen::Index(i)).transpose());
        idx.stats.k_used[index_of(p)] = k;
        alphabet = std::max(alphabet, k);
        idx.codebooks[index_of(p)] = std::move(cb);
      }
      space.positions = std::uint32_t(config.m);
      space.alphabet = std::uint32_t(alphabet);
      break;
    }
    case CodeScheme::kAtomic: {
      std::size_t alphabet = 1;
      for (Property p : kAllProperties) {
        std::vector<std::string> texts;
        for (const auto& s : corpus.stickers()) texts.push_back(s.text(p));
        auto codes = build_atomic(texts);
        std::size_t distinct = 0;
        for (std::size_t i = 0; i < n; ++i) {
          idx.codes[i][index_of(p)] = codes[i];
          distinct = std::max<std::size_t>(distinct, codes[i][0] + 1);
        }
        idx.stats.k_used[index_of(p)] = distinct;
        alphabet = std::max(alphabet, distinct);
      }
      space.positions = 1;
      space.alphabet = std::uint32_t(alphabet);
      break;
    }
    case CodeScheme::kString: {
      IdentifierVocabulary probe(text_tokens, space);
      for (Property p : kAllProperties) {
        std::vector<std::string> texts;
        for (const auto& s : corpus.stickers()) texts.push_back(s.text(p));
        auto sc = build_string(texts, config.max_steps, [&](const std::string& t) { return *probe.text_index(t); });
        for (std::size_t i = 0; i < n; ++i) idx.codes[i][index_of(p)] = sc.codes[i];
        idx.stats.truncated += sc.truncated;
        idx.stats.k_used[index_of(p)] = probe.text_count();
      }
      space.positions = 0;
      space.alphabet = std::uint32_t(probe.text_count());
      break;
    }
  }
  idx.vocab = IdentifierVocabulary(std::move(text_tokens), space);
  idx.rebuild_structures();
  return idx;
}

// ---------------------------------------------------------------------------
// Bundle I/O.
// ---------------------------------------------------------------------------

namespace detail {

inline std::ofstream open_bin_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

inline std::ifstream open_bin_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("index file '" + path + "' not found (run build-index)");
  return in;
}

inline void put_code(std::ostream& os, const Code& c) {
  binio::put_u32(os, std::uint32_t(c.size()));
  for (auto s : c) binio::put_u32(os, s);
}

inline Code get_code(std::istream& is) {
  Code c(binio::get_u32(is));
  for (auto& s : c) s = binio::get_u32(is);
  return c;
}

}  // namespace detail

inline void StickerIndex::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  {
    auto out = detail::open_bin_out(dir + "/vocab.bin");
    vocab.save(out);
  }
  for (Property p : kAllProperties) {
    auto out = detail::open_bin_out(dir + "/tree_" + std::string(1, property_symbol(p)) + ".bin");
    trees[index_of(p)].save(out);
  }
  {
    auto out = detail::open_bin_out(dir + "/postings.bin");
    binio::put_magic(out, "SGPL");
    binio::put_u32(out, 1);
    binio::put_u32(out, std::uint32_t(sticker_ids.size()));
    for (const auto& id : sticker_ids) binio::put_str(out, id);
    for (Property p : kAllProperties) {
      const auto& m = postings.of(p);
      binio::put_u32(out, std::uint32_t(m.size()));
      for (const auto& [c, ids] : m) {
        detail::put_code(out, c);
        binio::put_u32(out, std::uint32_t(ids.size()));
        for (auto i : ids) binio::put_u32(out, i);
      }
    }
  }
  {
    auto out = detail::open_bin_out(dir + "/codes.bin");
    binio::put_magic(out, "SGID");
    binio::put_u32(out, 1);
    binio::put_u32(out, std::uint32_t(codes.size()));
    for (const auto& row : codes)
      for (const auto& c : row) detail::put_code(out, c);
  }
  for (Property p : kAllProperties)
    if (codebooks[index_of(p)])
      save_codebook(dir + "/codebook_" + std::string(1, property_symbol(p)) + ".bin", *codebooks[index_of(p)]);
  nlohmann::json manifest = {{"format", "stickergen-index"},
                             {"version", 1},
                             {"config", config.to_json()},
                             {"stickers", sticker_ids.size()},
                             {"vocab_size", vocab.size()},
                             {"vocab_hash", hex64(vocab.hash())},
                             {"truncated", stats.truncated}};
  for (Property p : kAllProperties) {
    manifest["k_used"][std::string(1, property_symbol(p))] = stats.k_used[index_of(p)];
    manifest["distinct_codes"][std::string(1, property_symbol(p))] = stats.distinct_codes[index_of(p)];
  }
  std::ofstream(dir + "/manifest.json") << manifest.dump(2) << "\n";
}

inline StickerIndex StickerIndex::load(const std::string& dir) {
  StickerIndex idx;
  {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw DependencyError("index bundle '" + dir + "' not found (run build-index)");
    nlohmann::json m;
    try {
      in >> m;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("index manifest: ") + e.what());
    }
    idx.config = IndexConfig::from_json(m.at("config"));
    for (Property p : kAllProperties)
      idx.stats.k_used[index_of(p)] = m.at("k_used").at(std::string(1, property_symbol(p))).get<std::size_t>();
    idx.stats.truncated = m.value("truncated", std::size_t(0));
  }
  {
    auto in = detail::open_bin_in(dir + "/vocab.bin");
    idx.vocab = IdentifierVocabulary::load(in);
  }
  {
    auto in = detail::open_bin_in(dir + "/codes.bin");
    binio::expect_magic(in, "SGID");
    if (binio::get_u32(in) != 1) throw ParseError("unsupported codes version");
    idx.codes.resize(binio::get_u32(in));
    for (auto& row : idx.codes)
      for (auto& c : row) c = detail::get_code(in);
  }
  {
    auto in = detail::open_bin_in(dir + "/postings.bin");
    binio::expect_magic(in, "SGPL");
    if (binio::get_u32(in) != 1) throw ParseError("unsupported postings version");
    idx.sticker_ids.resize(binio::get_u32(in));
    for (auto& id : idx.sticker_ids) id = binio::get_str(in);
    for (Property p : kAllProperties)
      for (std::uint32_t n = binio::get_u32(in); n > 0; --n) {
        Code c = detail::get_code(in);
        for (std::uint32_t k = binio::get_u32(in); k > 0; --k) idx.postings.add(p, c, binio::get_u32(in));
      }
    idx.postings.finalize();
  }
  if (idx.codes.size() != idx.sticker_ids.size()) throw ParseError("codes and postings disagree on sticker count");
  for (Property p : kAllProperties) {
    auto in = detail::open_bin_in(dir + "/tree_" + std::string(1, property_symbol(p)) + ".bin");
    idx.trees[index_of(p)] = PrefixTree::load(in);
    idx.stats.distinct_codes[index_of(p)] = idx.trees[index_of(p)].leaf_count();
    std::string cb = dir + "/codebook_" + std::string(1, property_symbol(p)) + ".bin";
    if (std::filesystem::exists(cb)) idx.codebooks[index_of(p)] = load_codebook(cb);
  }
  for (std::size_t i = 0; i < idx.sticker_ids.size(); ++i) idx.sorted_.emplace_back(idx.sticker_ids[i], i);
  std::sort(idx.sorted_.begin(), idx.sorted_.end());
  return idx;
}

}  // namespace stickergen
