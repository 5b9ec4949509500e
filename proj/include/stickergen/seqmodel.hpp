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

// Small encoder-decoder over the identifier vocabulary.
//
// One pre-norm encoder layer (self-attention, feed-forward) and one pre-norm
// decoder layer (causal self-attention, cross-attention, feed-forward), single
// head, GELU, learned positions, final layer norms. The decoder always starts
// with a property prefix token w_p and predicts code tokens over the output
// vocabulary [prefix tokens][code tokens].
//
// Training minimizes L_T = L_I + L_R:
//   L_I  sum over stickers and properties of -log P(code_p | content_p, w_p)
//   L_R  sum over triplets and properties of d_p * -log P(code_p | [w_g] q, w_p)
// with d_p = 1/log2(rank_p + 1) from the query's intent ranking (all 1 when
// the intent loss is disabled).

#pragma once

#include <functional>
#include <map>

#include "stickergen/autodiff.hpp"
#include "stickergen/checkpoint.hpp"
#include "stickergen/index.hpp"
#include "stickergen/userrep.hpp"

namespace stickergen {

struct SeqModelConfig {
  std::size_t d_model = 64;
  std::size_t ff = 128;
  std::size_t max_enc_len = 32;
  std::size_t max_dec_len = kMaxDecodeSteps + 1;
  bool use_user_embedding = true;
  std::uint64_t seed = 17;

  std::string describe() const {
    return "d=" + std::to_string(d_model) + ";ff=" + std::to_string(ff) + ";enc=" + std::to_string(max_enc_len) +
           ";dec=" + std::to_string(max_dec_len) + ";ue=" + std::to_string(use_user_embedding) +
           ";seed=" + std::to_string(seed);
  }
};

struct TrainingConfig {
  double learning_rate = 3e-3;
  std::size_t batch_tokens = 256;
  std::size_t epochs = 20;
  std::uint64_t seed = 19;
  bool use_intent_loss = true;
  bool use_indexing_loss = true;
  bool use_retrieval_loss = true;
  ad::OptimizerKind optimizer = ad::OptimizerKind::kAdamW;
  double weight_decay = 0.01;
  double clip_norm = 1.0;

  std::string describe() const {
    return "lr=" + std::to_string(learning_rate) + ";bt=" + std::to_string(batch_tokens) +
           ";ep=" + std::to_string(epochs) + ";seed=" + std::to_string(seed) +
           ";ial=" + std::to_string(use_intent_loss) + ";li=" + std::to_string(use_indexing_loss) +
           ";lr_on=" + std::to_string(use_retrieval_loss) + ";opt=" + std::to_string(int(optimizer)) +
           ";wd=" + std::to_string(weight_decay) + ";clip=" + std::to_string(clip_norm);
  }
};

/// One decoder target: the code of property p as output-vocabulary indices.
struct DecodeTarget {
  Property property = Property::kOcr;
  std::vector<int> targets;
  double weight = 1.0;
};

/// One encoder input with every decoder target that shares it.
struct SeqExample {
  std::vector<std::uint32_t> encoder_tokens;
  std::vector<DecodeTarget> decodes;
  std::size_t target_tokens() const {
    std::size_t n = 0;
    for (const auto& d : decodes) n += d.targets.size();
    return n;
  }
};

struct EncodedQuery {
  std::vector<std::uint32_t> tokens;
  ad::Matrix hidden;  // tokens x d
};

class SeqModel {
 public:
  /// `users` seeds the group-token rows, which stay frozen; without it they
  /// are random (and still frozen).
  SeqModel(const SeqModelConfig& config, const IdentifierVocabulary& vocab,
           const UserEmbeddingTable* users = nullptr)
      : config_(config), vocab_(vocab) {
    const auto d = Eigen::Index(config.d_model), f = Eigen::Index(config.ff);
    Rng rng(derive_seed(config.seed, "seqmodel/init"));
    const double sd = 1.0 / std::sqrt(double(d));
    ad::Matrix tok = ad::random_matrix(Eigen::Index(vocab.size()), d, sd, rng);
    if (users) {
      if (users->dim() != config.d_model)
        throw ConfigError("user embedding dimension " + std::to_string(users->dim()) + " != model dimension " +
                          std::to_string(config.d_model));
      tok.middleRows(vocab.group_base(), Eigen::Index(kNumGroups)) = users->matrix();
    }
    tok_ = params_.add("tok", std::move(tok));
    params_.freeze_rows(tok_, vocab.group_base(), vocab.group_base() + Eigen::Index(kNumGroups));
    pos_enc_ = params_.add("pos_enc", ad::random_matrix(Eigen::Index(config.max_enc_len), d, 0.1, rng));
    pos_dec_ = params_.add("pos_dec", ad::random_matrix(Eigen::Index(config.max_dec_len), d, 0.1, rng));
    auto ln = [&](const std::string& name) {
      return Norm{params_.add(name + ".g", ad::Matrix::Ones(1, d)), params_.add(name + ".b", ad::Matrix::Zero(1, d))};
    };
    auto att = [&](const std::string& name) {
      Attn a;
      a.wq = params_.add(name + ".wq", ad::random_matrix(d, d, sd, rng));
      a.wk = params_.add(name + ".wk", ad::random_matrix(d, d, sd, rng));
      a.wv = params_.add(name + ".wv", ad::random_matrix(d, d, sd, rng));
      a.wo = params_.add(name + ".wo", ad::random_matrix(d, d, sd, rng));
      return a;
    };
    auto ffn = [&](const std::string& name) {
      Ffn n;
      n.w1 = params_.add(name + ".w1", ad::random_matrix(f, d, sd, rng));
      n.b1 = params_.add(name + ".b1", ad::Matrix::Zero(1, f));
      n.w2 = params_.add(name + ".w2", ad::random_matrix(d, f, 1.0 / std::sqrt(double(f)), rng));
      n.b2 = params_.add(name + ".b2", ad::Matrix::Zero(1, d));
      return n;
    };
    enc_ln1_ = ln("enc.ln1");
    enc_att_ = att("enc.att");
    enc_ln2_ = ln("enc.ln2");
    enc_ff_ = ffn("enc.ff");
    enc_lnf_ = ln("enc.lnf");
    dec_ln1_ = ln("dec.ln1");
    dec_self_ = att("dec.self");
    dec_ln2_ = ln("dec.ln2");
    dec_cross_ = att("dec.cross");
    dec_ln3_ = ln("dec.ln3");
    dec_ff_ = ffn("dec.ff");
    dec_lnf_ = ln("dec.lnf");
    out_w_ = params_.add("out.w", ad::random_matrix(Eigen::Index(vocab.output_size()), d, sd, rng));
    out_b_ = params_.add("out.b", ad::Matrix::Zero(1, Eigen::Index(vocab.output_size())));
  }

  const SeqModelConfig& config() const { return config_; }
  const IdentifierVocabulary& vocab() const { return vocab_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }
  std::size_t token_param() const { return tok_; }

  /// Group-token rows of the token table.
  ad::Matrix group_rows() const {
    return params_.value(tok_).middleRows(vocab_.group_base(), Eigen::Index(kNumGroups));
  }

  // -- Inputs ----------------------------------------------------------------

  /// [w_g] ++ query tokens when user embeddings are on and a group is given.
  std::vector<std::uint32_t> query_tokens(std::optional<UserGroup> group, std::string_view query) const {
    std::vector<std::uint32_t> out;
    if (config_.use_user_embedding && group) out.push_back(vocab_.group_token(*group));
    for (auto t : vocab_.encode_text(query)) out.push_back(t);
    if (out.size() > config_.max_enc_len) out.resize(config_.max_enc_len);
    return out;
  }

  std::vector<std::uint32_t> content_tokens(std::string_view content) const {
    auto out = vocab_.encode_text(content);
    if (out.size() > config_.max_enc_len) out.resize(config_.max_enc_len);
    return out;
  }

  // -- Inference -------------------------------------------------------------

  EncodedQuery encode(const std::vector<std::uint32_t>& tokens) const {
    ad::Tape t(params_, false);
    EncodedQuery q;
    q.tokens = tokens;
    q.hidden = t.value(encoder(t, tokens));
    return q;
  }

  EncodedQuery encode(std::optional<UserGroup> group, std::string_view query) const {
    return encode(query_tokens(group, query));
  }

  /// Log-probabilities over the output vocabulary for the token following
  /// `prefix` (vocabulary ids). Throws ContractError unless prefix[0] is a
  /// property prefix token.
  std::vector<double> next_token_logprobs(const std::vector<std::uint32_t>& prefix, const EncodedQuery& q) const {
    check_prefix(prefix);
    ad::Tape t(params_, false);
    ad::Var logits = decoder(t, prefix, t.input(q.hidden));
    const ad::Matrix& z = t.value(logits);
    const Eigen::Index r = z.rows() - 1;
    double mx = z.row(r).maxCoeff();
    double lse = mx + std::log((z.row(r).array() - mx).exp().sum());
    std::vector<double> out(std::size_t(z.cols()));
    for (Eigen::Index c = 0; c < z.cols(); ++c) out[std::size_t(c)] = z(r, c) - lse;
    return out;
  }

  std::vector<double> next_token_distribution(const std::vector<std::uint32_t>& prefix, const EncodedQuery& q) const {
    auto lp = next_token_logprobs(prefix, q);
    for (auto& x : lp) x = std::exp(x);
    return lp;
  }

  /// log P(code | q, w_p) under teacher forcing.
  double sequence_logprob(Property p, const std::vector<std::uint32_t>& code_tokens, const EncodedQuery& q) const {
    std::vector<std::uint32_t> dec{vocab_.prefix_token(p)};
    dec.insert(dec.end(), code_tokens.begin(), code_tokens.end() - (code_tokens.empty() ? 0 : 1));
    ad::Tape t(params_, false);
    const ad::Matrix& z = t.value(decoder(t, dec, t.input(q.hidden)));
    double lp = 0.0;
    for (std::size_t i = 0; i < code_tokens.size(); ++i)
      lp += ad::Tape::log_softmax_at(z.row(Eigen::Index(i)), int(vocab_.output_index(code_tokens[i])));
    return lp;
  }

  // -- Losses ----------------------------------------------------------------

  /// Weighted sequence NLL summed over every example; with `grads`,
  /// accumulates the gradient.
  double loss(const std::vector<SeqExample>& batch, ad::Gradients* grads = nullptr) const {
    double total = 0.0;
    for (const auto& ex : batch) total += loss_one(ex, grads);
    return total;
  }

  double loss_one(const SeqExample& ex, ad::Gradients* grads) const {
    if (ex.decodes.empty()) return 0.0;
    ad::Tape t(params_, grads != nullptr);
    ad::Var h = encoder(t, ex.encoder_tokens);
    std::vector<ad::Var> parts;
    for (const auto& d : ex.decodes) {
      if (d.targets.empty()) throw ContractError("empty decode target");
      std::vector<std::uint32_t> dec{vocab_.prefix_token(d.property)};
      for (std::size_t i = 0; i + 1 < d.targets.size(); ++i) dec.push_back(vocab_.output_token(std::uint32_t(d.targets[i])));
      ad::Var logits = decoder(t, dec, h);
      parts.push_back(t.cross_entropy(logits, d.targets, std::vector<double>(d.targets.size(), d.weight)));
    }
    ad::Var l = t.sum(parts);
    if (grads) t.backward(l, *grads);
    return t.scalar(l);
  }

  // -- Persistence -----------------------------------------------------------

  void save(const std::string& path, std::uint64_t config_hash) const {
    auto c = Checkpoint::from_parameters("seqmodel", params_);
    c.vocab_hash = vocab_.hash();
    c.config_hash = config_hash;
    c.meta["d_model"] = std::to_string(config_.d_model);
    c.meta["ff"] = std::to_string(config_.ff);
    c.meta["max_enc_len"] = std::to_string(config_.max_enc_len);
    c.meta["max_dec_len"] = std::to_string(config_.max_dec_len);
    c.meta["use_user_embedding"] = config_.use_user_embedding ? "1" : "0";
    c.meta["seed"] = std::to_string(config_.seed);
    c.save(path);
  }

  /// Reconstructs a model from a checkpoint; the vocabulary must match.
  static SeqModel load(const std::string& path, const IdentifierVocabulary& vocab) {
    auto c = Checkpoint::load(path);
    if (c.kind != "seqmodel") throw ParseError("'" + path + "' is not a sequence model checkpoint");
    if (c.vocab_hash != vocab.hash())
      throw ValidationError("checkpoint '" + path + "' was trained on a different index vocabulary");
    SeqModelConfig cfg;
    try {
      cfg.d_model = std::stoul(c.meta.at("d_model"));
      cfg.ff = std::stoul(c.meta.at("ff"));
      cfg.max_enc_len = std::stoul(c.meta.at("max_enc_len"));
      cfg.max_dec_len = std::stoul(c.meta.at("max_dec_len"));
      cfg.use_user_embedding = c.meta.at("use_user_embedding") == "1";
      cfg.seed = std::stoull(c.meta.at("seed"));
    } catch (const std::exception&) {
      throw ParseError("checkpoint '" + path + "' has incomplete metadata");
    }
    SeqModel m(cfg, vocab);
    c.restore(m.params_);
    return m;
  }

 private:
  struct Norm {
    std::size_t g = 0, b = 0;
  };
  struct Attn {
    std::size_t wq = 0, wk = 0, wv = 0, wo = 0;
  };
  struct Ffn {
    std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;
  };

  void check_prefix(const std::vector<std::uint32_t>& prefix) const {
    if (prefix.empty() || prefix[0] < vocab_.prefix_base() || prefix[0] >= vocab_.group_base())
      throw ContractError("decoder prefix must start with a property prefix token");
    if (prefix.size() > config_.max_dec_len) throw ContractError("decoder prefix exceeds the maximum length");
  }

  ad::Var norm(ad::Tape& t, const Norm& n, ad::Var x) const {
    return t.layer_norm(x, t.param(n.g), t.param(n.b));
  }

  ad::Var attention(ad::Tape& t, const Attn& a, ad::Var x, ad::Var mem, bool causal) const {
    ad::Var q = t.matmul_nt(x, t.param(a.wq));
    ad::Var k = t.matmul_nt(mem, t.param(a.wk));
    ad::Var v = t.matmul_nt(mem, t.param(a.wv));
    ad::Var w = t.softmax(t.scale(t.matmul_nt(q, k), 1.0 / std::sqrt(double(config_.d_model))), causal);
    return t.matmul_nt(t.matmul(w, v), t.param(a.wo));
  }

  ad::Var feed_forward(ad::Tape& t, const Ffn& f, ad::Var x) const {
    ad::Var h = t.gelu(t.add_bias(t.matmul_nt(x, t.param(f.w1)), t.param(f.b1)));
    return t.add_bias(t.matmul_nt(h, t.param(f.w2)), t.param(f.b2));
  }

  ad::Var embed(ad::Tape& t, const std::vector<std::uint32_t>& ids, std::size_t pos_param) const {
    std::vector<int> rows(ids.begin(), ids.end()), pos(ids.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = int(i);
    return t.add(t.gather(tok_, std::move(rows)), t.gather(pos_param, std::move(pos)));
  }

  ad::Var encoder(ad::Tape& t, const std::vector<std::uint32_t>& ids) const {
    if (ids.empty()) throw ContractError("empty encoder input");
    if (ids.size() > config_.max_enc_len) throw ContractError("encoder input exceeds the maximum length");
    ad::Var x = embed(t, ids, pos_enc_);
    ad::Var a = norm(t, enc_ln1_, x);
    x = t.add(x, attention(t, enc_att_, a, a, false));
    x = t.add(x, feed_forward(t, enc_ff_, norm(t, enc_ln2_, x)));
    return norm(t, enc_lnf_, x);
  }

  ad::Var decoder(ad::Tape& t, const std::vector<std::uint32_t>& ids, ad::Var memory) const {
    ad::Var y = embed(t, ids, pos_dec_);
    ad::Var a = norm(t, dec_ln1_, y);
    y = t.add(y, attention(t, dec_self_, a, a, true));
    y = t.add(y, attention(t, dec_cross_, norm(t, dec_ln2_, y), memory, false));
    y = t.add(y, feed_forward(t, dec_ff_, norm(t, dec_ln3_, y)));
    return t.add_bias(t.matmul_nt(norm(t, dec_lnf_, y), t.param(out_w_)), t.param(out_b_));
  }

  SeqModelConfig config_;
  IdentifierVocabulary vocab_;
  ad::ParameterSet params_;
  std::size_t tok_ = 0, pos_enc_ = 0, pos_dec_ = 0, out_w_ = 0, out_b_ = 0;
  Norm enc_ln1_, enc_ln2_, enc_lnf_, dec_ln1_, dec_ln2_, dec_ln3_, dec_lnf_;
  Attn enc_att_, dec_self_, dec_cross_;
  Ffn enc_ff_, dec_ff_;
};

// ---------------------------------------------------------------------------
// Example construction.
// ---------------------------------------------------------------------------

inline std::vector<int> output_targets(const StickerIndex& index, const Code& code) {
  std::vector<int> out;
  for (auto tok : index.code_tokens(code)) out.push_back(int(index.vocab.output_index(tok)));
  return out;
}

/// Indexing examples: content_p -> code_p for every sticker and property.
/// Stickers with identical (property, content) share code and input, so they
/// are merged into one example weighted by their count; the summed loss is
/// unchanged.
inline std::vector<SeqExample> make_indexing_examples(const Corpus& corpus, const StickerIndex& index,
                                                      const SeqModel& model) {
  if (index.size() != corpus.size()) throw ValidationError("index and corpus disagree on sticker count");
  std::vector<SeqExample> out;
  std::map<std::pair<std::size_t, std::string>, std::size_t> seen;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (Property p : kAllProperties) {
      const Code& code = index.code(i, p);
      if (code.empty()) throw ValidationError("sticker '" + corpus[i].id + "' has no " + std::string(property_name(p)) + " code");
      auto key = std::make_pair(index_of(p), corpus[i].text(p));
      auto it = seen.find(key);
      if (it != seen.end()) {
        out[it->second].decodes[0].weight += 1.0;
        continue;
      }
      seen.emplace(key, out.size());
      SeqExample ex;
      ex.encoder_tokens = model.content_tokens(corpus[i].text(p));
      ex.decodes.push_back({p, output_targets(index, code), 1.0});
      out.push_back(std::move(ex));
    }
  }
  return out;
}

/// Retrieval examples grouped by (group, query): one encoder input, one
/// decode per distinct (property, code) with weight d_p times multiplicity.
/// `ranking_of` must return the query's intent ranking (or throw).
inline std::vector<SeqExample> make_retrieval_examples(const std::vector<Triplet>& triplets, const StickerIndex& index,
                                                       const SeqModel& model,
                                                       const std::function<IntentRanking(const std::string&)>& ranking_of,
                                                       bool use_intent_loss) {
  std::vector<SeqExample> out;
  std::map<std::pair<std::size_t, std::string>, std::size_t> by_query;
  std::vector<std::map<std::pair<std::size_t, Code>, std::size_t>> decode_slot;
  for (const auto& tr : triplets) {
    auto s = index.find(tr.sticker_id);
    if (!s) throw ValidationError("triplet references unknown sticker '" + tr.sticker_id + "'");
    IntentRanking r = ranking_of(tr.query);
    auto key = std::make_pair(tr.group.index(), tr.query);
    auto it = by_query.find(key);
    if (it == by_query.end()) {
      it = by_query.emplace(key, out.size()).first;
      SeqExample ex;
      ex.encoder_tokens = model.query_tokens(tr.group, tr.query);
      out.push_back(std::move(ex));
      decode_slot.emplace_back();
    }
    SeqExample& ex = out[it->second];
    for (Property p : kAllProperties) {
      double w = use_intent_loss ? decay_weight(r.rank(p)) : 1.0;
      const Code& code = index.code(*s, p);
      auto slot_key = std::make_pair(index_of(p), code);
      auto& slots = decode_slot[it->second];
      auto sit = slots.find(slot_key);
      if (sit != slots.end()) {
        ex.decodes[sit->second].weight += w;
      } else {
        slots.emplace(slot_key, ex.decodes.size());
        ex.decodes.push_back({p, output_targets(index, code), w});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

struct TrainingLogEntry {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double indexing_loss = 0.0;   // summed over the epoch
  double retrieval_loss = 0.0;
};

struct TrainingReport {
  std::vector<TrainingLogEntry> epochs;
  std::size_t steps = 0;
};

/// Mini-batch descent on L_T. Batches are filled by target-token count; the
/// gradient is the batch sum divided by its token count. Throws TrainingError
/// when the loss becomes non-finite.
inline TrainingReport train_seqmodel(SeqModel& model, const std::vector<SeqExample>& indexing,
                                     const std::vector<SeqExample>& retrieval, const TrainingConfig& cfg,
                                     const std::function<void(const TrainingLogEntry&)>& on_epoch = {}) {
  struct Unit {
    const SeqExample* ex;
    bool is_indexing;
  };
  std::vector<Unit> units;
  if (cfg.use_indexing_loss)
    for (const auto& e : indexing) units.push_back({&e, true});
  if (cfg.use_retrieval_loss)
    for (const auto& e : retrieval) units.push_back({&e, false});
  if (units.empty()) throw TrainingError("no training examples");

  ad::OptimizerConfig oc;
  oc.kind = cfg.optimizer;
  oc.learning_rate = cfg.learning_rate;
  oc.weight_decay = cfg.weight_decay;
  oc.clip_norm = cfg.clip_norm;
  ad::Optimizer opt(model.params(), oc);
  Rng rng(derive_seed(cfg.seed, "seqmodel/order"));
  std::vector<std::size_t> order(units.size());

  TrainingReport report;
  double last_finite = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    TrainingLogEntry log;
    log.epoch = epoch;
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      ad::Gradients grads(model.params());
      std::size_t tokens = 0;
      double batch_loss = 0.0;
      while (cursor < order.size() && tokens < cfg.batch_tokens) {
        const Unit& u = units[order[cursor++]];
        double l = model.loss_one(*u.ex, &grads);
        tokens += u.ex->target_tokens();
        batch_loss += l;
        (u.is_indexing ? log.indexing_loss : log.retrieval_loss) += l;
      }
      if (!std::isfinite(batch_loss) || !grads.all_finite())
        throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(report.steps) + " (batch loss " + std::to_string(batch_loss) +
                            ", last finite " + std::to_string(last_finite) + ")");
      last_finite = batch_loss;
      grads *= 1.0 / double(std::max<std::size_t>(tokens, 1));
      opt.step(model.params(), std::move(grads));
      ++report.steps;
      ++log.steps;
    }
    if (!model.params().all_finite()) throw TrainingError("parameters became non-finite at epoch " + std::to_string(epoch));
    report.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return report;
}

/// Greedy constrained decode: at every step the most probable child of the
/// current tree node (ties to the lower symbol), stopping at a node without
/// children.
inline Code greedy_decode(const SeqModel& model, const StickerIndex& index, Property p, const EncodedQuery& q) {
  const PrefixTree& tree = index.tree(p);
  std::vector<std::uint32_t> prefix{model.vocab().prefix_token(p)};
  Code code;
  std::uint32_t node = PrefixTree::root();
  while (!tree.node(node).children.empty()) {
    auto lp = model.next_token_logprobs(prefix, q);
    double best = -std::numeric_limits<double>::infinity();
    std::pair<std::uint32_t, std::uint32_t> pick{0, 0};
    for (auto [sym, child] : tree.node(node).children) {
      auto tok = model.vocab().code_token(code.size(), sym);
      double v = lp[model.vocab().output_index(tok)];
      if (v > best) best = v, pick = {sym, child};
    }
    code.push_back(pick.first);
    prefix.push_back(model.vocab().code_token(code.size() - 1, pick.first));
    node = pick.second;
  }
  return code;
}

}  // namespace stickergen
