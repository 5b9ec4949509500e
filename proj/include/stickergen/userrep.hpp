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

// Personalized user-group representations. One embedding per user group is
// learned jointly with three auxiliary tasks over click logs: click
// prediction (query vs. sticker meaning), intent prediction (5-way, gold class
// from the intent resolver) and interest prediction (query vs. sticker IP and
// entity, separate heads). The trained table is frozen and handed to the
// sequence model.
//
// Attention everywhere is single-query: the query side is one d-vector
// (a pooled text embedding or a group embedding) attending over a token
// sequence, softmax((Wq h) . (Wk k_t) / sqrt(d)) weighted sum of Wv v_t.

#pragma once

#include <array>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "stickergen/autodiff.hpp"
#include "stickergen/checkpoint.hpp"
#include "stickergen/corpus.hpp"
#include "stickergen/embed.hpp"

namespace stickergen {

enum class InterestKind { kIp, kEntity };

struct UserRepConfig {
  std::size_t dim = 64;
  std::size_t hidden = 128;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t steps = 400;
  std::uint64_t seed = 7;
  bool use_click = true;
  bool use_intent = true;
  bool use_interest = true;

  std::uint64_t hash() const {
    std::string s = std::to_string(dim) + "/" + std::to_string(hidden) + "/" +
                    std::to_string(learning_rate) + "/" + std::to_string(batch_size) + "/" +
                    std::to_string(steps) + "/" + std::to_string(seed) + "/" +
                    std::to_string(use_click) + std::to_string(use_intent) + std::to_string(use_interest);
    return fnv1a64(s);
  }
};

/// Eight group vectors; once frozen, updates are rejected.
class UserEmbeddingTable {
 public:
  UserEmbeddingTable() = default;
  explicit UserEmbeddingTable(ad::Matrix vectors, bool frozen = false)
      : vectors_(std::move(vectors)), frozen_(frozen) {
    if (vectors_.rows() != Eigen::Index(kNumGroups))
      throw ValidationError("user embedding table needs 8 rows");
    if (!vectors_.allFinite()) throw ValidationError("user embedding table is not finite");
  }

  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }
  std::size_t dim() const { return std::size_t(vectors_.cols()); }
  const ad::Matrix& matrix() const { return vectors_; }
  Vec vector(UserGroup g) const { return vectors_.row(Eigen::Index(g.index())).transpose(); }

  /// Plain gradient step; throws ContractError on a frozen table.
  void apply_gradient(const ad::Matrix& grad, double lr) {
    if (frozen_) throw ContractError("gradient applied to a frozen user embedding table");
    vectors_ -= lr * grad;
  }

 private:
  ad::Matrix vectors_;
  bool frozen_ = false;
};

/// One click-log record with embeddings resolved.
struct UserRepExample {
  std::size_t group = 0;
  ad::Matrix query;    // tokens x d
  ad::Matrix meaning;  // tokens x d
  ad::Matrix ip;
  ad::Matrix entity;
  double clicked = 0.0;
  int gold_intent = 0;  // index_of(Property)
};

struct UserRepLosses {
  double click = 0.0;
  double intent = 0.0;
  double interest = 0.0;
  double total = 0.0;
};

struct CurvePoint {
  std::size_t step = 0;
  UserRepLosses loss;
};

class UserRepModel {
 public:
  UserRepModel(const UserRepConfig& config) : config_(config) {
    const auto d = Eigen::Index(config.dim), h = Eigen::Index(config.hidden);
    Rng rng(derive_seed(config.seed, "userrep/init"));
    const double sd = 1.0 / std::sqrt(double(d));
    ue_ = params_.add("ue", ad::random_matrix(Eigen::Index(kNumGroups), d, sd, rng));
    wq_ = params_.add("att.wq", ad::random_matrix(d, d, sd, rng));
    wk_ = params_.add("att.wk", ad::random_matrix(d, d, sd, rng));
    wv_ = params_.add("att.wv", ad::random_matrix(d, d, sd, rng));
    auto head = [&](const std::string& name, Eigen::Index in, Eigen::Index out) {
      Head hd;
      hd.w1 = params_.add(name + ".w1", ad::random_matrix(h, in, 1.0 / std::sqrt(double(in)), rng));
      hd.b1 = params_.add(name + ".b1", ad::Matrix::Zero(1, h));
      hd.w2 = params_.add(name + ".w2", ad::random_matrix(out, h, 1.0 / std::sqrt(double(h)), rng));
      hd.b2 = params_.add(name + ".b2", ad::Matrix::Zero(1, out));
      return hd;
    };
    click_ = head("click", 2 * d, 1);
    intent_ = head("intent", d, Eigen::Index(kNumProperties));
    interest_ip_ = head("interest_ip", 2 * d, 1);
    interest_entity_ = head("interest_entity", 2 * d, 1);
  }

  const UserRepConfig& config() const { return config_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }

  UserEmbeddingTable table() const { return UserEmbeddingTable(params_.value(ue_)); }

  // -- Forward pieces --------------------------------------------------------

  /// Returns the attended d-vector; `weights` receives the softmax weights.
  Vec attention(const Vec& query, const ad::Matrix& keys, const ad::Matrix& values,
                std::vector<double>* weights = nullptr) const {
    if (keys.rows() == 0) throw ContractError("attention over an empty key sequence");
    if (keys.rows() != values.rows()) throw ContractError("attention keys/values length mismatch");
    ad::Tape t(params_, false);
    ad::Var w;
    ad::Var out = attend(t, t.input(ad::Matrix(query.transpose())), t.input(keys), t.input(values), &w);
    if (weights) weights->assign(t.value(w).data(), t.value(w).data() + t.value(w).size());
    return t.value(out).row(0).transpose();
  }

  double predict_click(const ad::Matrix& query, const ad::Matrix& meaning, UserGroup g) const {
    ad::Tape t(params_, false);
    return ad::Tape::sigmoid(t.scalar(pair_logit(t, click_, query, meaning, g.index())));
  }

  std::array<double, kNumProperties> predict_intent(const ad::Matrix& query, UserGroup g) const {
    ad::Tape t(params_, false);
    ad::Matrix p = ad::Tape::softmax_rows(t.value(intent_logits(t, query, g.index())), false);
    std::array<double, kNumProperties> out{};
    for (std::size_t i = 0; i < kNumProperties; ++i) out[i] = p(0, Eigen::Index(i));
    return out;
  }

  double predict_interest(const ad::Matrix& query, const ad::Matrix& text, UserGroup g, InterestKind kind) const {
    ad::Tape t(params_, false);
    const Head& hd = kind == InterestKind::kIp ? interest_ip_ : interest_entity_;
    return ad::Tape::sigmoid(t.scalar(pair_logit(t, hd, query, text, g.index())));
  }

  // -- Losses ----------------------------------------------------------------

  /// Summed losses over `batch`; with `grads` set, accumulates d(total).
  UserRepLosses losses(const std::vector<const UserRepExample*>& batch, ad::Gradients* grads = nullptr) const {
    UserRepLosses out;
    for (const UserRepExample* ex : batch) {
      ad::Tape t(params_, grads != nullptr);
      std::vector<ad::Var> parts;
      ad::Var lc{}, li{}, lip{}, len{};
      if (config_.use_click) {
        lc = t.bce_with_logits(pair_logit(t, click_, ex->query, ex->meaning, ex->group), ex->clicked);
        out.click += t.scalar(lc);
        parts.push_back(lc);
      }
      if (config_.use_intent) {
        li = t.cross_entropy(intent_logits(t, ex->query, ex->group), {ex->gold_intent});
        out.intent += t.scalar(li);
        parts.push_back(li);
      }
      if (config_.use_interest) {
        lip = t.bce_with_logits(pair_logit(t, interest_ip_, ex->query, ex->ip, ex->group), ex->clicked);
        len = t.bce_with_logits(pair_logit(t, interest_entity_, ex->query, ex->entity, ex->group), ex->clicked);
        out.interest += t.scalar(lip) + t.scalar(len);
        parts.push_back(lip);
        parts.push_back(len);
      }
      if (parts.empty()) continue;
      ad::Var total = t.sum(parts);
      if (grads) t.backward(total, *grads);
    }
    out.total = out.click + out.intent + out.interest;
    return out;
  }

  /// Loss of a single interest head only (used to check head separation).
  double interest_loss(const UserRepExample& ex, InterestKind kind, ad::Gradients* grads) const {
    ad::Tape t(params_, grads != nullptr);
    const Head& hd = kind == InterestKind::kIp ? interest_ip_ : interest_entity_;
    const ad::Matrix& text = kind == InterestKind::kIp ? ex.ip : ex.entity;
    ad::Var l = t.bce_with_logits(pair_logit(t, hd, ex.query, text, ex.group), ex.clicked);
    if (grads) t.backward(l, *grads);
    return t.scalar(l);
  }

  void save(const std::string& path) const {
    auto c = Checkpoint::from_parameters("userrep", params_);
    c.config_hash = config_.hash();
    c.meta["dim"] = std::to_string(config_.dim);
    c.meta["hidden"] = std::to_string(config_.hidden);
    c.save(path);
  }

  void load(const std::string& path) {
    auto c = Checkpoint::load(path);
    if (c.kind != "userrep") throw ParseError("'" + path + "' is not a user representation checkpoint");
    c.restore(params_);
  }

 private:
  struct Head {
    std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;
  };

  ad::Var attend(ad::Tape& t, ad::Var query_row, ad::Var keys, ad::Var values, ad::Var* weights = nullptr) const {
    ad::Var q = t.matmul_nt(query_row, t.param(wq_));
    ad::Var k = t.matmul_nt(keys, t.param(wk_));
    ad::Var v = t.matmul_nt(values, t.param(wv_));
    ad::Var scores = t.scale(t.matmul_nt(q, k), 1.0 / std::sqrt(double(config_.dim)));
    ad::Var w = t.softmax(scores);
    if (weights) *weights = w;
    return t.matmul(w, v);
  }

  ad::Var mlp(ad::Tape& t, const Head& hd, ad::Var x) const {
    ad::Var hidden = t.gelu(t.add_bias(t.matmul_nt(x, t.param(hd.w1)), t.param(hd.b1)));
    return t.add_bias(t.matmul_nt(hidden, t.param(hd.w2)), t.param(hd.b2));
  }

  ad::Var group_row(ad::Tape& t, std::size_t group) const { return t.gather(ue_, {int(group)}); }

  /// head(concat(A(pool(query), text, text), A(UE(group), text, text)))
  ad::Var pair_logit(ad::Tape& t, const Head& hd, const ad::Matrix& query, const ad::Matrix& text,
                     std::size_t group) const {
    ad::Var txt = t.input(text);
    ad::Var pooled = t.input(query.colwise().mean());
    ad::Var hq = attend(t, pooled, txt, txt);
    ad::Var hu = attend(t, group_row(t, group), txt, txt);
    return mlp(t, hd, t.concat_cols(hq, hu));
  }

  ad::Var intent_logits(ad::Tape& t, const ad::Matrix& query, std::size_t group) const {
    ad::Var q = t.input(query);
    return mlp(t, intent_, attend(t, group_row(t, group), q, q));
  }

  UserRepConfig config_;
  ad::ParameterSet params_;
  std::size_t ue_ = 0, wq_ = 0, wk_ = 0, wv_ = 0;
  Head click_, intent_, interest_ip_, interest_entity_;
};

/// Resolves log records against the corpus; `gold_intent(query)` yields the
/// top-ranked property for the intent task.
template <typename GoldIntent>
std::vector<UserRepExample> make_userrep_examples(const std::vector<ClickLogRecord>& logs, const Corpus& corpus,
                                                  const EmbeddingProvider& embed, GoldIntent&& gold_intent) {
  std::unordered_map<std::string, ad::Matrix> cache;
  auto emb = [&](const std::string& text) -> const ad::Matrix& {
    auto it = cache.find(text);
    if (it != cache.end()) return it->second;
    return cache.emplace(text, ad::Matrix(embed.embed_text(text).matrix())).first->second;
  };
  std::vector<UserRepExample> out;
  out.reserve(logs.size());
  for (const auto& r : logs) {
    const Sticker& s = corpus.at(r.sticker_id);
    UserRepExample ex;
    ex.group = r.profile.group.index();
    ex.query = emb(r.query);
    ex.meaning = emb(s.meaning);
    ex.ip = emb(s.ip);
    ex.entity = emb(s.entity);
    ex.clicked = r.clicked ? 1.0 : 0.0;
    ex.gold_intent = int(index_of(gold_intent(r.query)));
    out.push_back(std::move(ex));
  }
  return out;
}

struct UserRepTrainingResult {
  UserEmbeddingTable table;  // frozen
  std::vector<CurvePoint> curve;
};

/// Mini-batch descent on the unweighted sum of the enabled task losses.
/// Throws TrainingError when a group has no log records.
inline UserRepTrainingResult train_user_embeddings(UserRepModel& model, const std::vector<UserRepExample>& examples) {
  const auto& cfg = model.config();
  std::array<std::size_t, kNumGroups> per_group{};
  for (const auto& ex : examples) ++per_group[ex.group];
  for (std::size_t g = 0; g < kNumGroups; ++g)
    if (per_group[g] == 0)
      throw TrainingError("user group " + UserGroup::from_index(g).name() + " has no click log records");

  ad::OptimizerConfig oc;
  oc.learning_rate = cfg.learning_rate;
  ad::Optimizer opt(model.params(), oc);
  Rng rng(derive_seed(cfg.seed, "userrep/order"));
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  UserRepTrainingResult result;
  std::size_t cursor = 0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<const UserRepExample*> batch;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        cursor = 0;
        rng.shuffle(order);
      }
      batch.push_back(&examples[order[cursor++]]);
    }
    ad::Gradients grads(model.params());
    UserRepLosses l = model.losses(batch, &grads);
    double inv = 1.0 / double(batch.size());
    l.click *= inv, l.intent *= inv, l.interest *= inv, l.total *= inv;
    if (!std::isfinite(l.total)) throw TrainingError("user representation loss diverged at step " + std::to_string(step));
    result.curve.push_back({step, l});
    grads *= inv;
    opt.step(model.params(), std::move(grads));
  }
  result.table = model.table();
  result.table.freeze();
  return result;
}

inline void write_curve(const std::string& path, const std::vector<CurvePoint>& curve) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write training curve '" + path + "'");
  out << "step\tclick\tintent\tinterest\ttotal\n";
  out.precision(10);
  for (const auto& c : curve)
    out << c.step << '\t' << c.loss.click << '\t' << c.loss.intent << '\t' << c.loss.interest << '\t'
        << c.loss.total << '\n';
}

inline void save_user_table(const std::string& path, const UserEmbeddingTable& table) {
  Checkpoint c;
  c.kind = "user-table";
  c.meta["frozen"] = table.frozen() ? "1" : "0";
  c.tensors.emplace_back("ue", table.matrix());
  c.save(path);
}

inline UserEmbeddingTable load_user_table(const std::string& path) {
  auto c = Checkpoint::load(path);
  if (c.kind != "user-table") throw ParseError("'" + path + "' is not a user embedding table");
  return UserEmbeddingTable(c.tensor("ue"), c.meta["frozen"] == "1");
}

}  // namespace stickergen
