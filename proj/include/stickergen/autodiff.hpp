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

// Minimal reverse-mode differentiation over dense row-major matrices. A Tape
// records one forward pass; backward() accumulates parameter gradients into
// a Gradients buffer. Parameters are referenced, never copied.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stickergen/common.hpp"

namespace stickergen::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// Named parameter tensors. Rows may be frozen: the optimizer never writes
/// them, gradients are still computed.
class ParameterSet {
 public:
  std::size_t add(std::string name, Matrix init) {
    if (index_.count(name)) throw ContractError("duplicate parameter '" + name + "'");
    index_[name] = values_.size();
    names_.push_back(std::move(name));
    values_.push_back(std::move(init));
    frozen_.emplace_back();
    return values_.size() - 1;
  }

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Matrix& value(std::size_t i) { return values_.at(i); }
  const Matrix& value(std::size_t i) const { return values_.at(i); }

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t id(const std::string& name) const {
    auto f = find(name);
    if (!f) throw ContractError("unknown parameter '" + name + "'");
    return *f;
  }

  /// Freezes rows [begin, end) of parameter i.
  void freeze_rows(std::size_t i, Index begin, Index end) { frozen_.at(i).emplace_back(begin, end); }
  void freeze(std::size_t i) { freeze_rows(i, 0, values_.at(i).rows()); }
  const std::vector<std::pair<Index, Index>>& frozen_rows(std::size_t i) const { return frozen_.at(i); }
  bool row_frozen(std::size_t i, Index r) const {
    for (auto [b, e] : frozen_[i])
      if (r >= b && r < e) return true;
    return false;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += std::size_t(v.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& v : values_)
      if (!v.allFinite()) return false;
    return true;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::vector<std::vector<std::pair<Index, Index>>> frozen_;
  std::map<std::string, std::size_t> index_;
};

class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParameterSet& params) {
    grads_.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i)
      grads_.push_back(Matrix::Zero(params.value(i).rows(), params.value(i).cols()));
  }

  std::size_t size() const { return grads_.size(); }
  Matrix& operator[](std::size_t i) { return grads_[i]; }
  const Matrix& operator[](std::size_t i) const { return grads_[i]; }

  void zero() {
    for (auto& g : grads_) g.setZero();
  }
  Gradients& operator+=(const Gradients& o) {
    for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += o.grads_[i];
    return *this;
  }
  Gradients& operator*=(double s) {
    for (auto& g : grads_) g *= s;
    return *this;
  }
  double squared_norm() const {
    double s = 0.0;
    for (const auto& g : grads_) s += g.squaredNorm();
    return s;
  }
  bool all_finite() const {
    for (const auto& g : grads_)
      if (!g.allFinite()) return false;
    return true;
  }

 private:
  std::vector<Matrix> grads_;
};

struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  /// With `record` false no backward closures are kept (inference).
  explicit Tape(const ParameterSet& params, bool record = true) : params_(&params), record_(record) {
    nodes_.reserve(128);
  }

  const Matrix& value(Var v) const {
    const Node& n = nodes_[v.id];
    return n.ref ? *n.ref : n.val;
  }
  double scalar(Var v) const { return value(v)(0, 0); }

  Var param(std::size_t pid) {
    Node n;
    n.ref = &params_->value(pid);
    n.needs_grad = record_;
    n.param = static_cast<long>(pid);
    return push(std::move(n));
  }

  Var input(Matrix m) {
    Node n;
    n.val = std::move(m);
    return push(std::move(n));
  }

  /// Rows of parameter `pid` (embedding lookup).
  Var gather(std::size_t pid, std::vector<int> rows) {
    const Matrix& table = params_->value(pid);
    Node n;
    n.val.resize(Index(rows.size()), table.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] < 0 || rows[i] >= table.rows()) throw ContractError("gather row out of range");
      n.val.row(Index(i)) = table.row(rows[i]);
    }
    n.needs_grad = record_;
    Var out = push(std::move(n));
    if (record_) {
      nodes_[out.id].back = [out, pid, rows = std::move(rows)](Tape& t, Gradients& g) {
        const Matrix& d = t.nodes_[out.id].grad;
        for (std::size_t i = 0; i < rows.size(); ++i) g[pid].row(rows[i]) += d.row(Index(i));
      };
    }
    return out;
  }

  Var matmul(Var a, Var b) {
    Matrix v = value(a) * value(b);
    return unary_or_binary(std::move(v), a, b, [a, b](Tape& t, const Matrix& d) {
      if (t.needs(a)) t.acc(a).noalias() += d * t.value(b).transpose();
      if (t.needs(b)) t.acc(b).noalias() += t.value(a).transpose() * d;
    });
  }

  /// a * b^T
  Var matmul_nt(Var a, Var b) {
    Matrix v = value(a) * value(b).transpose();
    return unary_or_binary(std::move(v), a, b, [a, b](Tape& t, const Matrix& d) {
      if (t.needs(a)) t.acc(a).noalias() += d * t.value(b);
      if (t.needs(b)) t.acc(b).noalias() += d.transpose() * t.value(a);
    });
  }

  Var add(Var a, Var b) {
    Matrix v = value(a) + value(b);
    return unary_or_binary(std::move(v), a, b, [a, b](Tape& t, const Matrix& d) {
      if (t.needs(a)) t.acc(a) += d;
      if (t.needs(b)) t.acc(b) += d;
    });
  }

  /// Adds a 1 x n row to every row of a.
  Var add_bias(Var a, Var bias) {
    Matrix v = value(a).rowwise() + value(bias).row(0);
    return unary_or_binary(std::move(v), a, bias, [a, bias](Tape& t, const Matrix& d) {
      if (t.needs(a)) t.acc(a) += d;
      if (t.needs(bias)) t.acc(bias) += d.colwise().sum();
    });
  }

  Var scale(Var a, double s) {
    Matrix v = value(a) * s;
    return unary_or_binary(std::move(v), a, a, [a, s](Tape& t, const Matrix& d) {
      if (t.needs(a)) t.acc(a) += d * s;
    });
  }

  /// tanh-approximated GELU.
  Var gelu(Var a) {
    const Matrix& x = value(a);
    Matrix v(x.rows(), x.cols());
    for (Index i = 0; i < x.size(); ++i) v.data()[i] = gelu_value(x.data()[i]);
    return unary_or_binary(std::move(v), a, a, [a](Tape& t, const Matrix& d) {
      if (!t.needs(a)) return;
      const Matrix& x = t.value(a);
      Matrix& g = t.acc(a);
      for (Index i = 0; i < x.size(); ++i) g.data()[i] += d.data()[i] * gelu_derivative(x.data()[i]);
    });
  }

  Var tanh(Var a) {
    Matrix v = value(a).array().tanh().matrix();
    Var out = unary_or_binary(std::move(v), a, a, [](Tape&, const Matrix&) {});
    if (record_) {
      nodes_[out.id].back = [a, out](Tape& t, Gradients&) {
        if (!t.needs(a)) return;
        const Matrix& y = t.value(out);
        t.acc(a).array() += t.nodes_[out.id].grad.array() * (1.0 - y.array().square());
      };
    }
    return out;
  }

  /// Row-wise layer normalization with learned gain and bias (1 x n each).
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5) {
    const Matrix& xv = value(x);
    const Index n = xv.cols();
    Matrix xhat(xv.rows(), n);
    Eigen::VectorXd inv_sigma(xv.rows());
    for (Index r = 0; r < xv.rows(); ++r) {
      double mu = xv.row(r).mean();
      double var = (xv.row(r).array() - mu).square().mean();
      inv_sigma(r) = 1.0 / std::sqrt(var + eps);
      xhat.row(r) = (xv.row(r).array() - mu) * inv_sigma(r);
    }
    Matrix v = (xhat.array().rowwise() * value(gain).row(0).array()).matrix();
    v.rowwise() += value(bias).row(0);
    Var out = push_node(std::move(v), needs(x) || needs(gain) || needs(bias));
    if (record_ && nodes_[out.id].needs_grad) {
      nodes_[out.id].back = [x, gain, bias, out, xhat = std::move(xhat),
                             inv_sigma = std::move(inv_sigma)](Tape& t, Gradients&) {
        const Matrix& d = t.nodes_[out.id].grad;
        if (t.needs(gain)) t.acc(gain) += (d.array() * xhat.array()).colwise().sum().matrix();
        if (t.needs(bias)) t.acc(bias) += d.colwise().sum();
        if (!t.needs(x)) return;
        Matrix dxhat = (d.array().rowwise() * t.value(gain).row(0).array()).matrix();
        Matrix& gx = t.acc(x);
        const double n = double(d.cols());
        for (Index r = 0; r < d.rows(); ++r) {
          double m1 = dxhat.row(r).sum() / n;
          double m2 = dxhat.row(r).dot(xhat.row(r)) / n;
          gx.row(r).array() += inv_sigma(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
        }
      };
    }
    return out;
  }

  /// Row-wise softmax. With `causal`, entry (i, j) for j > i is masked out.
  Var softmax(Var a, bool causal = false) {
    Matrix v = softmax_rows(value(a), causal);
    Var out = push_node(std::move(v), needs(a));
    if (record_ && nodes_[out.id].needs_grad) {
      nodes_[out.id].back = [a, out](Tape& t, Gradients&) {
        const Matrix& y = t.value(out);
        const Matrix& d = t.nodes_[out.id].grad;
        Eigen::VectorXd dots = (d.array() * y.array()).rowwise().sum();
        t.acc(a).array() += y.array() * (d.colwise() - dots).array();
      };
    }
    return out;
  }

  /// 1 x n mean over rows.
  Var mean_rows(Var a) {
    Matrix v = value(a).colwise().mean();
    return unary_or_binary(std::move(v), a, a, [a](Tape& t, const Matrix& d) {
      if (!t.needs(a)) return;
      Matrix& g = t.acc(a);
      g.rowwise() += d.row(0) / double(g.rows());
    });
  }

  Var concat_cols(Var a, Var b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (av.rows() != bv.rows()) throw ContractError("concat_cols row mismatch");
    Matrix v(av.rows(), av.cols() + bv.cols());
    v << av, bv;
    const Index ac = av.cols(), bc = bv.cols();
    return unary_or_binary(std::move(v), a, b, [a, b, ac, bc](Tape& t, const Matrix& d) {
      if (t.needs(a)) t.acc(a) += d.leftCols(ac);
      if (t.needs(b)) t.acc(b) += d.rightCols(bc);
    });
  }

  /// Sum over rows i of weight_i * -log softmax(logits_i)[target_i]; 1 x 1.
  Var cross_entropy(Var logits, std::vector<int> targets, std::vector<double> weights = {}) {
    const Matrix& z = value(logits);
    if (Index(targets.size()) != z.rows()) throw ContractError("cross_entropy target count mismatch");
    if (weights.empty()) weights.assign(targets.size(), 1.0);
    Matrix probs = softmax_rows(z, false);
    double loss = 0.0;
    for (Index r = 0; r < z.rows(); ++r) {
      int tgt = targets[std::size_t(r)];
      if (tgt < 0 || tgt >= z.cols()) throw ContractError("cross_entropy target out of range");
      loss -= weights[std::size_t(r)] * log_softmax_at(z.row(r), tgt);
    }
    Matrix v(1, 1);
    v(0, 0) = loss;
    Var out = push_node(std::move(v), needs(logits));
    if (record_ && nodes_[out.id].needs_grad) {
      nodes_[out.id].back = [logits, out, probs = std::move(probs), targets = std::move(targets),
                             weights = std::move(weights)](Tape& t, Gradients&) {
        double d = t.nodes_[out.id].grad(0, 0);
        Matrix& g = t.acc(logits);
        for (Index r = 0; r < probs.rows(); ++r) {
          double w = d * weights[std::size_t(r)];
          g.row(r) += w * probs.row(r);
          g(r, targets[std::size_t(r)]) -= w;
        }
      };
    }
    return out;
  }

  /// Binary cross-entropy of sigmoid(logit) against `label`; 1 x 1.
  Var bce_with_logits(Var logit, double label) {
    double z = scalar(logit);
    Matrix v(1, 1);
    v(0, 0) = std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
    Var out = push_node(std::move(v), needs(logit));
    if (record_ && nodes_[out.id].needs_grad) {
      nodes_[out.id].back = [logit, out, z, label](Tape& t, Gradients&) {
        t.acc(logit)(0, 0) += t.nodes_[out.id].grad(0, 0) * (sigmoid(z) - label);
      };
    }
    return out;
  }

  /// Sum of 1 x 1 scalars.
  Var sum(const std::vector<Var>& xs) {
    Matrix v = Matrix::Zero(1, 1);
    bool ng = false;
    for (Var x : xs) {
      v(0, 0) += scalar(x);
      ng = ng || needs(x);
    }
    Var out = push_node(std::move(v), ng);
    if (record_ && ng) {
      nodes_[out.id].back = [xs, out](Tape& t, Gradients&) {
        double d = t.nodes_[out.id].grad(0, 0);
        for (Var x : xs)
          if (t.needs(x)) t.acc(x)(0, 0) += d;
      };
    }
    return out;
  }

  /// Seeds d(loss) = 1 and propagates to parameters.
  void backward(Var loss, Gradients& grads) {
    if (!record_) throw ContractError("backward on a non-recording tape");
    if (value(loss).size() != 1) throw ContractError("backward needs a scalar loss");
    acc(loss)(0, 0) += 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      if (n.back) n.back(*this, grads);
      if (n.param >= 0) grads[std::size_t(n.param)] += n.grad;
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

  static double sigmoid(double z) {
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }

  static double gelu_value(double x) {
    constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
  }
  static double gelu_derivative(double x) {
    constexpr double c = 0.7978845608028654;
    double th = std::tanh(c * (x + 0.044715 * x * x * x));
    return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * c * (1.0 + 3.0 * 0.044715 * x * x);
  }

  static Matrix softmax_rows(const Matrix& z, bool causal) {
    Matrix y(z.rows(), z.cols());
    for (Index r = 0; r < z.rows(); ++r) {
      Index limit = causal ? std::min<Index>(r + 1, z.cols()) : z.cols();
      double mx = z.row(r).head(limit).maxCoeff();
      double s = 0.0;
      for (Index c = 0; c < limit; ++c) s += (y(r, c) = std::exp(z(r, c) - mx));
      for (Index c = 0; c < limit; ++c) y(r, c) /= s;
      for (Index c = limit; c < z.cols(); ++c) y(r, c) = 0.0;
    }
    return y;
  }

  template <typename Row>
  static double log_softmax_at(const Row& z, int target) {
    double mx = z.maxCoeff();
    double s = (z.array() - mx).exp().sum();
    return z(target) - mx - std::log(s);
  }

 private:
  struct Node {
    Matrix val;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool needs_grad = false;
    long param = -1;
    std::function<void(Tape&, Gradients&)> back;
  };

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }
  Var push_node(Matrix v, bool needs_grad) {
    Node n;
    n.val = std::move(v);
    n.needs_grad = record_ && needs_grad;
    return push(std::move(n));
  }

  template <typename Back>
  Var unary_or_binary(Matrix v, Var a, Var b, Back back) {
    bool ng = needs(a) || needs(b);
    Var out = push_node(std::move(v), ng);
    if (record_ && ng) {
      nodes_[out.id].back = [out, back = std::move(back)](Tape& t, Gradients&) {
        back(t, t.nodes_[out.id].grad);
      };
    }
    return out;
  }

  bool needs(Var v) const { return nodes_[v.id].needs_grad; }

  Matrix& acc(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.size() == 0) {
      const Matrix& val = n.ref ? *n.ref : n.val;
      n.grad = Matrix::Zero(val.rows(), val.cols());
    }
    return n.grad;
  }

  const ParameterSet* params_;
  bool record_;
  std::vector<Node> nodes_;
};

/// Scalar binary cross-entropy on a probability, clamped away from 0 and 1.
inline double binary_cross_entropy(double prediction, double label) {
  constexpr double kEps = 1e-15;
  double p = std::clamp(prediction, kEps, 1.0 - kEps);
  if (prediction >= 1.0 && label == 1.0) return 0.0;
  if (prediction <= 0.0 && label == 0.0) return 0.0;
  return -label * std::log(p) - (1.0 - label) * std::log(1.0 - p);
}

// ---------------------------------------------------------------------------
// Optimizers. Frozen rows are never written.
// ---------------------------------------------------------------------------

enum class OptimizerKind { kSgd, kAdamW };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdamW;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // 0 disables global-norm clipping
};

class Optimizer {
 public:
  Optimizer(const ParameterSet& params, OptimizerConfig cfg) : cfg_(cfg), m_(params), v_(params) {}

  const OptimizerConfig& config() const { return cfg_; }
  std::size_t steps() const { return step_; }

  void step(ParameterSet& params, Gradients grads) {
    if (!grads.all_finite()) throw TrainingError("non-finite gradient");
    if (cfg_.clip_norm > 0.0) {
      double n = std::sqrt(grads.squared_norm());
      if (n > cfg_.clip_norm) grads *= cfg_.clip_norm / n;
    }
    ++step_;
    const double lr = cfg_.learning_rate;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Matrix& w = params.value(i);
      const Matrix& g = grads[i];
      const auto& frozen = params.frozen_rows(i);
      for (Index r = 0; r < w.rows(); ++r) {
        if (!frozen.empty() && params.row_frozen(i, r)) continue;
        if (cfg_.kind == OptimizerKind::kSgd) {
          w.row(r) *= (1.0 - lr * cfg_.weight_decay);
          w.row(r) -= lr * g.row(r);
        } else {
          m_[i].row(r) = cfg_.beta1 * m_[i].row(r) + (1.0 - cfg_.beta1) * g.row(r);
          v_[i].row(r) = cfg_.beta2 * v_[i].row(r) + (1.0 - cfg_.beta2) * g.row(r).cwiseAbs2();
          w.row(r) *= (1.0 - lr * cfg_.weight_decay);
          w.row(r).array() -= lr * (m_[i].row(r).array() / bc1) /
                              ((v_[i].row(r).array() / bc2).sqrt() + cfg_.eps);
        }
      }
    }
  }

 private:
  OptimizerConfig cfg_;
  Gradients m_, v_;
  std::size_t step_ = 0;
};

/// Gaussian init scaled by `stddev`, seeded.
inline Matrix random_matrix(Index rows, Index cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * stddev;
  return m;
}

}  // namespace stickergen::ad
