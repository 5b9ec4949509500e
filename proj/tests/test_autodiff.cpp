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

#include "gradcheck.hpp"
#include "stickergen/autodiff.hpp"

namespace stickergen {
namespace {

using ad::Matrix;

struct Toy {
  ad::ParameterSet params;
  std::size_t emb, w, b, g, beta, v;
  Toy() {
    Rng rng(1);
    emb = params.add("emb", ad::random_matrix(6, 4, 0.5, rng));
    w = params.add("w", ad::random_matrix(4, 4, 0.5, rng));
    b = params.add("b", ad::random_matrix(1, 4, 0.1, rng));
    g = params.add("ln.g", Matrix::Ones(1, 4) + ad::random_matrix(1, 4, 0.1, rng));
    beta = params.add("ln.b", ad::random_matrix(1, 4, 0.1, rng));
    v = params.add("v", ad::random_matrix(3, 8, 0.5, rng));
  }
};

// Touches every tape operation once.
double toy_loss(const Toy& m, ad::Gradients* grads) {
  ad::Tape t(m.params, grads != nullptr);
  ad::Var x = t.gather(m.emb, {0, 3, 3, 5});
  ad::Var h = t.add_bias(t.matmul_nt(x, t.param(m.w)), t.param(m.b));
  h = t.layer_norm(h, t.param(m.g), t.param(m.beta));
  ad::Var att = t.softmax(t.scale(t.matmul_nt(h, h), 0.5), true);
  ad::Var mixed = t.add(t.matmul(att, h), t.tanh(h));
  ad::Var act = t.gelu(mixed);
  ad::Var pooled = t.mean_rows(act);
  ad::Var both = t.concat_cols(pooled, t.mean_rows(x));
  ad::Var logits = t.matmul_nt(both, t.param(m.v));
  ad::Var ce = t.cross_entropy(t.matmul_nt(act, t.matmul_nt(t.param(m.w), t.param(m.w))), {0, 1, 2, 3}, {1.0, 0.5, 2.0, 0.0});
  ad::Var l1 = t.cross_entropy(logits, {2});
  ad::Var l2 = t.bce_with_logits(t.matmul_nt(pooled, t.param(m.b)), 1.0);
  ad::Var total = t.sum({ce, l1, l2});
  if (grads) t.backward(total, *grads);
  return t.scalar(total);
}

TEST(Tape, AllOpsMatchFiniteDifferences) {
  Toy m;
  auto r = testing::gradient_check(m.params, [&](ad::Gradients* g) { return toy_loss(m, g); });
  EXPECT_LE(r.max_relative_error, 1e-4) << r.worst_parameter;
  EXPECT_EQ(r.checked, m.params.scalar_count());
}

TEST(Tape, InferenceTapeMatchesRecordingTape) {
  Toy m;
  ad::Gradients g(m.params);
  EXPECT_EQ(toy_loss(m, nullptr), toy_loss(m, &g));
}

TEST(Tape, CausalSoftmaxMasksFuture) {
  ad::ParameterSet p;
  ad::Tape t(p, false);
  Matrix z = Matrix::Zero(3, 3);
  auto s = t.value(t.softmax(t.input(z), true));
  EXPECT_DOUBLE_EQ(s(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(s(1, 1), 0.5);
  EXPECT_NEAR(s.row(2).sum(), 1.0, 1e-15);
}

TEST(Tape, CrossEntropyTargetRange) {
  ad::ParameterSet p;
  ad::Tape t(p, false);
  Matrix z = Matrix::Zero(1, 5);
  EXPECT_NEAR(t.scalar(t.cross_entropy(t.input(z), {4})), std::log(5.0), 1e-12);
  EXPECT_THROW(t.cross_entropy(t.input(z), {5}), ContractError);
  EXPECT_THROW(t.cross_entropy(t.input(z), {-1}), ContractError);
}

TEST(Bce, ClosedForms) {
  EXPECT_EQ(ad::binary_cross_entropy(1.0, 1.0), 0.0);
  EXPECT_NEAR(ad::binary_cross_entropy(0.5, 1.0), std::log(2.0), 1e-12);
  EXPECT_NEAR(ad::binary_cross_entropy(0.5, 0.0), std::log(2.0), 1e-12);
  ad::ParameterSet p;
  ad::Tape t(p, false);
  Matrix z = Matrix::Zero(1, 1);
  EXPECT_NEAR(t.scalar(t.bce_with_logits(t.input(z), 0.0)), std::log(2.0), 1e-12);
}

TEST(Optimizer, SgdStepAndFrozenRows) {
  ad::ParameterSet p;
  auto id = p.add("w", Matrix::Ones(3, 2));
  p.freeze_rows(id, 1, 2);
  ad::Gradients g(p);
  g[id].setConstant(2.0);
  ad::OptimizerConfig cfg;
  cfg.kind = ad::OptimizerKind::kSgd;
  cfg.learning_rate = 0.25;
  ad::Optimizer opt(p, cfg);
  opt.step(p, g);
  EXPECT_DOUBLE_EQ(p.value(id)(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p.value(id)(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(p.value(id)(2, 1), 0.5);
}

TEST(Optimizer, AdamFirstStepMovesByLearningRate) {
  ad::ParameterSet p;
  auto id = p.add("w", Matrix::Zero(1, 3));
  ad::Gradients g(p);
  g[id] << 5.0, -0.01, 0.0;
  ad::OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  ad::Optimizer opt(p, cfg);
  opt.step(p, g);
  EXPECT_NEAR(p.value(id)(0, 0), -0.1, 1e-6);
  EXPECT_NEAR(p.value(id)(0, 1), 0.1, 1e-4);
  EXPECT_EQ(p.value(id)(0, 2), 0.0);
}

TEST(Optimizer, ClipsGlobalNorm) {
  ad::ParameterSet p;
  auto id = p.add("w", Matrix::Zero(1, 2));
  ad::Gradients g(p);
  g[id] << 3.0, 4.0;
  ad::OptimizerConfig cfg;
  cfg.kind = ad::OptimizerKind::kSgd;
  cfg.learning_rate = 1.0;
  cfg.clip_norm = 1.0;
  ad::Optimizer opt(p, cfg);
  opt.step(p, g);
  EXPECT_NEAR(p.value(id)(0, 0), -0.6, 1e-12);
  EXPECT_NEAR(p.value(id)(0, 1), -0.8, 1e-12);
}

TEST(Optimizer, RejectsNonFiniteGradient) {
  ad::ParameterSet p;
  auto id = p.add("w", Matrix::Zero(1, 1));
  ad::Gradients g(p);
  g[id](0, 0) = std::nan("");
  ad::Optimizer opt(p, {});
  EXPECT_THROW(opt.step(p, g), TrainingError);
}

TEST(ParameterSet, DuplicateAndUnknownNames) {
  ad::ParameterSet p;
  p.add("a", Matrix::Zero(1, 1));
  EXPECT_THROW(p.add("a", Matrix::Zero(1, 1)), ContractError);
  EXPECT_THROW(p.id("b"), ContractError);
}

}  // namespace
}  // namespace stickergen
