// Copyright 2026 The Prefix Authors.
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

#include <cmath>
#include <vector>

#include "prefix/autograd/ops.hpp"
#include "prefix/common/error.hpp"
#include "prefix/nn/layers.hpp"
#include "support/fixtures.hpp"

namespace prefix {
namespace {

using ag::Matrix;
using ag::Tensor;
using testing::op_grad_error;
using testing::random_matrix;

constexpr double kTol = 1e-5;

TEST(Autograd, MatmulFamily) {
  Rng r(1);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::matmul(x[0], x[1]); },
                          {random_matrix(r, 3, 4), random_matrix(r, 4, 2)}),
            kTol);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::matmul_nt(x[0], x[1]); },
                          {random_matrix(r, 3, 4), random_matrix(r, 5, 4)}),
            kTol);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::transpose(x[0]); }, {random_matrix(r, 3, 4)}), kTol);
}

TEST(Autograd, Elementwise) {
  Rng r(2);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::add(x[0], x[1]); },
                          {random_matrix(r, 3, 3), random_matrix(r, 3, 3)}),
            kTol);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::sub(x[0], x[1]); },
                          {random_matrix(r, 3, 3), random_matrix(r, 3, 3)}),
            kTol);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::mul(x[0], x[1]); },
                          {random_matrix(r, 3, 3), random_matrix(r, 3, 3)}),
            kTol);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::add_row(x[0], x[1]); },
                          {random_matrix(r, 3, 4), random_matrix(r, 1, 4)}),
            kTol);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::scale(x[0], -0.7); }, {random_matrix(r, 2, 5)}), kTol);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::gelu(x[0]); }, {random_matrix(r, 3, 5)}), kTol);
}

TEST(Autograd, ReluAwayFromKink) {
  Rng r(3);
  Matrix m = random_matrix(r, 4, 4);
  for (ag::Index i = 0; i < m.size(); ++i) {
    if (std::abs(m.data()[i]) < 0.1) m.data()[i] = 0.5;
  }
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::relu(x[0]); }, {m}), kTol);
}

TEST(Autograd, NormalizationAndSoftmax) {
  Rng r(4);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::layer_norm(x[0], x[1], x[2]); },
                          {random_matrix(r, 3, 6), random_matrix(r, 1, 6), random_matrix(r, 1, 6)}),
            1e-5);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::softmax_rows(x[0]); }, {random_matrix(r, 3, 5)}), kTol);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::l2_normalize_rows(x[0]); }, {random_matrix(r, 3, 4)}),
            kTol);
}

TEST(Autograd, Reshaping) {
  Rng r(5);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::slice_rows(x[0], 1, 2); }, {random_matrix(r, 4, 3)}), kTol);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::slice_cols(x[0], 1, 2); }, {random_matrix(r, 3, 4)}), kTol);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::concat_rows({x[0], x[1]}); },
                          {random_matrix(r, 2, 3), random_matrix(r, 1, 3)}),
            kTol);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::concat_cols({x[0], x[1]}); },
                          {random_matrix(r, 2, 3), random_matrix(r, 2, 1)}),
            kTol);
  const std::vector<int> ids{2, 0, 2, 1};
  EXPECT_LT(op_grad_error([&](const auto& x) { return ag::gather_rows(x[0], ids); }, {random_matrix(r, 3, 4)}), kTol);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::im2col(x[0], 4, 4, 3, 2, 1); }, {random_matrix(r, 16, 2)}),
            kTol);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::upsample_nearest(x[0], 2, 2, 2); }, {random_matrix(r, 4, 3)}),
            kTol);
}

TEST(Autograd, Reductions) {
  Rng r(6);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::mean_rows(x[0]); }, {random_matrix(r, 4, 3)}), kTol);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::mean(x[0]); }, {random_matrix(r, 4, 3)}), kTol);
  EXPECT_LT(op_grad_error([](const auto& x) { return ag::mse(x[0], x[1]); },
                          {random_matrix(r, 4, 3), random_matrix(r, 4, 3)}),
            kTol);
  const std::vector<int> targets{1, 0, 3};
  EXPECT_LT(op_grad_error([&](const auto& x) { return ag::cross_entropy(x[0], targets); }, {random_matrix(r, 3, 5)}),
            kTol);
}

TEST(Autograd, CrossEntropyMatchesLogSumExp) {
  Rng r(7);
  const Matrix logits = random_matrix(r, 3, 6);
  const std::vector<int> targets{5, 0, 2};
  double oracle = 0.0;
  for (int i = 0; i < 3; ++i) {
    double z = 0.0;
    for (int v = 0; v < 6; ++v) z += std::exp(logits(i, v));
    oracle += std::log(z) - logits(i, targets[i]);
  }
  EXPECT_NEAR(ag::cross_entropy(Tensor(logits), targets).item(), oracle / 3.0, 1e-12);
}

TEST(Autograd, NoGradGuardSkipsRecording) {
  Tensor a(Matrix::Ones(2, 2), true);
  {
    ag::NoGradGuard g;
    Tensor b = ag::scale(a, 2.0);
    EXPECT_FALSE(b.requires_grad());
  }
  EXPECT_TRUE(ag::scale(a, 2.0).requires_grad());
}

TEST(Autograd, ShapeErrors) {
  EXPECT_THROW(ag::matmul(Tensor(Matrix::Ones(2, 3)), Tensor(Matrix::Ones(2, 3))), ShapeError);
  EXPECT_THROW(ag::add(Tensor(Matrix::Ones(2, 3)), Tensor(Matrix::Ones(3, 2))), ShapeError);
}

TEST(Layers, AttentionIsCausalWhenAsked) {
  Rng r(8);
  nn::MultiHeadAttention attn(8, 8, 2, r);
  const Matrix x = random_matrix(r, 4, 8);
  Matrix x2 = x;
  x2.row(3).setConstant(5.0);
  const Matrix a = attn.forward(Tensor(x), Tensor(x), true).value();
  const Matrix b = attn.forward(Tensor(x2), Tensor(x2), true).value();
  EXPECT_LT((a.topRows(3) - b.topRows(3)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_GT((a.row(3) - b.row(3)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Layers, EncoderLayerGradient) {
  Rng r(9);
  nn::EncoderLayer layer(8, 2, 16, r);
  EXPECT_LT(op_grad_error([&](const auto& x) { return layer.forward(x[0]); }, {random_matrix(r, 3, 8)}), 1e-5);
}

}  // namespace
}  // namespace prefix
