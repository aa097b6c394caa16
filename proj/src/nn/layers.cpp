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

#include "prefix/nn/layers.hpp"

#include <cmath>
#include <limits>

#include "prefix/common/error.hpp"

namespace prefix::nn {

Matrix uniform_matrix(Rng& rng, ag::Index rows, ag::Index cols, double bound) {
  Matrix m(rows, cols);
  for (ag::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

Tensor parameter(Matrix value) { return Tensor(std::move(value), /*requires_grad=*/true); }

Linear::Linear(int in, int out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = parameter(uniform_matrix(rng, in, out, bound));
  bias_ = parameter(uniform_matrix(rng, 1, out, bound));
}

Tensor Linear::forward(const Tensor& x) const { return ag::add_row(ag::matmul(x, weight_), bias_); }

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight_});
  out.push_back({prefix + ".bias", bias_});
}

LayerNorm::LayerNorm(int width)
    : gamma_(parameter(Matrix::Ones(1, width))), beta_(parameter(Matrix::Zero(1, width))) {}

Tensor LayerNorm::forward(const Tensor& x) const { return ag::layer_norm(x, gamma_, beta_); }

void LayerNorm::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gamma", gamma_});
  out.push_back({prefix + ".beta", beta_});
}

MultiHeadAttention::MultiHeadAttention(int model_width, int kv_width, int heads, Rng& rng)
    : heads_(heads),
      q_(model_width, model_width, rng),
      k_(kv_width, model_width, rng),
      v_(kv_width, model_width, rng),
      o_(model_width, model_width, rng) {
  if (heads <= 0 || model_width % heads != 0) {
    throw ConfigError("attention width " + std::to_string(model_width) +
                      " is not divisible by " + std::to_string(heads) + " heads");
  }
}

Tensor MultiHeadAttention::forward(const Tensor& queries, const Tensor& keys_values,
                                   bool causal) const {
  const Tensor q = q_.forward(queries);
  const Tensor k = k_.forward(keys_values);
  const Tensor v = v_.forward(keys_values);
  const ag::Index width = q.cols();
  const ag::Index head_width = width / heads_;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_width));

  Matrix mask;
  if (causal) {
    mask = Matrix::Zero(q.rows(), k.rows());
    for (ag::Index i = 0; i < q.rows(); ++i) {
      for (ag::Index j = i + 1; j < k.rows(); ++j) mask(i, j) = -std::numeric_limits<double>::infinity();
    }
  }

  std::vector<Tensor> heads;
  heads.reserve(static_cast<std::size_t>(heads_));
  for (int h = 0; h < heads_; ++h) {
    const Tensor qh = ag::slice_cols(q, h * head_width, head_width);
    const Tensor kh = ag::slice_cols(k, h * head_width, head_width);
    const Tensor vh = ag::slice_cols(v, h * head_width, head_width);
    const Tensor scores = ag::scale(ag::matmul_nt(qh, kh), inv_sqrt);
    const Tensor attn = causal ? ag::softmax_rows(scores, mask) : ag::softmax_rows(scores);
    heads.push_back(ag::matmul(attn, vh));
  }
  return o_.forward(heads_ == 1 ? heads.front() : ag::concat_cols(heads));
}

void MultiHeadAttention::collect(const std::string& prefix, ParamList& out) const {
  q_.collect(prefix + ".q", out);
  k_.collect(prefix + ".k", out);
  v_.collect(prefix + ".v", out);
  o_.collect(prefix + ".o", out);
}

FeedForward::FeedForward(int width, int hidden, Activation act, Rng& rng)
    : act_(act), in_(width, hidden, rng), out_(hidden, width, rng) {}

Tensor FeedForward::forward(const Tensor& x) const {
  const Tensor h = in_.forward(x);
  return out_.forward(act_ == Activation::kGelu ? ag::gelu(h) : ag::relu(h));
}

void FeedForward::collect(const std::string& prefix, ParamList& out) const {
  in_.collect(prefix + ".in", out);
  out_.collect(prefix + ".out", out);
}

EncoderLayer::EncoderLayer(int width, int heads, int hidden, Rng& rng)
    : ln_attn_(width),
      ln_ffn_(width),
      attn_(width, width, heads, rng),
      ffn_(width, hidden, Activation::kGelu, rng) {}

Tensor EncoderLayer::forward(const Tensor& x) const {
  const Tensor normed = ln_attn_.forward(x);
  const Tensor h = ag::add(x, attn_.forward(normed, normed, /*causal=*/false));
  return ag::add(h, ffn_.forward(ln_ffn_.forward(h)));
}

void EncoderLayer::collect(const std::string& prefix, ParamList& out) const {
  ln_attn_.collect(prefix + ".ln_attn", out);
  attn_.collect(prefix + ".attn", out);
  ln_ffn_.collect(prefix + ".ln_ffn", out);
  ffn_.collect(prefix + ".ffn", out);
}

DecoderLayer::DecoderLayer(int width, int memory_width, int heads, int hidden, Rng& rng)
    : ln_self_(width),
      ln_cross_(width),
      ln_ffn_(width),
      self_attn_(width, width, heads, rng),
      cross_attn_(width, memory_width, heads, rng),
      ffn_(width, hidden, Activation::kGelu, rng) {}

Tensor DecoderLayer::forward(const Tensor& x, const Tensor& memory) const {
  const Tensor normed = ln_self_.forward(x);
  Tensor h = ag::add(x, self_attn_.forward(normed, normed, /*causal=*/true));
  h = ag::add(h, cross_attn_.forward(ln_cross_.forward(h), memory, /*causal=*/false));
  return ag::add(h, ffn_.forward(ln_ffn_.forward(h)));
}

void DecoderLayer::collect(const std::string& prefix, ParamList& out) const {
  ln_self_.collect(prefix + ".ln_self", out);
  self_attn_.collect(prefix + ".self_attn", out);
  ln_cross_.collect(prefix + ".ln_cross", out);
  cross_attn_.collect(prefix + ".cross_attn", out);
  ln_ffn_.collect(prefix + ".ln_ffn", out);
  ffn_.collect(prefix + ".ffn", out);
}

}  // namespace prefix::nn
