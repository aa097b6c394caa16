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

// Building blocks shared by the text, image and diffusion networks.

#ifndef PREFIX_NN_LAYERS_HPP_
#define PREFIX_NN_LAYERS_HPP_

#include <string>
#include <utility>
#include <vector>

#include "prefix/autograd/ops.hpp"
#include "prefix/autograd/tensor.hpp"
#include "prefix/common/rng.hpp"

namespace prefix::nn {

using ag::Matrix;
using ag::Tensor;

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

// Seeded U(-bound, bound) matrix; the fill order is row-major.
Matrix uniform_matrix(Rng& rng, ag::Index rows, ag::Index cols, double bound);
// A trainable leaf.
Tensor parameter(Matrix value);

enum class Activation { kGelu, kRelu };

class Linear {
 public:
  Linear() = default;
  // Weights and bias ~ U(-1/sqrt(in), 1/sqrt(in)).
  Linear(int in, int out, Rng& rng);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;

  int in_features() const { return static_cast<int>(weight_.rows()); }
  int out_features() const { return static_cast<int>(weight_.cols()); }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  Tensor weight_;  // in x out
  Tensor bias_;    // 1 x out
};

class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(int width);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  Tensor gamma_;
  Tensor beta_;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  // Queries have width model_width; keys/values are read from rows of width
  // kv_width.
  MultiHeadAttention(int model_width, int kv_width, int heads, Rng& rng);

  // Attention of every query row over every key row, with an optional causal
  // constraint (query i sees keys <= i).
  Tensor forward(const Tensor& queries, const Tensor& keys_values, bool causal) const;
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  int heads_ = 1;
  Linear q_, k_, v_, o_;
};

class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(int width, int hidden, Activation act, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  Activation act_ = Activation::kGelu;
  Linear in_, out_;
};

// Pre-norm encoder block: x + attn(ln(x)), then x + ffn(ln(x)).
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(int width, int heads, int hidden, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  LayerNorm ln_attn_, ln_ffn_;
  MultiHeadAttention attn_;
  FeedForward ffn_;
};

// Pre-norm decoder block: causal self-attention, cross-attention over a
// memory sequence, feed-forward.
class DecoderLayer {
 public:
  DecoderLayer() = default;
  DecoderLayer(int width, int memory_width, int heads, int hidden, Rng& rng);
  Tensor forward(const Tensor& x, const Tensor& memory) const;
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  LayerNorm ln_self_, ln_cross_, ln_ffn_;
  MultiHeadAttention self_attn_, cross_attn_;
  FeedForward ffn_;
};

}  // namespace prefix::nn

#endif  // PREFIX_NN_LAYERS_HPP_
