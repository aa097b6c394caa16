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

// The prompt refiner: a text encoder producing per-token features and a
// pooled summary, a perceptron adapter into the decoder's width, and a
// causal decoder with cross-attention over the adapted features.

#ifndef PREFIX_REFINER_REFINER_HPP_
#define PREFIX_REFINER_REFINER_HPP_

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefix/autograd/tensor.hpp"
#include "prefix/common/rng.hpp"
#include "prefix/nn/layers.hpp"
#include "prefix/textcore/tokenizer.hpp"

namespace prefix::refiner {

using ag::Matrix;
using ag::Tensor;
using text::TokenId;
using text::TokenSequence;

struct StackDims {
  int layers = 2;
  int heads = 4;
  int d_ff = 128;

  bool operator==(const StackDims&) const = default;
};

enum class Pooling { kMaskedMean, kLastToken };

struct ModelDims {
  int n = 64;  // encoder width, shared with image features
  int m = 64;  // decoder width
  StackDims encoder;
  StackDims decoder;
  int max_len = 64;
  Pooling pooling = Pooling::kMaskedMean;

  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

nlohmann::json to_json(const ModelDims& d);
ModelDims model_dims_from_json(const nlohmann::json& j);

// Per-token features; rows past the mask are zero.
struct FeatureSequence {
  Tensor features;
  std::vector<bool> mask;
  bool truncated = false;

  std::size_t real_length() const;
  // The real rows only.
  Tensor real() const;
  int width() const { return static_cast<int>(features.cols()); }
};

struct EncodedText {
  FeatureSequence sequence;
  Tensor pooled;  // 1 x n
};

class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(int vocab_size, const ModelDims& dims, Rng& rng);

  // Padding never reaches real rows or the pooled vector: only the real
  // prefix of the sequence is run. Sequences longer than max_len are cut
  // and flagged.
  EncodedText encode(const TokenSequence& seq) const;

  const text::EmbeddingTable& embedding() const { return embedding_; }
  void collect(const std::string& prefix, nn::ParamList& out) const;

 private:
  ModelDims dims_;
  text::EmbeddingTable embedding_;
  Tensor positions_;  // max_len x n
  std::vector<nn::EncoderLayer> layers_;
  nn::LayerNorm final_norm_;
};

// Two affine layers with a GELU between, applied to every real token.
class DomainAdapter {
 public:
  DomainAdapter() = default;
  DomainAdapter(int in_width, int out_width, Rng& rng);

  FeatureSequence adapt(const FeatureSequence& features) const;
  void collect(const std::string& prefix, nn::ParamList& out) const;

  int in_width() const { return first_.in_features(); }
  int out_width() const { return second_.out_features(); }

 private:
  nn::Linear first_, second_;
};

struct TeacherForcedOutput {
  Tensor logits;  // (target length - 1) x |V|, row i predicts target[i + 1]
  Tensor loss;    // mean negative log-likelihood over predicted positions
};

class TextDecoder {
 public:
  TextDecoder() = default;
  TextDecoder(int vocab_size, const ModelDims& dims, Rng& rng);

  // target must be <bos> ... <eos>; padding after <eos> is ignored.
  TeacherForcedOutput decode_teacher_forced(const FeatureSequence& memory,
                                            const TokenSequence& target) const;

  // Next-token logits after prefix, which starts with <bos>. Matches the
  // teacher-forced logits at the same position.
  ag::RowVector decoder_step(const FeatureSequence& memory, std::span<const TokenId> prefix) const;

  // logits for every input position, inputs.size() x |V|
  Tensor forward(const Tensor& memory_rows, std::span<const TokenId> inputs) const;

  int vocab_size() const { return output_.out_features(); }
  int max_len() const { return dims_.max_len; }
  void collect(const std::string& prefix, nn::ParamList& out) const;

 private:
  ModelDims dims_;
  text::EmbeddingTable embedding_;
  Tensor positions_;
  std::vector<nn::DecoderLayer> layers_;
  nn::LayerNorm final_norm_;
  nn::Linear output_;
};

}  // namespace prefix::refiner

#endif  // PREFIX_REFINER_REFINER_HPP_
