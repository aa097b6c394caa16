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

#include "prefix/refiner/refiner.hpp"

#include <algorithm>
#include <cmath>

#include "prefix/autograd/ops.hpp"
#include "prefix/common/error.hpp"

namespace prefix::refiner {

namespace {

Tensor embedding_parameter(Rng& rng, int rows, int width) {
  return nn::parameter(nn::uniform_matrix(rng, rows, width, 1.0 / std::sqrt(static_cast<double>(width))));
}

FeatureSequence pad_features(Tensor real, std::size_t total_rows, bool truncated) {
  FeatureSequence out;
  const auto real_rows = static_cast<std::size_t>(real.rows());
  out.mask.assign(total_rows, false);
  std::fill(out.mask.begin(), out.mask.begin() + static_cast<std::ptrdiff_t>(real_rows), true);
  out.truncated = truncated;
  if (total_rows > real_rows) {
    const Tensor zeros(Matrix::Zero(static_cast<ag::Index>(total_rows - real_rows), real.cols()));
    out.features = ag::concat_rows({real, zeros});
  } else {
    out.features = std::move(real);
  }
  return out;
}

}  // namespace

void ModelDims::validate() const {
  if (n <= 0 || m <= 0) throw ConfigError("model widths must be positive");
  if (encoder.heads <= 0 || n % encoder.heads != 0) {
    throw ConfigError("encoder width n must be divisible by its head count");
  }
  if (decoder.heads <= 0 || m % decoder.heads != 0) {
    throw ConfigError("decoder width m must be divisible by its head count");
  }
  if (encoder.layers < 0 || decoder.layers < 0 || encoder.d_ff <= 0 || decoder.d_ff <= 0) {
    throw ConfigError("invalid stack dimensions");
  }
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
}

nlohmann::json to_json(const ModelDims& d) {
  auto stack = [](const StackDims& s) {
    return nlohmann::json{{"layers", s.layers}, {"heads", s.heads}, {"d_ff", s.d_ff}};
  };
  return {{"n", d.n},
          {"m", d.m},
          {"encoder", stack(d.encoder)},
          {"decoder", stack(d.decoder)},
          {"max_len", d.max_len},
          {"pooling", d.pooling == Pooling::kMaskedMean ? "masked_mean" : "last_token"}};
}

ModelDims model_dims_from_json(const nlohmann::json& j) {
  ModelDims d;
  auto stack = [](const nlohmann::json& s, StackDims def) {
    def.layers = s.value("layers", def.layers);
    def.heads = s.value("heads", def.heads);
    def.d_ff = s.value("d_ff", def.d_ff);
    return def;
  };
  d.n = j.value("n", d.n);
  d.m = j.value("m", d.m);
  if (j.contains("encoder")) d.encoder = stack(j["encoder"], d.encoder);
  if (j.contains("decoder")) d.decoder = stack(j["decoder"], d.decoder);
  d.max_len = j.value("max_len", d.max_len);
  const std::string pooling = j.value("pooling", std::string("masked_mean"));
  if (pooling == "masked_mean") {
    d.pooling = Pooling::kMaskedMean;
  } else if (pooling == "last_token") {
    d.pooling = Pooling::kLastToken;
  } else {
    throw ConfigError("unknown pooling '" + pooling + "'");
  }
  return d;
}

std::size_t FeatureSequence::real_length() const {
  std::size_t n = 0;
  while (n < mask.size() && mask[n]) ++n;
  return n;
}

Tensor FeatureSequence::real() const {
  const auto n = static_cast<ag::Index>(real_length());
  if (n == features.rows()) return features;
  return ag::slice_rows(features, 0, n);
}

TextEncoder::TextEncoder(int vocab_size, const ModelDims& dims, Rng& rng)
    : dims_(dims),
      embedding_(embedding_parameter(rng, vocab_size, dims.n)),
      positions_(embedding_parameter(rng, dims.max_len, dims.n)),
      final_norm_(dims.n) {
  dims.validate();
  for (int i = 0; i < dims.encoder.layers; ++i) {
    layers_.emplace_back(dims.n, dims.encoder.heads, dims.encoder.d_ff, rng);
  }
}

EncodedText TextEncoder::encode(const TokenSequence& seq) const {
  seq.validate();
  std::vector<TokenId> ids = seq.real_ids();
  if (ids.empty()) throw ShapeError("cannot encode a sequence without real tokens");
  std::size_t total = seq.size();
  bool truncated = false;
  if (ids.size() > static_cast<std::size_t>(dims_.max_len)) {
    ids.resize(static_cast<std::size_t>(dims_.max_len));
    total = ids.size();
    truncated = true;
  }
  const auto len = static_cast<ag::Index>(ids.size());
  Tensor h = ag::add(embedding_.lookup(ids), ag::slice_rows(positions_, 0, len));
  for (const auto& layer : layers_) h = layer.forward(h);
  h = final_norm_.forward(h);

  EncodedText out;
  out.pooled = dims_.pooling == Pooling::kMaskedMean ? ag::mean_rows(h) : ag::slice_rows(h, len - 1, 1);
  out.sequence = pad_features(h, std::max(total, ids.size()), truncated);
  return out;
}

void TextEncoder::collect(const std::string& prefix, nn::ParamList& out) const {
  out.push_back({prefix + ".embedding", embedding_.table()});
  out.push_back({prefix + ".positions", positions_});
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(prefix + ".layer" + std::to_string(i), out);
  }
  final_norm_.collect(prefix + ".final_norm", out);
}

DomainAdapter::DomainAdapter(int in_width, int out_width, Rng& rng)
    : first_(in_width, std::max(in_width, out_width), rng),
      second_(std::max(in_width, out_width), out_width, rng) {}

FeatureSequence DomainAdapter::adapt(const FeatureSequence& features) const {
  if (features.width() != in_width()) {
    throw ShapeError("adapter expects width " + std::to_string(in_width()) + ", got " +
                     std::to_string(features.width()));
  }
  const Tensor real = features.real();
  const Tensor mapped = second_.forward(ag::gelu(first_.forward(real)));
  return pad_features(mapped, features.mask.size(), features.truncated);
}

void DomainAdapter::collect(const std::string& prefix, nn::ParamList& out) const {
  first_.collect(prefix + ".first", out);
  second_.collect(prefix + ".second", out);
}

TextDecoder::TextDecoder(int vocab_size, const ModelDims& dims, Rng& rng)
    : dims_(dims),
      embedding_(embedding_parameter(rng, vocab_size, dims.m)),
      positions_(embedding_parameter(rng, dims.max_len, dims.m)),
      final_norm_(dims.m),
      output_(dims.m, vocab_size, rng) {
  dims.validate();
  for (int i = 0; i < dims.decoder.layers; ++i) {
    layers_.emplace_back(dims.m, dims.m, dims.decoder.heads, dims.decoder.d_ff, rng);
  }
}

Tensor TextDecoder::forward(const Tensor& memory_rows, std::span<const TokenId> inputs) const {
  if (inputs.empty()) throw LossError("decoder needs at least one input token");
  if (inputs.size() > static_cast<std::size_t>(dims_.max_len)) {
    throw GenerationLengthError("decoder input of " + std::to_string(inputs.size()) +
                                " tokens exceeds max_len " + std::to_string(dims_.max_len));
  }
  if (memory_rows.cols() != dims_.m) {
    throw ShapeError("decoder memory width " + std::to_string(memory_rows.cols()) + " != m=" +
                     std::to_string(dims_.m));
  }
  if (memory_rows.rows() == 0) throw ShapeError("decoder memory is empty");
  const auto len = static_cast<ag::Index>(inputs.size());
  Tensor h = ag::add(embedding_.lookup(inputs), ag::slice_rows(positions_, 0, len));
  for (const auto& layer : layers_) h = layer.forward(h, memory_rows);
  return output_.forward(final_norm_.forward(h));
}

TeacherForcedOutput TextDecoder::decode_teacher_forced(const FeatureSequence& memory,
                                                       const TokenSequence& target) const {
  target.validate();
  const std::vector<TokenId> ids = target.real_ids();
  if (ids.size() < 2) throw LossError("teacher forcing needs a target of at least <bos> <eos>");
  if (ids.front() != text::kBos || ids.back() != text::kEos) {
    throw LossError("teacher-forced target must begin with <bos> and end with <eos>");
  }
  const std::span<const TokenId> inputs(ids.data(), ids.size() - 1);
  const std::span<const TokenId> gold(ids.data() + 1, ids.size() - 1);
  TeacherForcedOutput out;
  out.logits = forward(memory.real(), inputs);
  out.loss = ag::cross_entropy(out.logits, gold);
  return out;
}

ag::RowVector TextDecoder::decoder_step(const FeatureSequence& memory,
                                        std::span<const TokenId> prefix) const {
  if (prefix.empty() || prefix.front() != text::kBos) {
    throw ShapeError("decoder prefix must start with <bos>");
  }
  ag::NoGradGuard no_grad;
  const Tensor logits = forward(memory.real(), prefix);
  return logits.value().row(logits.rows() - 1);
}

void TextDecoder::collect(const std::string& prefix, nn::ParamList& out) const {
  out.push_back({prefix + ".embedding", embedding_.table()});
  out.push_back({prefix + ".positions", positions_});
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(prefix + ".layer" + std::to_string(i), out);
  }
  final_norm_.collect(prefix + ".final_norm", out);
  output_.collect(prefix + ".output", out);
}

}  // namespace prefix::refiner
