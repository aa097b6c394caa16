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

// Adaptive feature extraction: an image patch encoder, a dynamic weighting
// network that pools patch features, and the text/image contrastive loss.

#ifndef PREFIX_AFEM_AFEM_HPP_
#define PREFIX_AFEM_AFEM_HPP_

#include <string>
#include <vector>

#include "prefix/autograd/tensor.hpp"
#include "prefix/common/rng.hpp"
#include "prefix/corpus/image.hpp"
#include "prefix/nn/layers.hpp"
#include "prefix/refiner/refiner.hpp"

namespace prefix::afem {

using ag::Matrix;
using ag::Tensor;

// Flattened patches, one row per patch in row-major order, columns ordered
// (y, x, channel).
Matrix patchify(const corpus::Image& image, int patch);

struct ImageEncoderDims {
  int image_size = 32;
  int patch = 8;
  int width = 64;
  refiner::StackDims stack{1, 4, 128};

  int patches() const { return (image_size / patch) * (image_size / patch); }
};

class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(const ImageEncoderDims& dims, Rng& rng);

  // P x n patch features.
  Tensor encode(const corpus::Image& image) const;
  Tensor encode_patches(const Matrix& patches) const;

  const ImageEncoderDims& dims() const { return dims_; }
  void collect(const std::string& prefix, nn::ParamList& out) const;

 private:
  ImageEncoderDims dims_;
  nn::Linear embed_;
  Tensor positions_;
  std::vector<nn::EncoderLayer> layers_;
  nn::LayerNorm final_norm_;
};

// Self-attention over the patches without positional information, a ReLU
// feed-forward layer and a scalar head; softmax over patches gives the
// weights. Permuting the patches permutes the weights.
class DynamicWeightNet {
 public:
  DynamicWeightNet() = default;
  DynamicWeightNet(int width, int hidden, int heads, Rng& rng);

  // 1 x P, sums to one.
  Tensor weights(const Tensor& patches) const;

  void collect(const std::string& prefix, nn::ParamList& out) const;

 private:
  nn::LayerNorm norm_;
  nn::MultiHeadAttention attn_;
  nn::Linear hidden_, head_;
};

// weights (1 x P) times patches (P x n).
Tensor adaptive_pool(const Tensor& patches, const Tensor& weights);

enum class ClipReading {
  // mean over the batch of -log(exp(c_ii/t) / sum_{j != i} exp(c_ij/t))
  kPerSample,
  // -(1/B) log sum_i exp(c_ii/t) / sum_{j != i} exp(c_ij/t)
  kSummedRatio,
};

struct ClipOptions {
  double temperature = 1.0;
  ClipReading reading = ClipReading::kPerSample;
  bool operator==(const ClipOptions&) const = default;
};

// Pairwise cosine similarities of text rows against image rows, B x B.
Tensor cosine_matrix(const Tensor& text, const Tensor& image);

// Row i of text pairs with row i of image. Needs B >= 2; zero-norm rows
// throw LossError.
Tensor loss_clip(const Tensor& text, const Tensor& image, const ClipOptions& options = {});

}  // namespace prefix::afem

#endif  // PREFIX_AFEM_AFEM_HPP_
