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

#include "prefix/afem/afem.hpp"

#include <cmath>
#include <limits>

#include "prefix/autograd/ops.hpp"
#include "prefix/common/error.hpp"

namespace prefix::afem {

Matrix patchify(const corpus::Image& image, int patch) {
  if (patch <= 0 || image.height % patch != 0 || image.width % patch != 0) {
    throw ShapeError("image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                     " does not tile into " + std::to_string(patch) + "-pixel patches");
  }
  const int ph = image.height / patch;
  const int pw = image.width / patch;
  Matrix out(ph * pw, patch * patch * 3);
  for (int py = 0; py < ph; ++py) {
    for (int px = 0; px < pw; ++px) {
      int col = 0;
      for (int y = 0; y < patch; ++y) {
        for (int x = 0; x < patch; ++x) {
          for (int c = 0; c < 3; ++c) out(py * pw + px, col++) = image.at(py * patch + y, px * patch + x, c);
        }
      }
    }
  }
  return out;
}

ImageEncoder::ImageEncoder(const ImageEncoderDims& dims, Rng& rng)
    : dims_(dims),
      embed_(dims.patch * dims.patch * 3, dims.width, rng),
      positions_(nn::parameter(
          nn::uniform_matrix(rng, dims.patches(), dims.width, 1.0 / std::sqrt(static_cast<double>(dims.width))))),
      final_norm_(dims.width) {
  if (dims.patch <= 0 || dims.image_size % dims.patch != 0) {
    throw ConfigError("image size must be a multiple of the patch size");
  }
  if (dims.stack.heads <= 0 || dims.width % dims.stack.heads != 0) {
    throw ConfigError("image encoder width must be divisible by its head count");
  }
  for (int i = 0; i < dims.stack.layers; ++i) {
    layers_.emplace_back(dims.width, dims.stack.heads, dims.stack.d_ff, rng);
  }
}

Tensor ImageEncoder::encode(const corpus::Image& image) const {
  if (image.height != dims_.image_size || image.width != dims_.image_size) {
    throw ShapeError("image encoder expects " + std::to_string(dims_.image_size) + "x" +
                     std::to_string(dims_.image_size) + " images, got " + std::to_string(image.height) +
                     "x" + std::to_string(image.width));
  }
  return encode_patches(patchify(image, dims_.patch));
}

Tensor ImageEncoder::encode_patches(const Matrix& patches) const {
  if (patches.rows() != dims_.patches() || patches.cols() != dims_.patch * dims_.patch * 3) {
    throw ShapeError("patch matrix does not match the image encoder");
  }
  Tensor h = ag::add(embed_.forward(Tensor(patches)), positions_);
  for (const auto& layer : layers_) h = layer.forward(h);
  return final_norm_.forward(h);
}

void ImageEncoder::collect(const std::string& prefix, nn::ParamList& out) const {
  embed_.collect(prefix + ".embed", out);
  out.push_back({prefix + ".positions", positions_});
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(prefix + ".layer" + std::to_string(i), out);
  }
  final_norm_.collect(prefix + ".final_norm", out);
}

DynamicWeightNet::DynamicWeightNet(int width, int hidden, int heads, Rng& rng)
    : norm_(width), attn_(width, width, heads, rng), hidden_(width, hidden, rng), head_(hidden, 1, rng) {}

Tensor DynamicWeightNet::weights(const Tensor& patches) const {
  if (patches.rows() == 0) throw ShapeError("no patches to weight");
  const Tensor normed = norm_.forward(patches);
  const Tensor h = ag::add(patches, attn_.forward(normed, normed, false));
  const Tensor scores = head_.forward(ag::relu(hidden_.forward(h)));  // P x 1
  return ag::softmax_rows(ag::transpose(scores));
}

void DynamicWeightNet::collect(const std::string& prefix, nn::ParamList& out) const {
  norm_.collect(prefix + ".norm", out);
  attn_.collect(prefix + ".attn", out);
  hidden_.collect(prefix + ".hidden", out);
  head_.collect(prefix + ".head", out);
}

Tensor adaptive_pool(const Tensor& patches, const Tensor& weights) {
  if (weights.rows() != 1 || weights.cols() != patches.rows()) {
    throw ShapeError("weights (" + std::to_string(weights.rows()) + "x" + std::to_string(weights.cols()) +
                     ") do not match " + std::to_string(patches.rows()) + " patches");
  }
  return ag::matmul(weights, patches);
}

Tensor cosine_matrix(const Tensor& text, const Tensor& image) {
  if (text.rows() != image.rows() || text.cols() != image.cols()) {
    throw ShapeError("text and image batches differ in shape");
  }
  return ag::matmul_nt(ag::l2_normalize_rows(text), ag::l2_normalize_rows(image));
}

Tensor loss_clip(const Tensor& text, const Tensor& image, const ClipOptions& options) {
  if (text.rows() < 2) throw LossError("contrastive loss needs a batch of at least 2");
  if (!(options.temperature > 0.0)) throw LossError("temperature must be positive");
  const Tensor cos = cosine_matrix(text, image);
  const Matrix a = cos.value() / options.temperature;
  const ag::Index b = a.rows();

  // Off-diagonal softmax q and log-sum-exp per row.
  Matrix q = Matrix::Zero(b, b);
  std::vector<double> lse(static_cast<std::size_t>(b));
  for (ag::Index i = 0; i < b; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (ag::Index j = 0; j < b; ++j) {
      if (j != i) mx = std::max(mx, a(i, j));
    }
    double s = 0.0;
    for (ag::Index j = 0; j < b; ++j) {
      if (j != i) s += q(i, j) = std::exp(a(i, j) - mx);
    }
    for (ag::Index j = 0; j < b; ++j) q(i, j) /= s;
    lse[static_cast<std::size_t>(i)] = mx + std::log(s);
  }

  const double inv_b = 1.0 / static_cast<double>(b);
  const double inv_t = 1.0 / options.temperature;
  // Per-row weight of the gradient: 1/B for the per-sample reading, the
  // row's share of the summed ratio otherwise.
  std::vector<double> row_weight(static_cast<std::size_t>(b), inv_b);
  double loss = 0.0;
  if (options.reading == ClipReading::kPerSample) {
    for (ag::Index i = 0; i < b; ++i) loss -= a(i, i) - lse[static_cast<std::size_t>(i)];
    loss *= inv_b;
  } else {
    std::vector<double> log_r(static_cast<std::size_t>(b));
    double mx = -std::numeric_limits<double>::infinity();
    for (ag::Index i = 0; i < b; ++i) {
      log_r[static_cast<std::size_t>(i)] = a(i, i) - lse[static_cast<std::size_t>(i)];
      mx = std::max(mx, log_r[static_cast<std::size_t>(i)]);
    }
    double s = 0.0;
    for (double lr : log_r) s += std::exp(lr - mx);
    const double log_total = mx + std::log(s);
    loss = -inv_b * log_total;
    for (ag::Index i = 0; i < b; ++i) {
      row_weight[static_cast<std::size_t>(i)] = inv_b * std::exp(log_r[static_cast<std::size_t>(i)] - log_total);
    }
  }

  Matrix value(1, 1);
  value(0, 0) = loss;
  return Tensor::from_op(std::move(value), {cos}, [q, row_weight, inv_t](ag::Node& n) {
    const double g = n.grad(0, 0);
    Matrix d = q;
    for (ag::Index i = 0; i < d.rows(); ++i) {
      const double w = row_weight[static_cast<std::size_t>(i)];
      d.row(i) *= w;
      d(i, i) = -w;
    }
    n.inputs[0]->accumulate(d * (g * inv_t));
  });
}

}  // namespace prefix::afem
