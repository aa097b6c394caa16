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

// Latent diffusion pieces: a linear patch VAE, the forward noising process,
// and a small text-conditioned noise predictor.

#ifndef PREFIX_DIFFUSION_DIFFUSION_HPP_
#define PREFIX_DIFFUSION_DIFFUSION_HPP_

#include <string>
#include <vector>

#include "prefix/autograd/tensor.hpp"
#include "prefix/common/rng.hpp"
#include "prefix/corpus/image.hpp"
#include "prefix/nn/layers.hpp"

namespace prefix::diffusion {

using ag::Matrix;
using ag::Tensor;
using corpus::Image;

inline constexpr int kLatentChannels = 4;
inline constexpr int kPatch = 8;

// Latents are (h*w) x 4 matrices, rows in row-major grid order.
struct LatentShape {
  int h = 0;
  int w = 0;
  int positions() const { return h * w; }
};

LatentShape latent_shape(int image_height, int image_width);

// Per 8x8 patch mean colour, (h*w) x 3.
Matrix patch_means(const Image& image);

// Each patch's mean colour through a 3x4 full-rank projection. Decoding
// applies the right pseudo-inverse and paints each patch flat, so images
// that are constant on every patch round-trip exactly.
class Vae {
 public:
  Vae() = default;
  explicit Vae(Rng& rng);

  Matrix encode(const Image& image) const;
  // Differentiable with respect to the projection.
  Tensor encode_means(const Matrix& means) const;
  Image decode(const Matrix& latent, LatentShape shape) const;

  const Tensor& projection() const { return projection_; }
  void collect(const std::string& prefix, nn::ParamList& out) const;

 private:
  Tensor projection_;  // 3 x 4
};

class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  // Linear betas over steps 1..T.
  NoiseSchedule(int timesteps, double beta_start = 1e-4, double beta_end = 2e-2);

  int timesteps() const { return static_cast<int>(betas_.size()) - 1; }
  double beta(int t) const;
  double alpha(int t) const { return 1.0 - beta(t); }
  // Cumulative product of alphas; alpha_bar(0) = 1.
  double alpha_bar(int t) const;

 private:
  std::vector<double> betas_;       // index 0 unused
  std::vector<double> alpha_bars_;  // index 0 is 1
};

// sqrt(alpha_bar) z0 + sqrt(1 - alpha_bar) eps
Matrix add_noise(const Matrix& z0, const Matrix& eps, double alpha_bar);
Tensor add_noise(const Tensor& z0, const Tensor& eps, double alpha_bar);

struct NoiseDraw {
  int tau = 1;
  Matrix eps;
};
// tau uniform in [1, T], eps standard normal of the latent's shape.
NoiseDraw draw_noise(Rng& rng, const NoiseSchedule& schedule, LatentShape shape);

// Sinusoidal embedding of a timestep, 1 x width.
Matrix time_embedding(int tau, int width);

struct DenoiserDims {
  int channels = 32;
  int heads = 4;
  int text_width = 64;
};

// Conv stem, one stride-2 level with a skip, cross-attention to the
// conditioning rows at both resolutions.
class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(const DenoiserDims& dims, Rng& rng);

  // gamma is the noisy latent; text_rows are the text features (rows x n).
  // Returns the predicted noise.
  Tensor forward(const Tensor& gamma, LatentShape shape, int tau, const Tensor& text_rows) const;

  const DenoiserDims& dims() const { return dims_; }
  void collect(const std::string& prefix, nn::ParamList& out) const;

 private:
  DenoiserDims dims_;
  nn::Linear conv_in_, conv_down_, conv_mid_, conv_out_;
  nn::LayerNorm norm_hi_, norm_lo_;
  nn::MultiHeadAttention attn_hi_, attn_lo_;
};

Tensor loss_mse(const Tensor& eps, const Tensor& eps_hat);

// Ancestral sampling from pure noise, conditioned on text_rows.
Image ddpm_sample(const Denoiser& denoiser, const NoiseSchedule& schedule, const Vae& vae,
                  const Tensor& text_rows, LatentShape shape, Rng& rng);

}  // namespace prefix::diffusion

#endif  // PREFIX_DIFFUSION_DIFFUSION_HPP_
