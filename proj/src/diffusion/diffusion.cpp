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

#include "prefix/diffusion/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "prefix/autograd/ops.hpp"
#include "prefix/common/error.hpp"

namespace prefix::diffusion {

LatentShape latent_shape(int image_height, int image_width) {
  if (image_height <= 0 || image_width <= 0 || image_height % kPatch != 0 || image_width % kPatch != 0) {
    throw ShapeError("image size " + std::to_string(image_height) + "x" + std::to_string(image_width) +
                     " is not a positive multiple of " + std::to_string(kPatch));
  }
  return {image_height / kPatch, image_width / kPatch};
}

Matrix patch_means(const Image& image) {
  const LatentShape s = latent_shape(image.height, image.width);
  Matrix out = Matrix::Zero(s.positions(), 3);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const int row = (y / kPatch) * s.w + x / kPatch;
      for (int c = 0; c < 3; ++c) out(row, c) += image.at(y, x, c);
    }
  }
  return out / static_cast<double>(kPatch * kPatch);
}

Vae::Vae(Rng& rng) {
  // Redraw until comfortably full rank.
  for (;;) {
    Matrix a = nn::uniform_matrix(rng, 3, kLatentChannels, 1.0);
    Eigen::JacobiSVD<Matrix> svd(a);
    if (svd.singularValues().minCoeff() > 0.2) {
      projection_ = nn::parameter(std::move(a));
      return;
    }
  }
}

Matrix Vae::encode(const Image& image) const { return patch_means(image) * projection_.value(); }

Tensor Vae::encode_means(const Matrix& means) const {
  if (means.cols() != 3) throw ShapeError("patch means must have 3 columns");
  return ag::matmul(Tensor(means), projection_);
}

Image Vae::decode(const Matrix& latent, LatentShape shape) const {
  if (latent.rows() != shape.positions() || latent.cols() != kLatentChannels) {
    throw ShapeError("latent is " + std::to_string(latent.rows()) + "x" + std::to_string(latent.cols()) +
                     ", expected " + std::to_string(shape.positions()) + "x4");
  }
  const Matrix& a = projection_.value();
  const Matrix right_inverse = a.transpose() * (a * a.transpose()).inverse();
  const Matrix means = latent * right_inverse;
  Image out(shape.h * kPatch, shape.w * kPatch);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const int row = (y / kPatch) * shape.w + x / kPatch;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = std::clamp(means(row, c), 0.0, 1.0);
    }
  }
  return out;
}

void Vae::collect(const std::string& prefix, nn::ParamList& out) const {
  out.push_back({prefix + ".projection", projection_});
}

NoiseSchedule::NoiseSchedule(int timesteps, double beta_start, double beta_end) {
  if (timesteps < 1) throw ConfigError("diffusion needs at least one timestep");
  if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end) {
    throw ConfigError("betas must satisfy 0 < beta_start <= beta_end < 1");
  }
  betas_.assign(static_cast<std::size_t>(timesteps) + 1, 0.0);
  alpha_bars_.assign(static_cast<std::size_t>(timesteps) + 1, 1.0);
  for (int t = 1; t <= timesteps; ++t) {
    const double frac = timesteps == 1 ? 0.0 : static_cast<double>(t - 1) / (timesteps - 1);
    betas_[t] = beta_start + frac * (beta_end - beta_start);
    alpha_bars_[t] = alpha_bars_[t - 1] * (1.0 - betas_[t]);
  }
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > timesteps()) throw IndexError("timestep " + std::to_string(t) + " out of range");
  return betas_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > timesteps()) throw IndexError("timestep " + std::to_string(t) + " out of range");
  return alpha_bars_[static_cast<std::size_t>(t)];
}

Matrix add_noise(const Matrix& z0, const Matrix& eps, double alpha_bar) {
  if (z0.rows() != eps.rows() || z0.cols() != eps.cols()) throw ShapeError("add_noise: shape mismatch");
  return std::sqrt(alpha_bar) * z0 + std::sqrt(1.0 - alpha_bar) * eps;
}

Tensor add_noise(const Tensor& z0, const Tensor& eps, double alpha_bar) {
  return ag::add(ag::scale(z0, std::sqrt(alpha_bar)), ag::scale(eps, std::sqrt(1.0 - alpha_bar)));
}

NoiseDraw draw_noise(Rng& rng, const NoiseSchedule& schedule, LatentShape shape) {
  NoiseDraw d;
  d.tau = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(schedule.timesteps())));
  d.eps.resize(shape.positions(), kLatentChannels);
  for (ag::Index i = 0; i < d.eps.size(); ++i) d.eps.data()[i] = rng.normal();
  return d;
}

Matrix time_embedding(int tau, int width) {
  Matrix out = Matrix::Zero(1, width);
  const int half = width / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    out(0, 2 * i) = std::sin(tau * freq);
    out(0, 2 * i + 1) = std::cos(tau * freq);
  }
  return out;
}

Denoiser::Denoiser(const DenoiserDims& dims, Rng& rng)
    : dims_(dims),
      conv_in_(9 * kLatentChannels, dims.channels, rng),
      conv_down_(9 * dims.channels, dims.channels, rng),
      conv_mid_(9 * dims.channels, dims.channels, rng),
      conv_out_(9 * dims.channels, kLatentChannels, rng),
      norm_hi_(dims.channels),
      norm_lo_(dims.channels),
      attn_hi_(dims.channels, dims.text_width, dims.heads, rng),
      attn_lo_(dims.channels, dims.text_width, dims.heads, rng) {}

Tensor Denoiser::forward(const Tensor& gamma, LatentShape shape, int tau, const Tensor& text_rows) const {
  if (gamma.rows() != shape.positions() || gamma.cols() != kLatentChannels) {
    throw ShapeError("noisy latent does not match the latent grid");
  }
  if (shape.h % 2 != 0 || shape.w % 2 != 0) throw ShapeError("latent grid sides must be even");
  if (text_rows.cols() != dims_.text_width) {
    throw ShapeError("conditioning width " + std::to_string(text_rows.cols()) + " != " +
                     std::to_string(dims_.text_width));
  }
  const Tensor psi = ag::concat_rows({Tensor(time_embedding(tau, dims_.text_width)), text_rows});

  Tensor hi = ag::gelu(conv_in_.forward(ag::im2col(gamma, shape.h, shape.w, 3, 1, 1)));
  hi = ag::add(hi, attn_hi_.forward(norm_hi_.forward(hi), psi, false));
  Tensor lo = ag::gelu(conv_down_.forward(ag::im2col(hi, shape.h, shape.w, 3, 2, 1)));
  lo = ag::add(lo, attn_lo_.forward(norm_lo_.forward(lo), psi, false));
  const Tensor up = ag::add(ag::upsample_nearest(lo, shape.h / 2, shape.w / 2, 2), hi);
  const Tensor mid = ag::gelu(conv_mid_.forward(ag::im2col(up, shape.h, shape.w, 3, 1, 1)));
  return conv_out_.forward(ag::im2col(mid, shape.h, shape.w, 3, 1, 1));
}

void Denoiser::collect(const std::string& prefix, nn::ParamList& out) const {
  conv_in_.collect(prefix + ".conv_in", out);
  conv_down_.collect(prefix + ".conv_down", out);
  conv_mid_.collect(prefix + ".conv_mid", out);
  conv_out_.collect(prefix + ".conv_out", out);
  norm_hi_.collect(prefix + ".norm_hi", out);
  norm_lo_.collect(prefix + ".norm_lo", out);
  attn_hi_.collect(prefix + ".attn_hi", out);
  attn_lo_.collect(prefix + ".attn_lo", out);
}

Tensor loss_mse(const Tensor& eps, const Tensor& eps_hat) { return ag::mse(eps, eps_hat); }

Image ddpm_sample(const Denoiser& denoiser, const NoiseSchedule& schedule, const Vae& vae,
                  const Tensor& text_rows, LatentShape shape, Rng& rng) {
  ag::NoGradGuard no_grad;
  Matrix z(shape.positions(), kLatentChannels);
  for (ag::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
  for (int t = schedule.timesteps(); t >= 1; --t) {
    const Matrix eps = denoiser.forward(Tensor(z), shape, t, text_rows).value();
    const double beta = schedule.beta(t);
    z = (z - beta / std::sqrt(1.0 - schedule.alpha_bar(t)) * eps) / std::sqrt(1.0 - beta);
    if (t > 1) {
      for (ag::Index i = 0; i < z.size(); ++i) z.data()[i] += std::sqrt(beta) * rng.normal();
    }
  }
  return vae.decode(z, shape);
}

}  // namespace prefix::diffusion
