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

#include "prefix/common/error.hpp"
#include "prefix/corpus/toy_world.hpp"
#include "prefix/diffusion/diffusion.hpp"
#include "support/fixtures.hpp"

namespace prefix::diffusion {
namespace {

using ag::Matrix;

TEST(NoiseSchedule, LinearBetasAndCumulativeProduct) {
  const NoiseSchedule s(50, 1e-4, 2e-2);
  EXPECT_EQ(s.timesteps(), 50);
  EXPECT_DOUBLE_EQ(s.alpha_bar(0), 1.0);
  EXPECT_NEAR(s.beta(1), 1e-4, 1e-15);
  EXPECT_NEAR(s.beta(50), 2e-2, 1e-15);
  double prod = 1.0;
  for (int t = 1; t <= 50; ++t) {
    EXPECT_NEAR(s.beta(t), 1e-4 + (2e-2 - 1e-4) * (t - 1) / 49.0, 1e-15);
    prod *= 1.0 - s.beta(t);
    EXPECT_NEAR(s.alpha_bar(t), prod, 1e-14);
  }
  EXPECT_THROW(s.beta(51), IndexError);
  EXPECT_THROW(s.alpha_bar(-1), IndexError);
}

TEST(AddNoise, EndpointIdentitiesAreExact) {
  Rng r(1);
  const Matrix z0 = testing::random_matrix(r, 4, 4);
  const Matrix eps = testing::random_matrix(r, 4, 4);
  EXPECT_EQ(add_noise(z0, eps, 1.0), z0);
  EXPECT_EQ(add_noise(z0, eps, 0.0), eps);
}

TEST(AddNoise, MonteCarloMoments) {
  const double abar = 0.3;
  const double z0 = 0.8;
  Rng r(2);
  const int n = 10000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const Matrix e = Matrix::Constant(1, 1, r.normal());
    const double z = add_noise(Matrix::Constant(1, 1, z0), e, abar)(0, 0);
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_NEAR(mean, std::sqrt(abar) * z0, 0.03);
  EXPECT_NEAR(var / (1.0 - abar), 1.0, 0.05);
}

TEST(DrawNoise, TimestepInRange) {
  const NoiseSchedule s(10);
  Rng r(3);
  for (int i = 0; i < 200; ++i) {
    const auto d = draw_noise(r, s, {2, 2});
    EXPECT_GE(d.tau, 1);
    EXPECT_LE(d.tau, 10);
    EXPECT_EQ(d.eps.rows(), 4);
    EXPECT_EQ(d.eps.cols(), kLatentChannels);
  }
}

TEST(Vae, RoundTripOnPatchConstantImages) {
  Rng r(4);
  const Vae vae(r);
  for (const auto& rec : corpus::generate_toy_world(8, 5)) {
    const auto image = corpus::resolve_image(rec);
    const auto shape = latent_shape(image.height, image.width);
    const auto back = vae.decode(vae.encode(image), shape);
    double worst = 0.0;
    for (std::size_t i = 0; i < image.data.size(); ++i) worst = std::max(worst, std::abs(back.data[i] - image.data[i]));
    EXPECT_LE(worst, 1e-6);
  }
}

TEST(TimeEmbedding, BoundedAndDistinct) {
  const Matrix a = time_embedding(3, 8);
  const Matrix b = time_embedding(4, 8);
  EXPECT_EQ(a.cols(), 8);
  EXPECT_LE(a.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_GT((a - b).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Denoiser, OutputShapeAndContract) {
  Rng r(6);
  const Denoiser den({8, 2, 8}, r);
  const LatentShape shape{2, 2};
  const ag::Tensor gamma(testing::random_matrix(r, 4, kLatentChannels));
  const ag::Tensor text(testing::random_matrix(r, 3, 8));
  const auto out = den.forward(gamma, shape, 5, text);
  EXPECT_EQ(out.rows(), 4);
  EXPECT_EQ(out.cols(), kLatentChannels);
  EXPECT_THROW(den.forward(ag::Tensor(testing::random_matrix(r, 3, 4)), {1, 3}, 5, text), ShapeError);
  EXPECT_THROW(den.forward(gamma, shape, 5, ag::Tensor(testing::random_matrix(r, 3, 7))), ShapeError);
}

TEST(Denoiser, GradientThroughConditioning) {
  Rng r(7);
  const Denoiser den({8, 2, 8}, r);
  const Matrix gamma = testing::random_matrix(r, 4, kLatentChannels);
  EXPECT_LT(testing::op_grad_error(
                [&](const auto& x) { return den.forward(ag::Tensor(gamma), {2, 2}, 3, x[0]); },
                {testing::random_matrix(r, 3, 8)}),
            1e-5);
}

TEST(DdpmSample, DeterministicForSeed) {
  Rng r(8);
  const Denoiser den({8, 2, 8}, r);
  const Vae vae(r);
  const NoiseSchedule s(5);
  const ag::Tensor text(testing::random_matrix(r, 2, 8));
  Rng a(9), b(9);
  EXPECT_EQ(ddpm_sample(den, s, vae, text, {2, 2}, a), ddpm_sample(den, s, vae, text, {2, 2}, b));
}

}  // namespace
}  // namespace prefix::diffusion
