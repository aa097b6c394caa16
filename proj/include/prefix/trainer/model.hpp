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

#ifndef PREFIX_TRAINER_MODEL_HPP_
#define PREFIX_TRAINER_MODEL_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "prefix/afem/afem.hpp"
#include "prefix/diffusion/diffusion.hpp"
#include "prefix/refiner/refiner.hpp"
#include "prefix/textcore/vocabulary.hpp"

namespace prefix::trainer {

struct ModelConfig {
  refiner::ModelDims text;
  int image_size = 32;
  refiner::StackDims image_stack{1, 4, 128};
  int afem_hidden = 64;
  int afem_heads = 4;
  int denoiser_channels = 32;
  int denoiser_heads = 4;
  int timesteps = 100;
  double beta_start = 1e-4;
  double beta_end = 2e-2;
  std::uint64_t seed = 0;

  // Every width at most 8, for finite-difference checks.
  static ModelConfig tiny();

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

enum class Block { kTextEncoder, kAdapter, kDecoder, kImageEncoder, kAfem, kDenoiser, kVae };

inline constexpr std::array<Block, 7> kAllBlocks = {Block::kTextEncoder,  Block::kAdapter, Block::kDecoder,
                                                    Block::kImageEncoder, Block::kAfem,    Block::kDenoiser,
                                                    Block::kVae};

std::string_view block_name(Block b);
// Accepts the block names and the short forms E_T, Q, D_T, E_V, AFEM,
// eps_theta and VAE.
std::optional<Block> parse_block(std::string_view name);

// All trainable pieces plus the vocabulary they were built for.
class Model {
 public:
  Model(const ModelConfig& config, text::Vocabulary vocab);
  // Copies would share parameter storage; use clone().
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  const text::Vocabulary& vocab() const { return vocab_; }
  diffusion::LatentShape latent_shape() const;

  nn::ParamList parameters(Block block) const;
  nn::ParamList parameters() const;

  // Restores a block to its initial values for this config's seed.
  void reinitialize(Block block);
  // Freezes every block not in the set.
  void set_trainable(const std::set<Block>& blocks);
  // Independent copy with the same parameter values.
  Model clone() const;
  void copy_parameters_from(const Model& other);

  refiner::EncodedText encode(std::string_view text) const;

  refiner::TextEncoder text_encoder;
  refiner::DomainAdapter adapter;
  refiner::TextDecoder decoder;
  afem::ImageEncoder image_encoder;
  afem::DynamicWeightNet afem;
  diffusion::Vae vae;
  diffusion::Denoiser denoiser;
  diffusion::NoiseSchedule schedule;

 private:
  ModelConfig config_;
  text::Vocabulary vocab_;
};

}  // namespace prefix::trainer

#endif  // PREFIX_TRAINER_MODEL_HPP_
