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

#include "prefix/trainer/model.hpp"

#include "prefix/common/error.hpp"
#include "prefix/textcore/tokenizer.hpp"

namespace prefix::trainer {

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.text.n = 8;
  c.text.m = 8;
  c.text.encoder = {1, 2, 8};
  c.text.decoder = {1, 2, 8};
  c.text.max_len = 32;
  c.image_size = 16;
  c.image_stack = {1, 2, 8};
  c.afem_hidden = 8;
  c.afem_heads = 2;
  c.denoiser_channels = 8;
  c.denoiser_heads = 2;
  c.timesteps = 10;
  return c;
}

void ModelConfig::validate() const {
  text.validate();
  if (image_size <= 0 || image_size % (2 * diffusion::kPatch) != 0) {
    throw ConfigError("image_size must be a positive multiple of 16");
  }
  if (afem_hidden <= 0 || afem_heads <= 0 || text.n % afem_heads != 0) {
    throw ConfigError("AFEM width must be divisible by its head count");
  }
  if (image_stack.heads <= 0 || text.n % image_stack.heads != 0) {
    throw ConfigError("image encoder width must be divisible by its head count");
  }
  if (denoiser_channels <= 0 || denoiser_heads <= 0 || denoiser_channels % denoiser_heads != 0) {
    throw ConfigError("denoiser channels must be divisible by its head count");
  }
  if (timesteps < 1) throw ConfigError("timesteps must be positive");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"text", refiner::to_json(c.text)},
          {"image_size", c.image_size},
          {"image_stack", {{"layers", c.image_stack.layers}, {"heads", c.image_stack.heads}, {"d_ff", c.image_stack.d_ff}}},
          {"afem_hidden", c.afem_hidden},
          {"afem_heads", c.afem_heads},
          {"denoiser_channels", c.denoiser_channels},
          {"denoiser_heads", c.denoiser_heads},
          {"timesteps", c.timesteps},
          {"beta_start", c.beta_start},
          {"beta_end", c.beta_end},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    if (j.contains("text")) c.text = refiner::model_dims_from_json(j["text"]);
    c.image_size = j.value("image_size", c.image_size);
    if (j.contains("image_stack")) {
      const auto& s = j["image_stack"];
      c.image_stack.layers = s.value("layers", c.image_stack.layers);
      c.image_stack.heads = s.value("heads", c.image_stack.heads);
      c.image_stack.d_ff = s.value("d_ff", c.image_stack.d_ff);
    }
    c.afem_hidden = j.value("afem_hidden", c.afem_hidden);
    c.afem_heads = j.value("afem_heads", c.afem_heads);
    c.denoiser_channels = j.value("denoiser_channels", c.denoiser_channels);
    c.denoiser_heads = j.value("denoiser_heads", c.denoiser_heads);
    c.timesteps = j.value("timesteps", c.timesteps);
    c.beta_start = j.value("beta_start", c.beta_start);
    c.beta_end = j.value("beta_end", c.beta_end);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string_view block_name(Block b) {
  switch (b) {
    case Block::kTextEncoder: return "text_encoder";
    case Block::kAdapter: return "adapter";
    case Block::kDecoder: return "decoder";
    case Block::kImageEncoder: return "image_encoder";
    case Block::kAfem: return "afem";
    case Block::kDenoiser: return "denoiser";
    case Block::kVae: return "vae";
  }
  return "?";
}

std::optional<Block> parse_block(std::string_view name) {
  static constexpr std::array<std::string_view, 7> kShort = {"E_T", "Q", "D_T", "E_V", "AFEM", "eps_theta", "VAE"};
  for (std::size_t i = 0; i < kAllBlocks.size(); ++i) {
    if (name == block_name(kAllBlocks[i]) || name == kShort[i]) return kAllBlocks[i];
  }
  return std::nullopt;
}

Model::Model(const ModelConfig& config, text::Vocabulary vocab) : config_(config), vocab_(std::move(vocab)) {
  config_.validate();
  for (Block b : kAllBlocks) reinitialize(b);
  schedule = diffusion::NoiseSchedule(config_.timesteps, config_.beta_start, config_.beta_end);
}

void Model::reinitialize(Block block) {
  const int v = static_cast<int>(vocab_.size());
  const auto& d = config_.text;
  // One stream per block so resizing one block leaves the others alone.
  Rng r(derive_seed(config_.seed, {static_cast<std::uint64_t>(block) + 1}));
  switch (block) {
    case Block::kTextEncoder: text_encoder = refiner::TextEncoder(v, d, r); break;
    case Block::kAdapter: adapter = refiner::DomainAdapter(d.n, d.m, r); break;
    case Block::kDecoder: decoder = refiner::TextDecoder(v, d, r); break;
    case Block::kImageEncoder:
      image_encoder = afem::ImageEncoder({config_.image_size, diffusion::kPatch, d.n, config_.image_stack}, r);
      break;
    case Block::kAfem: afem = afem::DynamicWeightNet(d.n, config_.afem_hidden, config_.afem_heads, r); break;
    case Block::kVae: vae = diffusion::Vae(r); break;
    case Block::kDenoiser:
      denoiser = diffusion::Denoiser({config_.denoiser_channels, config_.denoiser_heads, d.n}, r);
      break;
  }
}

diffusion::LatentShape Model::latent_shape() const {
  return diffusion::latent_shape(config_.image_size, config_.image_size);
}

nn::ParamList Model::parameters(Block block) const {
  nn::ParamList out;
  const std::string prefix(block_name(block));
  switch (block) {
    case Block::kTextEncoder: text_encoder.collect(prefix, out); break;
    case Block::kAdapter: adapter.collect(prefix, out); break;
    case Block::kDecoder: decoder.collect(prefix, out); break;
    case Block::kImageEncoder: image_encoder.collect(prefix, out); break;
    case Block::kAfem: afem.collect(prefix, out); break;
    case Block::kDenoiser: denoiser.collect(prefix, out); break;
    case Block::kVae: vae.collect(prefix, out); break;
  }
  return out;
}

nn::ParamList Model::parameters() const {
  nn::ParamList out;
  for (Block b : kAllBlocks) {
    auto part = parameters(b);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

void Model::set_trainable(const std::set<Block>& blocks) {
  for (Block b : kAllBlocks) {
    const bool on = blocks.contains(b);
    for (auto& p : parameters(b)) {
      p.tensor.set_requires_grad(on);
      p.tensor.zero_grad();
    }
  }
}

Model Model::clone() const {
  Model copy(config_, vocab_);
  copy.copy_parameters_from(*this);
  return copy;
}

void Model::copy_parameters_from(const Model& other) {
  auto dst = parameters();
  const auto src = other.parameters();
  if (dst.size() != src.size()) throw ShapeError("models have different parameter layouts");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != src[i].name || dst[i].tensor.rows() != src[i].tensor.rows() ||
        dst[i].tensor.cols() != src[i].tensor.cols()) {
      throw ShapeError("parameter mismatch at " + dst[i].name);
    }
    dst[i].tensor.mutable_value() = src[i].tensor.value();
    dst[i].tensor.set_requires_grad(src[i].tensor.requires_grad());
  }
}

refiner::EncodedText Model::encode(std::string_view text) const {
  return text_encoder.encode(text::tokenize(text, vocab_));
}

}  // namespace prefix::trainer
