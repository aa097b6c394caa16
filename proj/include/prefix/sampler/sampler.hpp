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

#ifndef PREFIX_SAMPLER_SAMPLER_HPP_
#define PREFIX_SAMPLER_SAMPLER_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefix/common/rng.hpp"
#include "prefix/corpus/image.hpp"
#include "prefix/trainer/model.hpp"

namespace prefix::sampler {

using text::TokenId;

struct SamplingConfig {
  double top_p = 0.95;
  int top_k = 50;
  int max_tokens = 20;
  int stride = 6;
  int n_candidates = 3;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SamplingConfig&) const = default;
};

nlohmann::json to_json(const SamplingConfig& c);
// Missing keys keep their defaults.
SamplingConfig sampling_config_from_json(const nlohmann::json& j, SamplingConfig base = {});

// Softmax, then the k most probable tokens (lower id first on ties), then
// the shortest prefix of those in descending probability whose mass
// reaches p, renormalized. -inf logits get probability zero.
std::vector<double> filter_top_k_top_p(std::span<const double> logits, int top_k, double top_p);
// The same filter applied to an already normalized distribution.
std::vector<double> filter_probabilities(std::span<const double> probs, int top_k, double top_p);

// Inverse-CDF draw from a distribution.
TokenId sample_index(std::span<const double> probs, Rng& rng);

struct TraceStep {
  std::vector<TokenId> support;  // tokens with non-zero filtered mass
  std::vector<double> probs;     // their filtered probabilities
  TokenId token = 0;
};

struct Continuation {
  std::vector<TokenId> tokens;  // new tokens, without <eos>
  bool eos = false;
  std::vector<TraceStep> trace;
};

// Samples up to max_new tokens after prefix (which starts with <bos>) with
// memory from the coarse prompt. <pad>, <bos> and <unk> are never drawn.
Continuation continue_tokens(const trainer::Model& model, const refiner::FeatureSequence& memory,
                             std::vector<TokenId> prefix, int max_new, const SamplingConfig& cfg, Rng& rng,
                             bool keep_trace = false);

struct Generation {
  std::string text;
  std::vector<TokenId> tokens;
  bool eos = false;
  std::vector<TraceStep> trace;
};

struct GenerateOptions {
  // When set, the model's vocabulary hash must match.
  std::optional<std::uint64_t> expected_vocab_hash;
  bool keep_trace = false;
};

// One-shot refinement: the fine prompt decoded from <bos>, at most
// cfg.max_tokens tokens.
Generation generate(const trainer::Model& model, std::string_view coarse_prompt, const SamplingConfig& cfg,
                    const GenerateOptions& options = {});

struct Candidate {
  std::vector<TokenId> tokens;  // the whole prompt so far, without <bos>
  std::string text;
  int new_tokens = 0;
  bool eos = false;
  std::uint64_t seed = 0;

  bool operator==(const Candidate&) const = default;
};

struct Round {
  std::vector<Candidate> candidates;
  std::optional<int> selected;

  bool operator==(const Round&) const = default;
};

enum class SessionStatus { kOpenRound, kAwaitingSelection, kComplete };

std::string_view status_name(SessionStatus s);

struct RefinementSession {
  std::string id;
  std::string root_prompt;
  std::vector<TokenId> root_tokens;
  SamplingConfig config;
  std::vector<Round> rounds;
  bool complete = false;

  SessionStatus status() const;
  // Tokens of the prompt the next round extends.
  const std::vector<TokenId>& current_tokens() const;
  bool operator==(const RefinementSession&) const = default;
};

RefinementSession start_session(const trainer::Model& model, std::string_view coarse_prompt,
                                const SamplingConfig& cfg, std::string id = "");
// Adds a round of n_candidates continuations of stride tokens each. Throws
// SessionError: kWrongState while a round awaits selection, kComplete once
// the selected prompt ended or the decoder has no room left.
void continue_round(const trainer::Model& model, RefinementSession& session);
// Records the choice; choosing an <eos>-terminated candidate completes the
// session.
void select(RefinementSession& session, int index);

nlohmann::json session_to_json(const RefinementSession& session);
RefinementSession session_from_json(const nlohmann::json& j);

// Re-runs a logged session from its root prompt, seed and selections.
RefinementSession replay_session(const trainer::Model& model, const nlohmann::json& log);

struct SwapDemo {
  corpus::Image initial;  // conditioned on the freshly initialized text encoder
  corpus::Image trained;  // conditioned on the model's own text encoder
  double cosine_distance = 0.0;  // 1 - cos of the pooled conditioning features
};

// Toy reverse diffusion run twice with the same noise, swapping only the
// text encoder that produces the conditioning.
SwapDemo swap_encoder_demo(const trainer::Model& model, std::string_view prompt, std::uint64_t seed);

}  // namespace prefix::sampler

#endif  // PREFIX_SAMPLER_SAMPLER_HPP_
