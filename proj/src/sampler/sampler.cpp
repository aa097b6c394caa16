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

#include "prefix/sampler/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "prefix/common/error.hpp"
#include "prefix/textcore/tokenizer.hpp"

namespace prefix::sampler {

namespace {

constexpr double kMassSlack = 1e-12;

SessionError session_error(SessionError::Kind kind, const std::string& what) { return {kind, what}; }

refiner::FeatureSequence memory_for(const trainer::Model& model, std::span<const TokenId> coarse) {
  const auto enc = model.text_encoder.encode(text::make_sequence({coarse.begin(), coarse.end()}));
  return model.adapter.adapt(enc.sequence);
}

std::vector<TokenId> coarse_tokens(const trainer::Model& model, std::string_view prompt) {
  auto ids = text::tokenize(prompt, model.vocab()).real_ids();
  if (ids.empty()) throw ShapeError("prompt has no tokens");
  return ids;
}

}  // namespace

void SamplingConfig::validate() const {
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must lie in (0, 1]");
  if (top_k < 1) throw ConfigError("top_k must be at least 1");
  if (max_tokens < 1) throw ConfigError("max_tokens must be at least 1");
  if (stride < 1) throw ConfigError("stride must be at least 1");
  if (n_candidates < 1) throw ConfigError("n_candidates must be at least 1");
}

nlohmann::json to_json(const SamplingConfig& c) {
  return {{"top_p", c.top_p},           {"top_k", c.top_k},
          {"max_tokens", c.max_tokens}, {"stride", c.stride},
          {"n_candidates", c.n_candidates}, {"seed", c.seed}};
}

SamplingConfig sampling_config_from_json(const nlohmann::json& j, SamplingConfig c) {
  try {
    c.top_p = j.value("top_p", c.top_p);
    c.top_k = j.value("top_k", c.top_k);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.stride = j.value("stride", c.stride);
    c.n_candidates = j.value("n_candidates", c.n_candidates);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad sampling config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<double> filter_probabilities(std::span<const double> probs, int top_k, double top_p) {
  if (probs.empty()) throw ShapeError("empty distribution");
  if (top_k < 1 || !(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("bad top-k/top-p parameters");
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return probs[a] > probs[b]; });
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(top_k), order.size());

  std::size_t keep = 0;
  double mass = 0.0;
  while (keep < k && probs[order[keep]] > 0.0) {
    mass += probs[order[keep]];
    ++keep;
    if (mass >= top_p - kMassSlack) break;
  }
  if (keep == 0 || !(mass > 0.0)) throw ShapeError("distribution has no mass");

  std::vector<double> out(probs.size(), 0.0);
  for (std::size_t i = 0; i < keep; ++i) out[order[i]] = probs[order[i]] / mass;
  return out;
}

std::vector<double> filter_top_k_top_p(std::span<const double> logits, int top_k, double top_p) {
  if (logits.empty()) throw ShapeError("empty logits");
  const double hi = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(hi)) throw ShapeError("logits have no finite maximum");
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (std::isnan(logits[i])) throw ShapeError("NaN logit");
    p[i] = std::exp(logits[i] - hi);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return filter_probabilities(p, top_k, top_p);
}

TokenId sample_index(std::span<const double> probs, Rng& rng) {
  if (probs.empty()) throw ShapeError("empty distribution");
  const double u = rng.uniform();
  double cum = 0.0;
  TokenId last = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cum += probs[i];
    last = static_cast<TokenId>(i);
    if (u < cum) return last;
  }
  if (last < 0) throw ShapeError("distribution has no mass");
  return last;
}

Continuation continue_tokens(const trainer::Model& model, const refiner::FeatureSequence& memory,
                             std::vector<TokenId> prefix, int max_new, const SamplingConfig& cfg, Rng& rng,
                             bool keep_trace) {
  if (prefix.empty() || prefix.front() != text::kBos) throw ShapeError("prefix must start with <bos>");
  ag::NoGradGuard no_grad;
  Continuation out;
  const auto max_len = static_cast<std::size_t>(model.decoder.max_len());
  std::vector<double> logits(static_cast<std::size_t>(model.decoder.vocab_size()));
  for (int step = 0; step < max_new && prefix.size() <= max_len; ++step) {
    const ag::RowVector row = model.decoder.decoder_step(memory, prefix);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = row(static_cast<ag::Index>(i));
    for (TokenId banned : {text::kPad, text::kBos, text::kUnk}) {
      logits[static_cast<std::size_t>(banned)] = -std::numeric_limits<double>::infinity();
    }
    const auto dist = filter_top_k_top_p(logits, cfg.top_k, cfg.top_p);
    const TokenId tok = sample_index(dist, rng);
    if (keep_trace) {
      TraceStep t;
      for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] > 0.0) {
          t.support.push_back(static_cast<TokenId>(i));
          t.probs.push_back(dist[i]);
        }
      }
      t.token = tok;
      out.trace.push_back(std::move(t));
    }
    if (tok == text::kEos) {
      out.eos = true;
      break;
    }
    out.tokens.push_back(tok);
    prefix.push_back(tok);
  }
  return out;
}

Generation generate(const trainer::Model& model, std::string_view coarse_prompt, const SamplingConfig& cfg,
                    const GenerateOptions& options) {
  cfg.validate();
  if (options.expected_vocab_hash && *options.expected_vocab_hash != model.vocab().hash()) {
    throw CheckpointError("vocabulary hash does not match the model");
  }
  const auto coarse = coarse_tokens(model, coarse_prompt);
  if (coarse.size() > static_cast<std::size_t>(model.config().text.max_len)) {
    throw GenerationLengthError(fmt::format("prompt has {} tokens, the encoder takes at most {}", coarse.size(),
                                            model.config().text.max_len));
  }
  ag::NoGradGuard no_grad;
  const auto memory = memory_for(model, coarse);
  Rng rng(derive_seed(cfg.seed, {fnv1a(coarse_prompt)}));
  auto c = continue_tokens(model, memory, {text::kBos}, cfg.max_tokens, cfg, rng, options.keep_trace);
  Generation g;
  g.text = text::detokenize(c.tokens, model.vocab());
  g.tokens = std::move(c.tokens);
  g.eos = c.eos;
  g.trace = std::move(c.trace);
  return g;
}

std::string_view status_name(SessionStatus s) {
  switch (s) {
    case SessionStatus::kOpenRound: return "open-round";
    case SessionStatus::kAwaitingSelection: return "awaiting-selection";
    case SessionStatus::kComplete: return "complete";
  }
  return "?";
}

SessionStatus RefinementSession::status() const {
  if (complete) return SessionStatus::kComplete;
  if (!rounds.empty() && !rounds.back().selected) return SessionStatus::kAwaitingSelection;
  return SessionStatus::kOpenRound;
}

const std::vector<TokenId>& RefinementSession::current_tokens() const {
  for (auto it = rounds.rbegin(); it != rounds.rend(); ++it) {
    if (it->selected) return it->candidates[static_cast<std::size_t>(*it->selected)].tokens;
  }
  return root_tokens;
}

RefinementSession start_session(const trainer::Model& model, std::string_view coarse_prompt,
                                const SamplingConfig& cfg, std::string id) {
  cfg.validate();
  RefinementSession s;
  s.root_tokens = coarse_tokens(model, coarse_prompt);
  if (s.root_tokens.size() >= static_cast<std::size_t>(model.config().text.max_len)) {
    throw GenerationLengthError(fmt::format("prompt has {} tokens, the decoder takes at most {}",
                                            s.root_tokens.size(), model.config().text.max_len - 1));
  }
  s.root_prompt = std::string(coarse_prompt);
  s.config = cfg;
  s.id = id.empty() ? fmt::format("{:016x}", derive_seed(cfg.seed, {fnv1a(coarse_prompt)})) : std::move(id);
  return s;
}

void continue_round(const trainer::Model& model, RefinementSession& session) {
  switch (session.status()) {
    case SessionStatus::kComplete: throw session_error(SessionError::Kind::kComplete, "session is complete");
    case SessionStatus::kAwaitingSelection:
      throw session_error(SessionError::Kind::kWrongState, "the current round awaits a selection");
    case SessionStatus::kOpenRound: break;
  }
  const auto& cfg = session.config;
  const std::vector<TokenId> base = session.current_tokens();
  // The last decoder input is <bos> + base + stride - 1 new tokens.
  if (base.size() + static_cast<std::size_t>(cfg.stride) > static_cast<std::size_t>(model.decoder.max_len())) {
    session.complete = true;
    throw session_error(SessionError::Kind::kComplete, "prompt has reached the decoder length limit");
  }
  ag::NoGradGuard no_grad;
  const auto memory = memory_for(model, session.root_tokens);
  std::vector<TokenId> prefix{text::kBos};
  prefix.insert(prefix.end(), base.begin(), base.end());

  Round round;
  const auto r = static_cast<std::uint64_t>(session.rounds.size());
  for (int c = 0; c < cfg.n_candidates; ++c) {
    Candidate cand;
    cand.seed = derive_seed(cfg.seed, {r, static_cast<std::uint64_t>(c)});
    Rng rng(cand.seed);
    const auto cont = continue_tokens(model, memory, prefix, cfg.stride, cfg, rng);
    cand.tokens = base;
    cand.tokens.insert(cand.tokens.end(), cont.tokens.begin(), cont.tokens.end());
    cand.new_tokens = static_cast<int>(cont.tokens.size());
    cand.eos = cont.eos;
    cand.text = text::detokenize(cand.tokens, model.vocab());
    round.candidates.push_back(std::move(cand));
  }
  session.rounds.push_back(std::move(round));
}

void select(RefinementSession& session, int index) {
  if (session.status() != SessionStatus::kAwaitingSelection) {
    throw session_error(session.complete ? SessionError::Kind::kComplete : SessionError::Kind::kWrongState,
                        "no round awaits a selection");
  }
  auto& round = session.rounds.back();
  if (index < 0 || index >= static_cast<int>(round.candidates.size())) {
    throw session_error(SessionError::Kind::kBadIndex,
                        fmt::format("candidate {} out of range [0, {})", index, round.candidates.size()));
  }
  round.selected = index;
  if (round.candidates[static_cast<std::size_t>(index)].eos) session.complete = true;
}

nlohmann::json session_to_json(const RefinementSession& s) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : s.rounds) {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : r.candidates) {
      cands.push_back({{"tokens", c.tokens},
                       {"text", c.text},
                       {"new_tokens", c.new_tokens},
                       {"eos", c.eos},
                       {"seed", c.seed}});
    }
    rounds.push_back({{"candidates", std::move(cands)},
                      {"selected", r.selected ? nlohmann::json(*r.selected) : nlohmann::json(nullptr)}});
  }
  return {{"id", s.id},
          {"root_prompt", s.root_prompt},
          {"root_tokens", s.root_tokens},
          {"config", to_json(s.config)},
          {"rounds", std::move(rounds)},
          {"complete", s.complete},
          {"status", status_name(s.status())}};
}

RefinementSession session_from_json(const nlohmann::json& j) {
  RefinementSession s;
  try {
    s.id = j.at("id").get<std::string>();
    s.root_prompt = j.at("root_prompt").get<std::string>();
    s.root_tokens = j.at("root_tokens").get<std::vector<TokenId>>();
    s.config = sampling_config_from_json(j.at("config"));
    for (const auto& rj : j.at("rounds")) {
      Round r;
      for (const auto& cj : rj.at("candidates")) {
        Candidate c;
        c.tokens = cj.at("tokens").get<std::vector<TokenId>>();
        c.text = cj.at("text").get<std::string>();
        c.new_tokens = cj.at("new_tokens").get<int>();
        c.eos = cj.at("eos").get<bool>();
        c.seed = cj.at("seed").get<std::uint64_t>();
        r.candidates.push_back(std::move(c));
      }
      if (!rj.at("selected").is_null()) r.selected = rj.at("selected").get<int>();
      s.rounds.push_back(std::move(r));
    }
    s.complete = j.at("complete").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw SessionError(SessionError::Kind::kNotFound, std::string("malformed session log: ") + e.what());
  }
  return s;
}

RefinementSession replay_session(const trainer::Model& model, const nlohmann::json& log) {
  const RefinementSession logged = session_from_json(log);
  RefinementSession s = start_session(model, logged.root_prompt, logged.config, logged.id);
  for (const auto& r : logged.rounds) {
    try {
      continue_round(model, s);
    } catch (const SessionError& e) {
      if (e.kind() != SessionError::Kind::kComplete) throw;
      break;
    }
    if (r.selected) select(s, *r.selected);
  }
  // A session closed by the length limit carries no extra round.
  if (logged.complete && !s.complete && s.status() == SessionStatus::kOpenRound) s.complete = true;
  return s;
}

SwapDemo swap_encoder_demo(const trainer::Model& model, std::string_view prompt, std::uint64_t seed) {
  ag::NoGradGuard no_grad;
  trainer::Model initial = model.clone();
  initial.reinitialize(trainer::Block::kTextEncoder);
  const auto a = initial.encode(prompt);
  const auto b = model.encode(prompt);

  SwapDemo demo;
  const auto shape = model.latent_shape();
  Rng ra(seed);
  demo.initial = diffusion::ddpm_sample(model.denoiser, model.schedule, model.vae, a.sequence.real(), shape, ra);
  Rng rb(seed);
  demo.trained = diffusion::ddpm_sample(model.denoiser, model.schedule, model.vae, b.sequence.real(), shape, rb);

  const ag::Matrix& pa = a.pooled.value();
  const ag::Matrix& pb = b.pooled.value();
  const double na = pa.norm();
  const double nb = pb.norm();
  demo.cosine_distance = (na > 0.0 && nb > 0.0) ? 1.0 - pa.cwiseProduct(pb).sum() / (na * nb) : 1.0;
  return demo;
}

}  // namespace prefix::sampler
