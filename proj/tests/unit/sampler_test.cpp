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

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "prefix/common/error.hpp"
#include "prefix/sampler/sampler.hpp"
#include "support/fixtures.hpp"

namespace prefix::sampler {
namespace {

void expect_session_error(const std::function<void()>& f, SessionError::Kind kind) {
  try {
    f();
    ADD_FAILURE() << "no SessionError";
  } catch (const SessionError& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

TEST(Nucleus, WorkedExample) {
  const std::vector<double> p{0.5, 0.3, 0.15, 0.05};
  const auto f = filter_probabilities(p, 4, 0.95);
  ASSERT_EQ(f.size(), 4u);
  EXPECT_NEAR(f[0], 10.0 / 19, 1e-12);
  EXPECT_NEAR(f[1], 6.0 / 19, 1e-12);
  EXPECT_NEAR(f[2], 3.0 / 19, 1e-12);
  EXPECT_EQ(f[3], 0.0);
}

TEST(Nucleus, TopKAndTies) {
  const std::vector<double> p{0.25, 0.25, 0.25, 0.25};
  const auto f = filter_probabilities(p, 2, 1.0);
  EXPECT_EQ(f, (std::vector<double>{0.5, 0.5, 0.0, 0.0}));
  const auto g = filter_probabilities(std::vector<double>{0.1, 0.3, 0.3, 0.3}, 1, 1.0);
  EXPECT_EQ(g, (std::vector<double>{0.0, 1.0, 0.0, 0.0}));
}

TEST(Nucleus, LogitsMatchSoftmaxThenFilter) {
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<double> logits{2.0, -inf, 0.5, 1.0, -1.0};
  double z = 0.0;
  for (double l : logits) z += std::exp(l);
  std::vector<double> probs;
  for (double l : logits) probs.push_back(std::exp(l) / z);
  const auto a = filter_top_k_top_p(logits, 3, 0.9);
  const auto b = filter_probabilities(probs, 3, 0.9);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  EXPECT_EQ(a[1], 0.0);
}

TEST(Nucleus, FullSupportLeavesDistribution) {
  const std::vector<double> p{0.4, 0.3, 0.2, 0.1};
  const auto f = filter_probabilities(p, 4, 1.0);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(f[i], p[i], 1e-15);
}

// Pearson chi-square with 3 degrees of freedom; 11.345 is the 0.99 quantile.
TEST(Sampling, ChiSquareFidelity) {
  const std::vector<double> p{0.4, 0.3, 0.2, 0.1};
  const auto f = filter_probabilities(p, 4, 1.0);
  Rng rng(2024);
  constexpr int kDraws = 50000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < kDraws; ++i) ++counts[sample_index(f, rng)];
  double chi2 = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double expected = kDraws * p[i];
    chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
  }
  EXPECT_LT(chi2, 11.345);
}

TEST(Continuation, TraceStaysInFilteredSupport) {
  const auto records = testing::toy_records(8, 1);
  const auto model = testing::tiny_model(records);
  const auto memory = model.encode(records[0].coarse_prompts.begin()->second).sequence;
  SamplingConfig cfg;
  cfg.top_k = 3;
  Rng rng(5);
  const auto c = continue_tokens(model, memory, {text::kBos}, 10, cfg, rng, true);
  ASSERT_FALSE(c.trace.empty());
  for (const auto& step : c.trace) {
    EXPECT_LE(step.support.size(), 3u);
    EXPECT_NE(std::find(step.support.begin(), step.support.end(), step.token), step.support.end());
    for (TokenId t : step.support) {
      EXPECT_TRUE(t != text::kPad && t != text::kBos && t != text::kUnk) << t;
    }
  }
}

TEST(Generate, DeterministicAndGuarded) {
  const auto records = testing::toy_records(8, 2);
  const auto model = testing::tiny_model(records);
  SamplingConfig cfg;
  cfg.seed = 11;
  const auto a = generate(model, records[1].coarse_prompts.begin()->second, cfg);
  const auto b = generate(model, records[1].coarse_prompts.begin()->second, cfg);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_LE(a.tokens.size(), 20u);
  EXPECT_THROW(generate(model, "   ", cfg), ShapeError);
  std::string long_prompt;
  for (int i = 0; i < 40; ++i) long_prompt += "red ";
  EXPECT_THROW(generate(model, long_prompt, cfg), GenerationLengthError);
  GenerateOptions o;
  o.expected_vocab_hash = model.vocab().hash() + 1;
  EXPECT_THROW(generate(model, records[1].coarse_prompts.begin()->second, cfg, o), CheckpointError);
}

TEST(Session, RandomizedInvariants) {
  const auto records = testing::toy_records(40, 3);
  const auto model = testing::tiny_model(records);
  Rng pick(77);
  for (int s = 0; s < 1000; ++s) {
    SamplingConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(s);
    const auto& prompt = records[pick.index(records.size())].coarse_prompts.begin()->second;
    auto session = start_session(model, prompt, cfg);
    for (int round = 0; round < 3 && !session.complete; ++round) {
      const std::vector<TokenId> base = session.current_tokens();
      try {
        continue_round(model, session);
      } catch (const SessionError& e) {
        ASSERT_EQ(e.kind(), SessionError::Kind::kComplete);
        break;
      }
      const Round& r = session.rounds.back();
      ASSERT_EQ(r.candidates.size(), 3u);
      for (const auto& c : r.candidates) {
        ASSERT_GE(c.tokens.size(), base.size());
        ASSERT_TRUE(std::equal(base.begin(), base.end(), c.tokens.begin()));
        ASSERT_EQ(static_cast<int>(c.tokens.size() - base.size()), c.new_tokens);
        if (c.eos) {
          ASSERT_LE(c.new_tokens, 6);
        } else {
          ASSERT_EQ(c.new_tokens, 6);
        }
      }
      select(session, static_cast<int>(pick.index(3)));
    }
    const auto replayed = replay_session(model, session_to_json(session));
    ASSERT_EQ(replayed, session) << "session " << s;
  }
}

TEST(Session, JsonRoundTrip) {
  const auto records = testing::toy_records(8, 4);
  const auto model = testing::tiny_model(records);
  auto s = start_session(model, records[0].coarse_prompts.begin()->second, SamplingConfig{}, "abc");
  continue_round(model, s);
  select(s, 1);
  EXPECT_EQ(session_from_json(session_to_json(s)), s);
  EXPECT_EQ(s.id, "abc");
}

TEST(Session, StateErrors) {
  const auto records = testing::toy_records(8, 5);
  const auto model = testing::tiny_model(records);
  auto s = start_session(model, records[0].coarse_prompts.begin()->second, SamplingConfig{});
  EXPECT_EQ(s.status(), SessionStatus::kOpenRound);
  expect_session_error([&] { select(s, 0); }, SessionError::Kind::kWrongState);
  continue_round(model, s);
  EXPECT_EQ(s.status(), SessionStatus::kAwaitingSelection);
  expect_session_error([&] { continue_round(model, s); }, SessionError::Kind::kWrongState);
  expect_session_error([&] { select(s, 3); }, SessionError::Kind::kBadIndex);
  expect_session_error([&] { select(s, -1); }, SessionError::Kind::kBadIndex);
  expect_session_error([&] { session_from_json(nlohmann::json{{"id", 3}}); }, SessionError::Kind::kNotFound);
}

TEST(Session, DecoderLimitCompletes) {
  const auto records = testing::toy_records(8, 6);
  const auto model = testing::tiny_model(records);
  SamplingConfig cfg;
  cfg.stride = 31;
  auto s = start_session(model, records[0].coarse_prompts.begin()->second, cfg);
  expect_session_error([&] { continue_round(model, s); }, SessionError::Kind::kComplete);
  EXPECT_TRUE(s.complete);
  EXPECT_EQ(s.status(), SessionStatus::kComplete);
  expect_session_error([&] { continue_round(model, s); }, SessionError::Kind::kComplete);
}

TEST(SamplingConfig, Defaults) {
  const SamplingConfig c;
  EXPECT_EQ(c.top_p, 0.95);
  EXPECT_EQ(c.top_k, 50);
  EXPECT_EQ(c.stride, 6);
  EXPECT_EQ(c.n_candidates, 3);
  EXPECT_EQ(sampling_config_from_json(to_json(c)), c);
  SamplingConfig bad;
  bad.top_p = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(SwapDemo, DistinctConditioning) {
  const auto records = testing::toy_records(8, 7);
  const auto model = testing::tiny_model(records);
  const auto d = swap_encoder_demo(model, records[0].coarse_prompts.begin()->second, 3);
  EXPECT_EQ(d.initial.width, 16);
  EXPECT_GE(d.cosine_distance, 0.0);
  EXPECT_LE(d.cosine_distance, 2.0);
}

}  // namespace
}  // namespace prefix::sampler
