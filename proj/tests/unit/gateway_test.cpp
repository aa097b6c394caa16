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

#include <atomic>
#include <fstream>
#include <memory>
#include <thread>
#include <vector>

#include "prefix/gateway/gateway.hpp"
#include "prefix/sampler/sampler.hpp"
#include "prefix/trainer/checkpoint.hpp"
#include "support/fixtures.hpp"

namespace prefix::gateway {
namespace {

using nlohmann::json;

class GatewayTest : public ::testing::Test {
 protected:
  void SetUp() override {
    records_ = testing::toy_records(12, 1);
    prompt_ = records_[0].coarse_prompts.begin()->second;
  }

  std::shared_ptr<const ModelSnapshot> snapshot(std::uint64_t seed, std::string hash) const {
    return std::make_shared<ModelSnapshot>(ModelSnapshot{testing::tiny_model(records_, seed), std::move(hash)});
  }

  static Response post(Gateway& gw, const std::string& path, const json& body) {
    return gw.handle("POST", path, body.dump());
  }

  std::vector<corpus::TripletRecord> records_;
  std::string prompt_;
};

TEST_F(GatewayTest, HealthAndNoModel) {
  Gateway gw;
  auto r = gw.handle("GET", "/healthz", "");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["status"], "degraded");
  EXPECT_TRUE(r.body["checkpoint_hash"].is_null());
  EXPECT_EQ(post(gw, "/sessions", {{"coarse_prompt", prompt_}}).status, 503);
  EXPECT_EQ(post(gw, "/refine", {{"coarse_prompt", prompt_}}).status, 503);
  gw.set_model(snapshot(0, "abc"));
  r = gw.handle("GET", "/healthz", "");
  EXPECT_EQ(r.body["status"], "ok");
  EXPECT_EQ(r.body["checkpoint_hash"], "abc");
}

TEST_F(GatewayTest, StatusCodes) {
  Gateway gw;
  gw.set_model(snapshot(0, "h"));
  auto created = post(gw, "/sessions", {{"coarse_prompt", prompt_}});
  ASSERT_EQ(created.status, 201);
  const std::string id = created.body["id"];
  EXPECT_EQ(created.body["status"], "awaiting-selection");
  EXPECT_EQ(created.body["rounds"][0]["candidates"].size(), 3u);

  EXPECT_EQ(gw.handle("GET", "/sessions/" + id, "").status, 200);
  EXPECT_EQ(gw.handle("GET", "/sessions/nope", "").status, 404);
  EXPECT_EQ(post(gw, "/sessions/nope/select", {{"candidate_index", 0}}).status, 404);
  EXPECT_EQ(post(gw, "/sessions/" + id + "/select", json::object()).status, 422);
  EXPECT_EQ(post(gw, "/sessions/" + id + "/select", {{"candidate_index", "1"}}).status, 422);
  EXPECT_EQ(post(gw, "/sessions/" + id + "/select", {{"candidate_index", 3}}).status, 422);
  EXPECT_EQ(post(gw, "/sessions", {{"coarse_prompt", "  "}}).status, 400);
  EXPECT_EQ(post(gw, "/sessions", {{"prompt", prompt_}}).status, 400);
  EXPECT_EQ(gw.handle("POST", "/sessions", "{not json").status, 400);
  EXPECT_EQ(gw.handle("GET", "/refine", "").status, 405);
  EXPECT_EQ(gw.handle("DELETE", "/sessions/" + id, "").status, 405);
  EXPECT_EQ(gw.handle("GET", "/elsewhere", "").status, 404);

  const auto next = post(gw, "/sessions/" + id + "/select", {{"candidate_index", 1}});
  ASSERT_EQ(next.status, 200);
  EXPECT_EQ(next.body["rounds"][0]["selected"], 1);
}

TEST_F(GatewayTest, CompletedSessionConflicts) {
  Gateway gw;
  gw.set_model(snapshot(0, "h"));
  const auto created = post(gw, "/sessions", {{"coarse_prompt", prompt_}, {"config", {{"stride", 31}}}});
  ASSERT_EQ(created.status, 201);
  EXPECT_EQ(created.body["status"], "complete");
  EXPECT_EQ(post(gw, "/sessions/" + created.body["id"].get<std::string>() + "/select", {{"candidate_index", 0}})
                .status,
            409);
  EXPECT_EQ(post(gw, "/sessions", {{"coarse_prompt", prompt_}, {"config", {{"top_p", 2.0}}}}).status, 400);
}

TEST_F(GatewayTest, MatchesDirectCalls) {
  Gateway gw;
  gw.set_model(snapshot(4, "h"));
  const auto created = post(gw, "/sessions", {{"coarse_prompt", prompt_}, {"config", {{"seed", 17}}}});
  ASSERT_EQ(created.status, 201);
  const std::string id = created.body["id"];
  const auto selected = post(gw, "/sessions/" + id + "/select", {{"candidate_index", 2}});
  ASSERT_EQ(selected.status, 200);

  const auto model = testing::tiny_model(records_, 4);
  sampler::SamplingConfig cfg;
  cfg.seed = 17;
  auto direct = sampler::start_session(model, prompt_, cfg, id);
  sampler::continue_round(model, direct);
  sampler::select(direct, 2);
  sampler::continue_round(model, direct);
  EXPECT_EQ(sampler::session_from_json(selected.body), direct);

  const auto refined = post(gw, "/refine", {{"coarse_prompt", prompt_}, {"seed", 5}, {"max_tokens", 7}});
  ASSERT_EQ(refined.status, 200);
  cfg.seed = 5;
  cfg.max_tokens = 7;
  const auto gen = sampler::generate(model, prompt_, cfg);
  EXPECT_EQ(refined.body["fine_prompt"], gen.text);
  EXPECT_EQ(refined.body["checkpoint_hash"], "h");
}

TEST_F(GatewayTest, SessionsSurviveRestart) {
  const auto dir = testing::temp_dir("gateway_log");
  GatewayOptions o;
  o.session_log = dir / "sessions.jsonl";
  json before;
  std::string id;
  {
    Gateway gw(o);
    gw.set_model(snapshot(0, "h"));
    const auto created = post(gw, "/sessions", {{"coarse_prompt", prompt_}});
    id = created.body["id"];
    before = post(gw, "/sessions/" + id + "/select", {{"candidate_index", 0}}).body;
  }
  {
    std::ofstream(o.session_log, std::ios::app) << "{\"session\": {\"id\"";
  }
  Gateway gw(o);
  EXPECT_EQ(gw.session_count(), 1u);
  const auto after = gw.handle("GET", "/sessions/" + id, "");
  ASSERT_EQ(after.status, 200);
  EXPECT_EQ(after.body, before);
  gw.set_model(snapshot(0, "h"));
  const auto fresh = post(gw, "/sessions", {{"coarse_prompt", prompt_}});
  ASSERT_EQ(fresh.status, 201);
  EXPECT_NE(fresh.body["id"], id);
  EXPECT_EQ(post(gw, "/sessions/" + id + "/select", {{"candidate_index", 1}}).status, 200);
}

TEST_F(GatewayTest, Thumbnails) {
  GatewayOptions o;
  o.thumbnails = true;
  o.thumbnail_size = 16;
  Gateway gw(o);
  gw.set_model(snapshot(0, "h"));
  const auto created = post(gw, "/sessions", {{"coarse_prompt", prompt_}});
  const auto& thumb = created.body["rounds"][0]["candidates"][0]["thumbnail"];
  EXPECT_EQ(thumb["width"], 16);
  EXPECT_TRUE(thumb["illustrative"].get<bool>());
  EXPECT_EQ(corpus::base64_decode(thumb["data"].get<std::string>()).size(), 16u * 16 * 3);
}

TEST_F(GatewayTest, ConcurrentSessionsAndHotSwap) {
  Gateway gw;
  gw.set_model(snapshot(0, "a"));
  constexpr int kThreads = 8;
  std::atomic<int> failures{0};
  std::atomic<bool> stop{false};
  std::thread swapper([&] {
    int i = 0;
    while (!stop) gw.set_model(snapshot(static_cast<std::uint64_t>(i % 2), (i++ % 2) ? "b" : "a"));
  });
  std::vector<std::thread> workers;
  for (int t = 0; t < kThreads; ++t) {
    workers.emplace_back([&, t] {
      for (int k = 0; k < 4; ++k) {
        const auto c = post(gw, "/sessions", {{"coarse_prompt", prompt_}, {"config", {{"seed", t * 10 + k}}}});
        if (c.status != 201) {
          ++failures;
          continue;
        }
        const std::string id = c.body["id"];
        if (post(gw, "/sessions/" + id + "/select", {{"candidate_index", k % 3}}).status != 200) ++failures;
        const auto h = gw.handle("GET", "/healthz", "");
        if (h.body["checkpoint_hash"] != "a" && h.body["checkpoint_hash"] != "b") ++failures;
      }
    });
  }
  for (auto& w : workers) w.join();
  stop = true;
  swapper.join();
  EXPECT_EQ(failures.load(), 0);
  EXPECT_EQ(gw.session_count(), static_cast<std::size_t>(kThreads * 4));
}

TEST_F(GatewayTest, SameSessionSelectsSerialize) {
  Gateway gw;
  gw.set_model(snapshot(0, "h"));
  const std::string id = post(gw, "/sessions", {{"coarse_prompt", prompt_}}).body["id"];
  std::atomic<int> ok{0}, conflict{0};
  std::vector<std::thread> workers;
  for (int t = 0; t < 6; ++t) {
    workers.emplace_back([&] {
      const int s = post(gw, "/sessions/" + id + "/select", {{"candidate_index", 0}}).status;
      if (s == 200) ++ok;
      if (s == 409) ++conflict;
    });
  }
  for (auto& w : workers) w.join();
  EXPECT_EQ(ok + conflict, 6);
  EXPECT_GE(ok.load(), 1);
  const auto body = gw.handle("GET", "/sessions/" + id, "").body;
  for (std::size_t r = 0; r + 1 < body["rounds"].size(); ++r) EXPECT_EQ(body["rounds"][r]["selected"], 0);
}

TEST_F(GatewayTest, CheckpointHashFromFile) {
  const auto dir = testing::temp_dir("gateway_ckpt");
  const auto model = testing::tiny_model(records_);
  trainer::save_model(dir / "m.bin", model);
  Gateway gw;
  gw.load_checkpoint(dir / "m.bin");
  EXPECT_EQ(gw.handle("GET", "/healthz", "").body["checkpoint_hash"], file_hash_hex(dir / "m.bin"));
  EXPECT_EQ(file_hash_hex(dir / "m.bin").size(), 16u);
}

}  // namespace
}  // namespace prefix::gateway
