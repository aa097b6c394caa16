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

#ifndef PREFIX_GATEWAY_GATEWAY_HPP_
#define PREFIX_GATEWAY_GATEWAY_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "prefix/sampler/sampler.hpp"
#include "prefix/trainer/model.hpp"

namespace prefix::gateway {

struct Response {
  int status = 200;
  nlohmann::json body;
};

struct GatewayOptions {
  // Append-only JSONL of session snapshots; empty keeps sessions in memory.
  std::filesystem::path session_log;
  // Attach toy-world renders of each candidate (illustrative only).
  bool thumbnails = false;
  int thumbnail_size = 32;
  sampler::SamplingConfig sampling;
};

// An immutable model published to request handlers.
struct ModelSnapshot {
  trainer::Model model;
  std::string checkpoint_hash;
};

// FNV-1a of the file bytes, as 16 hex digits.
std::string file_hash_hex(const std::filesystem::path& path);

class Gateway {
 public:
  explicit Gateway(GatewayOptions options = {});

  // Replaces the model; requests already running keep the previous one.
  void set_model(std::shared_ptr<const ModelSnapshot> snapshot);
  void load_checkpoint(const std::filesystem::path& path);
  std::shared_ptr<const ModelSnapshot> model() const;

  Response handle(std::string_view method, std::string_view path, std::string_view body);

  std::size_t session_count() const;

 private:
  struct Entry {
    std::mutex mu;
    sampler::RefinementSession session;
    std::string created;
    std::string updated;
  };

  Response create_session(const nlohmann::json& req);
  Response select(const std::string& id, const nlohmann::json& req);
  Response get_session(const std::string& id);
  Response refine(const nlohmann::json& req);
  Response healthz() const;

  std::shared_ptr<Entry> find(const std::string& id) const;
  nlohmann::json resource(const Entry& e) const;
  void append_log(const Entry& e);
  void reload_log();

  GatewayOptions options_;
  mutable std::mutex model_mu_;
  std::shared_ptr<const ModelSnapshot> model_;
  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_serial_ = 0;
  std::mutex log_mu_;
};

// Blocks serving the gateway over HTTP until the process stops.
void serve(Gateway& gateway, const std::string& host, int port);

}  // namespace prefix::gateway

#endif  // PREFIX_GATEWAY_GATEWAY_HPP_
