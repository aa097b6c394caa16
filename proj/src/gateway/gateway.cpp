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

#include "prefix/gateway/gateway.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>

#include "prefix/common/error.hpp"
#include "prefix/corpus/image.hpp"
#include "prefix/corpus/toy_world.hpp"
#include "prefix/textcore/vocabulary.hpp"
#include "prefix/trainer/checkpoint.hpp"

namespace prefix::gateway {

namespace {

using nlohmann::json;

Response error(int status, std::string message) { return {status, {{"error", std::move(message)}}}; }

std::string now_iso() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  return fmt::format("{}.{:03d}Z", buf, ms);
}

// Splits "/a/b/c" into {"a", "b", "c"}.
std::vector<std::string> segments(std::string_view path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = i;
    while (j < path.size() && path[j] != '/' && path[j] != '?') ++j;
    if (j > i) out.emplace_back(path.substr(i, j - i));
    if (j < path.size() && path[j] == '?') break;
    i = j;
  }
  return out;
}

std::string prompt_of(const json& req) {
  if (!req.is_object() || !req.contains("coarse_prompt") || !req["coarse_prompt"].is_string()) return "";
  return req["coarse_prompt"].get<std::string>();
}

}  // namespace

std::string file_hash_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fmt::format("{:016x}", fnv1a(bytes));
}

Gateway::Gateway(GatewayOptions options) : options_(std::move(options)) {
  options_.sampling.validate();
  if (!options_.session_log.empty()) reload_log();
}

void Gateway::set_model(std::shared_ptr<const ModelSnapshot> snapshot) {
  std::lock_guard lock(model_mu_);
  model_ = std::move(snapshot);
}

void Gateway::load_checkpoint(const std::filesystem::path& path) {
  auto snap = std::make_shared<ModelSnapshot>(ModelSnapshot{trainer::load_model(path), file_hash_hex(path)});
  set_model(std::move(snap));
}

std::shared_ptr<const ModelSnapshot> Gateway::model() const {
  std::lock_guard lock(model_mu_);
  return model_;
}

std::size_t Gateway::session_count() const {
  std::lock_guard lock(sessions_mu_);
  return sessions_.size();
}

Response Gateway::handle(std::string_view method, std::string_view path, std::string_view body) {
  try {
    json req = json::object();
    if (method == "POST" && !body.empty()) {
      req = json::parse(body, nullptr, false);
      if (req.is_discarded()) return error(400, "request body is not valid JSON");
    }
    const auto seg = segments(path);
    if (seg.size() == 1 && seg[0] == "healthz") {
      return method == "GET" ? healthz() : error(405, "method not allowed");
    }
    if (seg.size() == 1 && seg[0] == "refine") {
      return method == "POST" ? refine(req) : error(405, "method not allowed");
    }
    if (seg.size() == 1 && seg[0] == "sessions") {
      return method == "POST" ? create_session(req) : error(405, "method not allowed");
    }
    if (seg.size() == 2 && seg[0] == "sessions") {
      return method == "GET" ? get_session(seg[1]) : error(405, "method not allowed");
    }
    if (seg.size() == 3 && seg[0] == "sessions" && seg[2] == "select") {
      return method == "POST" ? select(seg[1], req) : error(405, "method not allowed");
    }
    return error(404, "no such endpoint");
  } catch (const ConfigError& e) {
    return error(400, e.what());
  } catch (const GenerationLengthError& e) {
    return error(400, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

Response Gateway::healthz() const {
  const auto snap = model();
  if (!snap) return {200, {{"status", "degraded"}, {"checkpoint_hash", nullptr}}};
  return {200, {{"status", "ok"}, {"checkpoint_hash", snap->checkpoint_hash}}};
}

Response Gateway::create_session(const json& req) {
  const std::string prompt = prompt_of(req);
  const auto snap = model();
  if (text::split_words(prompt).empty()) return error(400, "coarse_prompt must be a non-empty string");
  if (!snap) return error(503, "no checkpoint loaded");
  const sampler::SamplingConfig cfg =
      req.contains("config") ? sampler::sampling_config_from_json(req["config"], options_.sampling)
                             : options_.sampling;

  auto entry = std::make_shared<Entry>();
  std::lock_guard entry_lock(entry->mu);
  {
    std::lock_guard lock(sessions_mu_);
    std::string id;
    do {
      id = fmt::format("s{:04d}-{:08x}", next_serial_++,
                       static_cast<std::uint32_t>(derive_seed(cfg.seed, {fnv1a(prompt)})));
    } while (sessions_.contains(id));
    entry->session = sampler::start_session(snap->model, prompt, cfg, id);
    entry->created = entry->updated = now_iso();
    sessions_[id] = entry;
  }
  try {
    sampler::continue_round(snap->model, entry->session);
  } catch (const SessionError& e) {
    if (e.kind() != SessionError::Kind::kComplete) throw;
  }
  append_log(*entry);
  return {201, resource(*entry)};
}

Response Gateway::select(const std::string& id, const json& req) {
  const auto entry = find(id);
  if (!entry) return error(404, "unknown session " + id);
  if (!req.is_object() || !req.contains("candidate_index") || !req["candidate_index"].is_number_integer()) {
    return error(422, "candidate_index must be an integer");
  }
  const auto snap = model();
  if (!snap) return error(503, "no checkpoint loaded");
  const int index = req["candidate_index"].get<int>();

  std::lock_guard lock(entry->mu);
  try {
    sampler::select(entry->session, index);
  } catch (const SessionError& e) {
    return error(e.kind() == SessionError::Kind::kBadIndex ? 422 : 409, e.what());
  }
  if (!entry->session.complete) {
    try {
      sampler::continue_round(snap->model, entry->session);
    } catch (const SessionError& e) {
      if (e.kind() != SessionError::Kind::kComplete) throw;
    }
  }
  entry->updated = now_iso();
  append_log(*entry);
  return {200, resource(*entry)};
}

Response Gateway::get_session(const std::string& id) {
  const auto entry = find(id);
  if (!entry) return error(404, "unknown session " + id);
  std::lock_guard lock(entry->mu);
  return {200, resource(*entry)};
}

Response Gateway::refine(const json& req) {
  const std::string prompt = prompt_of(req);
  if (text::split_words(prompt).empty()) return error(400, "coarse_prompt must be a non-empty string");
  const auto snap = model();
  if (!snap) return error(503, "no checkpoint loaded");
  sampler::SamplingConfig cfg = options_.sampling;
  if (req.contains("config")) cfg = sampler::sampling_config_from_json(req["config"], cfg);
  if (req.contains("max_tokens")) cfg.max_tokens = req["max_tokens"].get<int>();
  if (req.contains("seed")) cfg.seed = req["seed"].get<std::uint64_t>();
  cfg.validate();
  const auto gen = sampler::generate(snap->model, prompt, cfg);
  return {200,
          {{"fine_prompt", gen.text},
           {"tokens", gen.tokens.size()},
           {"eos", gen.eos},
           {"checkpoint_hash", snap->checkpoint_hash}}};
}

std::shared_ptr<Gateway::Entry> Gateway::find(const std::string& id) const {
  std::lock_guard lock(sessions_mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

json Gateway::resource(const Entry& e) const {
  json j = sampler::session_to_json(e.session);
  j["created"] = e.created;
  j["updated"] = e.updated;
  if (options_.thumbnails) {
    const int size = options_.thumbnail_size;
    for (auto& round : j["rounds"]) {
      for (auto& c : round["candidates"]) {
        const auto image = corpus::render_prompt(c["text"].get<std::string>(), size, size);
        c["thumbnail"] = {{"width", size},
                          {"height", size},
                          {"encoding", "rgb8-base64"},
                          {"illustrative", true},
                          {"data", corpus::base64_encode(image.to_bytes())}};
      }
    }
  }
  return j;
}

void Gateway::append_log(const Entry& e) {
  if (options_.session_log.empty()) return;
  const json line = {{"session", sampler::session_to_json(e.session)}, {"created", e.created}, {"updated", e.updated}};
  std::lock_guard lock(log_mu_);
  std::ofstream out(options_.session_log, std::ios::app);
  if (!out) throw Error("cannot append to " + options_.session_log.string());
  out << line.dump() << '\n';
  out.flush();
}

void Gateway::reload_log() {
  std::ifstream in(options_.session_log);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    // A torn final line from a crash is skipped.
    if (j.is_discarded() || !j.contains("session")) continue;
    auto entry = std::make_shared<Entry>();
    entry->session = sampler::session_from_json(j["session"]);
    entry->created = j.value("created", "");
    entry->updated = j.value("updated", "");
    sessions_[entry->session.id] = entry;
  }
  next_serial_ = sessions_.size();
}

}  // namespace prefix::gateway
