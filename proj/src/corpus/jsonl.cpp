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

#include "prefix/corpus/jsonl.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "prefix/common/error.hpp"

namespace prefix::corpus {

using json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 6> kKnownFields = {"id",        "fine_prompt", "coarse_prompts",
                                                          "image_ref", "nsfw_score",  "gen_params"};

const json& field(const json& obj, const std::string& name, const std::string& path, std::size_t line) {
  auto it = obj.find(name);
  if (it == obj.end()) throw SchemaError("missing field '" + path + name + "'", line, path + name);
  return *it;
}

std::string get_string(const json& obj, const std::string& name, const std::string& path,
                       std::size_t line) {
  const json& v = field(obj, name, path, line);
  if (!v.is_string()) throw SchemaError("field '" + path + name + "' must be a string", line, path + name);
  return v.get<std::string>();
}

double get_number(const json& obj, const std::string& name, const std::string& path, std::size_t line) {
  const json& v = field(obj, name, path, line);
  if (!v.is_number()) throw SchemaError("field '" + path + name + "' must be a number", line, path + name);
  return v.get<double>();
}

std::int64_t get_int(const json& obj, const std::string& name, const std::string& path,
                     std::size_t line) {
  const json& v = field(obj, name, path, line);
  if (!v.is_number_integer()) {
    throw SchemaError("field '" + path + name + "' must be an integer", line, path + name);
  }
  return v.get<std::int64_t>();
}

}  // namespace

json record_to_json(const TripletRecord& r) {
  json j;
  j["id"] = r.id;
  j["fine_prompt"] = r.fine_prompt;
  json coarse = json::object();
  for (Bucket b : kBuckets) {
    auto it = r.coarse_prompts.find(b);
    if (it != r.coarse_prompts.end()) coarse[std::string(bucket_name(b))] = it->second;
  }
  j["coarse_prompts"] = std::move(coarse);
  j["image_ref"] = r.image_ref;
  j["nsfw_score"] = r.nsfw_score;
  j["gen_params"] = json{{"step", r.gen_params.step},     {"seed", r.gen_params.seed},
                         {"height", r.gen_params.height}, {"width", r.gen_params.width},
                         {"cfg_scale", r.gen_params.cfg_scale}, {"sampler", r.gen_params.sampler}};
  for (const auto& [k, v] : r.extra.items()) j[k] = v;
  return j;
}

TripletRecord record_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw SchemaError("record must be a JSON object", line);
  TripletRecord r;
  r.id = get_string(j, "id", "", line);
  r.fine_prompt = get_string(j, "fine_prompt", "", line);
  const json& coarse = field(j, "coarse_prompts", "", line);
  if (!coarse.is_object()) throw SchemaError("field 'coarse_prompts' must be an object", line, "coarse_prompts");
  for (Bucket b : kBuckets) {
    const std::string name(bucket_name(b));
    r.coarse_prompts[b] = get_string(coarse, name, "coarse_prompts.", line);
  }
  r.image_ref = get_string(j, "image_ref", "", line);
  r.nsfw_score = get_number(j, "nsfw_score", "", line);
  const json& gp = field(j, "gen_params", "", line);
  if (!gp.is_object()) throw SchemaError("field 'gen_params' must be an object", line, "gen_params");
  r.gen_params.step = get_int(gp, "step", "gen_params.", line);
  r.gen_params.seed = get_int(gp, "seed", "gen_params.", line);
  r.gen_params.height = static_cast<int>(get_int(gp, "height", "gen_params.", line));
  r.gen_params.width = static_cast<int>(get_int(gp, "width", "gen_params.", line));
  r.gen_params.cfg_scale = get_number(gp, "cfg_scale", "gen_params.", line);
  r.gen_params.sampler = get_string(gp, "sampler", "gen_params.", line);
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (auto f : kKnownFields) known = known || k == f;
    if (!known) r.extra[k] = v;
  }
  return r;
}

std::string to_jsonl(std::span<const TripletRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r).dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<TripletRecord> parse_jsonl(std::istream& in) {
  std::vector<TripletRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    out.push_back(record_from_json(j, lineno));
  }
  return out;
}

std::vector<TripletRecord> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + path.string());
  return parse_jsonl(in);
}

void store_jsonl(std::span<const TripletRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_jsonl(records);
}

}  // namespace prefix::corpus
