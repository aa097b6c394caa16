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

#ifndef PREFIX_CORPUS_JSONL_HPP_
#define PREFIX_CORPUS_JSONL_HPP_

#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefix/corpus/record.hpp"

namespace prefix::corpus {

// {"id", "fine_prompt", "coarse_prompts": {"short", "medium", "long"},
//  "image_ref", "nsfw_score", "gen_params": {"step", "seed", "height",
//  "width", "cfg_scale", "sampler"}} followed by any unknown fields.
nlohmann::ordered_json record_to_json(const TripletRecord& record);
// Throws SchemaError naming the missing or mistyped field.
TripletRecord record_from_json(const nlohmann::ordered_json& j, std::size_t line = 0);

std::string to_jsonl(std::span<const TripletRecord> records);
std::vector<TripletRecord> parse_jsonl(std::istream& in);

std::vector<TripletRecord> load_jsonl(const std::filesystem::path& path);
void store_jsonl(std::span<const TripletRecord> records, const std::filesystem::path& path);

}  // namespace prefix::corpus

#endif  // PREFIX_CORPUS_JSONL_HPP_
