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

#ifndef PREFIX_CORPUS_RECORD_HPP_
#define PREFIX_CORPUS_RECORD_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "prefix/common/rng.hpp"
#include "prefix/corpus/image.hpp"

namespace prefix::corpus {

enum class Bucket { kShort = 0, kMedium = 1, kLong = 2 };

inline constexpr std::array<Bucket, 3> kBuckets = {Bucket::kShort, Bucket::kMedium, Bucket::kLong};

struct BucketRange {
  std::size_t floor;
  std::size_t cap;
};

// Coarse prompt token ranges: 1-5, 6-10 and 11-15 tokens.
constexpr BucketRange bucket_range(Bucket b) {
  switch (b) {
    case Bucket::kShort:
      return {1, 5};
    case Bucket::kMedium:
      return {6, 10};
    case Bucket::kLong:
      return {11, 15};
  }
  return {0, 0};
}

std::string_view bucket_name(Bucket b);
std::optional<Bucket> parse_bucket(std::string_view name);

// Pixel size covered by one latent cell.
inline constexpr int kVaeFactor = 8;

struct GenerationParams {
  std::int64_t step = 50;
  std::int64_t seed = 0;
  int height = 32;
  int width = 32;
  double cfg_scale = 7.0;
  std::string sampler = "ddpm";

  void validate() const;
  bool operator==(const GenerationParams&) const = default;
};

// One coarse/fine/image triplet.
struct TripletRecord {
  std::string id;
  std::string fine_prompt;
  std::map<Bucket, std::string> coarse_prompts;
  // "inline:<base64 rgb bytes>", "toy:" (render from fine_prompt), or a PPM path.
  std::string image_ref;
  double nsfw_score = 0.0;
  GenerationParams gen_params;
  // Unrecognized top-level JSONL fields, kept for round trips.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  bool operator==(const TripletRecord&) const = default;
};

// Throws RecordError when a bucket, score or generation parameter is out of
// contract.
void validate_record(const TripletRecord& record);

// Bucket invariant for a single coarse prompt.
bool bucket_ok(Bucket b, std::string_view fine_prompt, std::string_view coarse_prompt);

// Random coarse prompt, buckets drawn uniformly.
const std::string& select_coarse(const TripletRecord& record, Rng& rng);
const std::string& select_coarse(const TripletRecord& record, Bucket bucket);

// Decodes the record's raster. Relative paths resolve against base_dir.
Image resolve_image(const TripletRecord& record, const std::string& base_dir = ".");
std::string inline_image_ref(const Image& image);

}  // namespace prefix::corpus

#endif  // PREFIX_CORPUS_RECORD_HPP_
