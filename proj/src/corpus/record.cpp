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

#include "prefix/corpus/record.hpp"

#include <filesystem>

#include "prefix/common/error.hpp"
#include "prefix/corpus/toy_world.hpp"
#include "prefix/textcore/vocabulary.hpp"

namespace prefix::corpus {

std::string_view bucket_name(Bucket b) {
  switch (b) {
    case Bucket::kShort:
      return "short";
    case Bucket::kMedium:
      return "medium";
    case Bucket::kLong:
      return "long";
  }
  return "?";
}

std::optional<Bucket> parse_bucket(std::string_view name) {
  for (Bucket b : kBuckets) {
    if (bucket_name(b) == name) return b;
  }
  return std::nullopt;
}

void GenerationParams::validate() const {
  if (step <= 0) throw RecordError("gen_params.step must be positive");
  if (height <= 0 || width <= 0) throw RecordError("gen_params height/width must be positive");
  if (height % kVaeFactor != 0 || width % kVaeFactor != 0) {
    throw RecordError("gen_params height/width must be divisible by " + std::to_string(kVaeFactor));
  }
}

bool bucket_ok(Bucket b, std::string_view fine_prompt, std::string_view coarse_prompt) {
  const auto fine_words = text::split_words(fine_prompt);
  const auto coarse_words = text::split_words(coarse_prompt);
  const BucketRange r = bucket_range(b);
  if (fine_words.size() < r.floor) return coarse_words == fine_words;
  return coarse_words.size() >= r.floor && coarse_words.size() <= r.cap;
}

void validate_record(const TripletRecord& record) {
  if (record.id.empty()) throw RecordError("record without id");
  if (!(record.nsfw_score >= 0.0 && record.nsfw_score <= 1.0)) {
    throw RecordError(record.id + ": nsfw_score outside [0, 1]");
  }
  for (Bucket b : kBuckets) {
    auto it = record.coarse_prompts.find(b);
    if (it == record.coarse_prompts.end()) {
      throw RecordError(record.id + ": missing coarse prompt '" + std::string(bucket_name(b)) + "'");
    }
    if (!bucket_ok(b, record.fine_prompt, it->second)) {
      throw RecordError(record.id + ": coarse prompt '" + std::string(bucket_name(b)) +
                        "' violates its token range");
    }
  }
  record.gen_params.validate();
}

const std::string& select_coarse(const TripletRecord& record, Bucket bucket) {
  auto it = record.coarse_prompts.find(bucket);
  if (it == record.coarse_prompts.end()) {
    throw RecordError(record.id + ": missing coarse prompt '" + std::string(bucket_name(bucket)) + "'");
  }
  return it->second;
}

const std::string& select_coarse(const TripletRecord& record, Rng& rng) {
  for (Bucket b : kBuckets) {
    if (!record.coarse_prompts.contains(b)) {
      throw RecordError(record.id + ": missing coarse prompt '" + std::string(bucket_name(b)) + "'");
    }
  }
  return select_coarse(record, kBuckets[rng.index(kBuckets.size())]);
}

std::string inline_image_ref(const Image& image) { return "inline:" + base64_encode(image.to_bytes()); }

Image resolve_image(const TripletRecord& record, const std::string& base_dir) {
  const auto& ref = record.image_ref;
  const int h = record.gen_params.height;
  const int w = record.gen_params.width;
  if (ref.starts_with("inline:")) {
    const auto bytes = base64_decode(std::string_view(ref).substr(7));
    return Image::from_bytes(h, w, bytes);
  }
  if (ref == "toy:" || ref.empty()) return render_prompt(record.fine_prompt, h, w);
  std::filesystem::path p(ref);
  if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
  return read_ppm(p);
}

}  // namespace prefix::corpus
