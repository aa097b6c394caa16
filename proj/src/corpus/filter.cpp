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

#include "prefix/corpus/filter.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "prefix/common/error.hpp"
#include "prefix/textcore/vocabulary.hpp"

namespace prefix::corpus {

KeywordNsfwClassifier::KeywordNsfwClassifier()
    : KeywordNsfwClassifier({"nsfw", "explicit", "nude", "gore"}) {}

KeywordNsfwClassifier::KeywordNsfwClassifier(std::vector<std::string> keywords)
    : keywords_(std::move(keywords)) {}

double KeywordNsfwClassifier::score_text(std::string_view text) const {
  int hits = 0;
  for (const auto& w : text::split_words(text)) {
    hits += std::find(keywords_.begin(), keywords_.end(), w) != keywords_.end();
  }
  return hits == 0 ? 0.0 : std::min(1.0, 0.9 + 0.05 * hits);
}

double KeywordNsfwClassifier::score(const TripletRecord& record) const {
  return score_text(record.fine_prompt);
}

FilterResult filter_nsfw(std::span<const TripletRecord> records, const NsfwPlugin& classifier,
                         double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ConfigError("nsfw threshold must be in (0, 1], got " + std::to_string(threshold));
  }
  FilterResult result;
  for (const auto& r : records) {
    double s = 0.0;
    try {
      s = classifier.score(r);
    } catch (const std::exception& e) {
      result.quarantined.push_back({r, classifier.name() + " failed: " + e.what()});
      continue;
    }
    if (!(s >= 0.0 && s <= 1.0)) {
      result.quarantined.push_back({r, classifier.name() + " returned out-of-range score " + std::to_string(s)});
      continue;
    }
    TripletRecord scored = r;
    scored.nsfw_score = s;
    (s < threshold ? result.retained : result.removed).push_back(std::move(scored));
  }
  return result;
}

}  // namespace prefix::corpus
