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

#ifndef PREFIX_CORPUS_FILTER_HPP_
#define PREFIX_CORPUS_FILTER_HPP_

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefix/corpus/record.hpp"

namespace prefix::corpus {

inline constexpr double kDefaultNsfwThreshold = 0.9;

// Scores a fine prompt in [0, 1]. May throw; the filter quarantines the
// record in that case.
class NsfwPlugin {
 public:
  virtual ~NsfwPlugin() = default;
  virtual std::string name() const = 0;
  virtual double score(const TripletRecord& record) const = 0;
};

// 0 without flagged words, else min(1, 0.9 + 0.05 * hits).
class KeywordNsfwClassifier final : public NsfwPlugin {
 public:
  KeywordNsfwClassifier();
  explicit KeywordNsfwClassifier(std::vector<std::string> keywords);
  std::string name() const override { return "keyword"; }
  double score(const TripletRecord& record) const override;
  double score_text(std::string_view text) const;

 private:
  std::vector<std::string> keywords_;
};

// Replays the score already stored on the record.
class StoredScoreClassifier final : public NsfwPlugin {
 public:
  std::string name() const override { return "stored"; }
  double score(const TripletRecord& record) const override { return record.nsfw_score; }
};

struct QuarantinedRecord {
  TripletRecord record;
  std::string reason;
};

struct FilterResult {
  std::vector<TripletRecord> retained;  // score < threshold, scores written back
  std::vector<TripletRecord> removed;
  std::vector<QuarantinedRecord> quarantined;
};

// Keeps records scoring strictly below the threshold. threshold must be in
// (0, 1].
FilterResult filter_nsfw(std::span<const TripletRecord> records, const NsfwPlugin& classifier,
                         double threshold = kDefaultNsfwThreshold);

}  // namespace prefix::corpus

#endif  // PREFIX_CORPUS_FILTER_HPP_
