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

#include "prefix/corpus/summarizer.hpp"

#include <algorithm>
#include <array>
#include <vector>

#include "prefix/common/error.hpp"
#include "prefix/textcore/vocabulary.hpp"

namespace prefix::corpus {

namespace {

constexpr std::array<std::string_view, 30> kStopWords = {
    "a",    "an",   "the",  "of",   "on",   "in",    "at",   "to",   "with", "and",
    "or",   "by",   "for",  "from", "is",   "are",   "as",   "into", "over", "under",
    "near", "next", "this", "that", "its",  "it",    "be",   "very", "some", "their"};

// Lower is kept first.
int retention_class(const std::string& word) {
  if (text::is_punctuation(word)) return 2;
  return ExtractiveSummarizer::is_stop_word(word) ? 1 : 0;
}

}  // namespace

bool ExtractiveSummarizer::is_stop_word(std::string_view word) {
  return std::find(kStopWords.begin(), kStopWords.end(), word) != kStopWords.end();
}

std::string ExtractiveSummarizer::summarize(std::string_view fine_prompt, BucketRange range) const {
  const auto words = text::split_words(fine_prompt);
  if (words.size() < range.floor) return text::join_words(words);
  std::size_t content = 0;
  for (const auto& w : words) content += retention_class(w) == 0;
  const std::size_t target = std::clamp(content, range.floor, range.cap);

  std::vector<bool> keep(words.size(), false);
  std::size_t kept = 0;
  for (int cls = 0; cls <= 2 && kept < target; ++cls) {
    for (std::size_t i = 0; i < words.size() && kept < target; ++i) {
      if (!keep[i] && retention_class(words[i]) == cls) {
        keep[i] = true;
        ++kept;
      }
    }
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (keep[i]) out.push_back(words[i]);
  }
  return text::join_words(out);
}

const SummarizerPlugin& default_summarizer() {
  static const ExtractiveSummarizer instance;
  return instance;
}

std::map<Bucket, std::string> summarize_to_buckets(std::string_view fine_prompt,
                                                   const SummarizerPlugin& summarizer) {
  if (text::token_count(fine_prompt) == 0) {
    throw RecordError("fine prompt is empty after tokenization");
  }
  std::map<Bucket, std::string> out;
  for (Bucket b : kBuckets) {
    std::string coarse = summarizer.summarize(fine_prompt, bucket_range(b));
    if (!bucket_ok(b, fine_prompt, coarse)) {
      throw RecordError(summarizer.name() + " summarizer produced an out-of-range '" +
                        std::string(bucket_name(b)) + "' prompt");
    }
    out.emplace(b, std::move(coarse));
  }
  return out;
}

}  // namespace prefix::corpus
