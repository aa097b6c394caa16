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

#ifndef PREFIX_CORPUS_SUMMARIZER_HPP_
#define PREFIX_CORPUS_SUMMARIZER_HPP_

#include <map>
#include <string>
#include <string_view>

#include "prefix/corpus/record.hpp"

namespace prefix::corpus {

// Produces a coarse prompt for one bucket. Abstractive models plug in here.
class SummarizerPlugin {
 public:
  virtual ~SummarizerPlugin() = default;
  virtual std::string name() const = 0;
  virtual std::string summarize(std::string_view fine_prompt, BucketRange range) const = 0;
};

// Keeps content words in document order, backfilling with stop words and
// then punctuation when a bucket floor is not met, and truncates to the
// bucket cap. Prompts shorter than the floor come back whole.
class ExtractiveSummarizer final : public SummarizerPlugin {
 public:
  std::string name() const override { return "extractive"; }
  std::string summarize(std::string_view fine_prompt, BucketRange range) const override;

  static bool is_stop_word(std::string_view word);
};

const SummarizerPlugin& default_summarizer();

// Throws RecordError if the prompt has no tokens or the plugin breaks a
// bucket's range.
std::map<Bucket, std::string> summarize_to_buckets(std::string_view fine_prompt,
                                                   const SummarizerPlugin& summarizer = default_summarizer());

}  // namespace prefix::corpus

#endif  // PREFIX_CORPUS_SUMMARIZER_HPP_
