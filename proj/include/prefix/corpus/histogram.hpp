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

#ifndef PREFIX_CORPUS_HISTOGRAM_HPP_
#define PREFIX_CORPUS_HISTOGRAM_HPP_

#include <cstddef>
#include <map>
#include <span>
#include <string>

namespace prefix::corpus {

// Distribution of prompt lengths in whitespace-separated words.
struct LengthHistogram {
  std::map<std::size_t, std::size_t> counts;
  std::map<std::size_t, double> normalized;

  std::size_t total() const;
  // "length,count,probability" with a header row, ascending length.
  std::string to_csv() const;
};

// Empty prompts are skipped; throws HistogramError if nothing is left.
LengthHistogram length_histogram(std::span<const std::string> prompts);

// Half the L1 distance between two normalized histograms, in [0, 1].
double total_variation(const LengthHistogram& a, const LengthHistogram& b);

std::size_t whitespace_word_count(const std::string& prompt);

}  // namespace prefix::corpus

#endif  // PREFIX_CORPUS_HISTOGRAM_HPP_
