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

#include "prefix/corpus/histogram.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "prefix/common/error.hpp"

namespace prefix::corpus {

std::size_t whitespace_word_count(const std::string& prompt) {
  std::istringstream in(prompt);
  std::size_t n = 0;
  std::string w;
  while (in >> w) ++n;
  return n;
}

std::size_t LengthHistogram::total() const {
  std::size_t t = 0;
  for (const auto& [len, c] : counts) t += c;
  return t;
}

std::string LengthHistogram::to_csv() const {
  std::string out = "length,count,probability\n";
  for (const auto& [len, c] : counts) {
    out += fmt::format("{},{},{:.17g}\n", len, c, normalized.at(len));
  }
  return out;
}

LengthHistogram length_histogram(std::span<const std::string> prompts) {
  if (prompts.empty()) throw HistogramError("no prompts");
  LengthHistogram h;
  for (const auto& p : prompts) {
    const std::size_t n = whitespace_word_count(p);
    if (n > 0) ++h.counts[n];
  }
  const std::size_t total = h.total();
  if (total == 0) throw HistogramError("every prompt is empty");
  for (const auto& [len, c] : h.counts) {
    h.normalized[len] = static_cast<double>(c) / static_cast<double>(total);
  }
  return h;
}

double total_variation(const LengthHistogram& a, const LengthHistogram& b) {
  std::set<std::size_t> keys;
  for (const auto& [k, v] : a.normalized) keys.insert(k);
  for (const auto& [k, v] : b.normalized) keys.insert(k);
  double d = 0.0;
  for (auto k : keys) {
    const double pa = a.normalized.contains(k) ? a.normalized.at(k) : 0.0;
    const double pb = b.normalized.contains(k) ? b.normalized.at(k) : 0.0;
    d += std::abs(pa - pb);
  }
  return 0.5 * d;
}

}  // namespace prefix::corpus
