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

#ifndef PREFIX_CORPUS_SPLIT_HPP_
#define PREFIX_CORPUS_SPLIT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prefix/corpus/record.hpp"

namespace prefix::corpus {

// 73,718 train instances out of 81,910.
inline constexpr double kDefaultTrainRatio = 73718.0 / 81910.0;

struct CorpusSplit {
  std::vector<std::string> train;  // sorted by id
  std::vector<std::string> test;   // sorted by id
  std::uint64_t seed = 0;
  double ratio = kDefaultTrainRatio;
};

// Seeded uniform split with |train| = round(ratio * N). The result depends
// only on the id set, the seed and the ratio, not on input order.
CorpusSplit split_ids(std::span<const std::string> ids, std::uint64_t seed, double ratio);
CorpusSplit split(std::span<const TripletRecord> records, std::uint64_t seed, double ratio);

// Records whose ids are listed, in list order.
std::vector<TripletRecord> select_records(std::span<const TripletRecord> records,
                                          std::span<const std::string> ids);

}  // namespace prefix::corpus

#endif  // PREFIX_CORPUS_SPLIT_HPP_
