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

#include "prefix/corpus/split.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "prefix/common/error.hpp"

namespace prefix::corpus {

CorpusSplit split_ids(std::span<const std::string> ids, std::uint64_t seed, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw SplitError("split ratio must be in (0, 1)");
  if (ids.size() < 2) throw SplitError("need at least two records to split");
  std::vector<std::string> order(ids.begin(), ids.end());
  std::sort(order.begin(), order.end());
  if (std::adjacent_find(order.begin(), order.end()) != order.end()) {
    throw SplitError("duplicate record ids");
  }
  Rng rng(derive_seed(seed, {0x53504c4954ULL}));
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[rng.index(i + 1)]);
  }
  const auto n_train =
      static_cast<std::size_t>(std::llround(ratio * static_cast<double>(order.size())));
  CorpusSplit out;
  out.seed = seed;
  out.ratio = ratio;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

CorpusSplit split(std::span<const TripletRecord> records, std::uint64_t seed, double ratio) {
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.id);
  return split_ids(ids, seed, ratio);
}

std::vector<TripletRecord> select_records(std::span<const TripletRecord> records,
                                          std::span<const std::string> ids) {
  std::unordered_map<std::string, const TripletRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.id, &r);
  std::vector<TripletRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw SplitError("unknown record id " + id);
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace prefix::corpus
