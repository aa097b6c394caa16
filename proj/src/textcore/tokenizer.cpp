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

#include "prefix/textcore/tokenizer.hpp"

#include "prefix/autograd/ops.hpp"
#include "prefix/common/error.hpp"

namespace prefix::text {

std::size_t TokenSequence::real_length() const {
  std::size_t n = 0;
  while (n < mask.size() && mask[n]) ++n;
  return n;
}

std::vector<TokenId> TokenSequence::real_ids() const {
  return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(real_length())};
}

TokenSequence TokenSequence::padded_to(std::size_t length) const {
  TokenSequence out = *this;
  while (out.ids.size() < length) {
    out.ids.push_back(kPad);
    out.mask.push_back(false);
  }
  return out;
}

void TokenSequence::validate() const {
  if (ids.size() != mask.size()) throw ShapeError("token sequence: ids and mask differ in length");
  const std::size_t real = real_length();
  for (std::size_t i = real; i < mask.size(); ++i) {
    if (mask[i]) throw ShapeError("token sequence: real token after padding");
  }
}

TokenSequence make_sequence(std::vector<TokenId> ids) {
  TokenSequence s;
  s.mask.assign(ids.size(), true);
  s.ids = std::move(ids);
  return s;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(text)) ids.push_back(vocab.id(w));
  return make_sequence(std::move(ids));
}

TokenSequence tokenize_target(std::string_view text, const Vocabulary& vocab) {
  std::vector<TokenId> ids{kBos};
  for (const auto& w : split_words(text)) ids.push_back(vocab.id(w));
  ids.push_back(kEos);
  return make_sequence(std::move(ids));
}

std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::vector<std::string> words;
  for (TokenId id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    words.push_back(vocab.token(id));
  }
  return join_words(words);
}

std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab) {
  return detokenize(seq.real_ids(), vocab);
}

EmbeddingTable::EmbeddingTable(ag::Tensor table) : table_(std::move(table)) {
  if (!table_.value().allFinite()) throw ShapeError("embedding table has non-finite entries");
}

ag::Tensor EmbeddingTable::lookup(std::span<const TokenId> ids) const {
  return ag::gather_rows(table_, ids);
}

}  // namespace prefix::text
