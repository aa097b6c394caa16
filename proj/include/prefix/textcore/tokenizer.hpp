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

#ifndef PREFIX_TEXTCORE_TOKENIZER_HPP_
#define PREFIX_TEXTCORE_TOKENIZER_HPP_

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefix/autograd/tensor.hpp"
#include "prefix/textcore/vocabulary.hpp"

namespace prefix::text {

// Token ids plus a validity mask; padding only follows the last real token.
struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<bool> mask;

  std::size_t size() const { return ids.size(); }
  std::size_t real_length() const;
  // The real (unpadded) ids.
  std::vector<TokenId> real_ids() const;
  // Appends pad tokens up to length.
  TokenSequence padded_to(std::size_t length) const;
  void validate() const;

  bool operator==(const TokenSequence&) const = default;
};

TokenSequence make_sequence(std::vector<TokenId> ids);

// Words not in the vocabulary map to kUnk.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab);
// Wraps the tokens in <bos> ... <eos>.
TokenSequence tokenize_target(std::string_view text, const Vocabulary& vocab);

// Real tokens back to canonical text; <pad>, <bos> and <eos> are skipped.
std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab);
std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab);

// |V| x d_emb lookup table.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(ag::Tensor table);

  // row i of the result is table[ids[i]]; throws IndexError for ids >= |V|.
  ag::Tensor lookup(std::span<const TokenId> ids) const;
  ag::Tensor lookup(const TokenSequence& seq) const { return lookup(seq.ids); }

  const ag::Tensor& table() const { return table_; }
  int vocab_size() const { return static_cast<int>(table_.rows()); }
  int width() const { return static_cast<int>(table_.cols()); }

 private:
  ag::Tensor table_;
};

}  // namespace prefix::text

#endif  // PREFIX_TEXTCORE_TOKENIZER_HPP_
