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

#ifndef PREFIX_TEXTCORE_VOCABULARY_HPP_
#define PREFIX_TEXTCORE_VOCABULARY_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace prefix::text {

using TokenId = int;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr int kNumSpecial = 4;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kBosToken = "<bos>";
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kUnkToken = "<unk>";

// Splits text into lowercase word tokens. Runs of letters, digits, '\'' and
// '-' form a word; every other non-space character is its own token.
std::vector<std::string> split_words(std::string_view text);

// Number of tokens split_words() produces.
std::size_t token_count(std::string_view text);

// Joins word tokens with single spaces, attaching closing punctuation to the
// previous token.
std::string join_words(std::span<const std::string> words);

bool is_punctuation(std::string_view token);

// Word-level vocabulary. Ids 0-3 are <pad>, <bos>, <eos>, <unk>; the rest
// are corpus words in first-seen order.
class Vocabulary {
 public:
  Vocabulary();

  // Adds every word of every text, in order of first appearance.
  static Vocabulary build(std::span<const std::string> texts);
  static Vocabulary from_tokens(std::span<const std::string> tokens);

  // One token per line, line number = id; the first four lines are the
  // special tokens.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::string serialize() const;

  TokenId add(std::string_view token);
  TokenId id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // FNV-1a over serialize(); checkpoints use it to reject mismatched
  // vocabularies.
  std::uint64_t hash() const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace prefix::text

#endif  // PREFIX_TEXTCORE_VOCABULARY_HPP_
