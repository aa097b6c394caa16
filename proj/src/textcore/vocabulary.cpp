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

#include "prefix/textcore/vocabulary.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "prefix/common/error.hpp"
#include "prefix/common/rng.hpp"

namespace prefix::text {

namespace {

bool is_word_char(unsigned char c) {
  return std::isalnum(c) || c == '\'' || c == '-' || c >= 0x80;
}

bool attaches_left(std::string_view token) {
  static constexpr std::array<std::string_view, 9> kClosing = {",", ".", ";", ":", "!",
                                                               "?", ")", "]", "}"};
  for (auto c : kClosing) {
    if (token == c) return true;
  }
  return false;
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
      continue;
    }
    if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
    if (!std::isspace(c)) out.emplace_back(1, ch);
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::size_t token_count(std::string_view text) { return split_words(text).size(); }

bool is_punctuation(std::string_view token) {
  return token.size() == 1 && !is_word_char(static_cast<unsigned char>(token[0]));
}

std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty() && !attaches_left(w)) out.push_back(' ');
    out += w;
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (auto t : {kPadToken, kBosToken, kEosToken, kUnkToken}) add(t);
}

Vocabulary Vocabulary::build(std::span<const std::string> texts) {
  Vocabulary v;
  for (const auto& t : texts) {
    for (const auto& w : split_words(t)) v.add(w);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens) {
  if (tokens.size() < kNumSpecial || tokens[0] != kPadToken || tokens[1] != kBosToken ||
      tokens[2] != kEosToken || tokens[3] != kUnkToken) {
    throw SchemaError("vocabulary must start with <pad>, <bos>, <eos>, <unk>");
  }
  Vocabulary v;
  for (std::size_t i = kNumSpecial; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) {
      throw SchemaError("duplicate vocabulary token '" + tokens[i] + "'", i + 1);
    }
    v.add(tokens[i]);
  }
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open vocabulary file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(tokens);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot write vocabulary file " + path.string());
  out << serialize();
}

std::string Vocabulary::serialize() const {
  std::string s;
  for (const auto& t : tokens_) {
    s += t;
    s.push_back('\n');
  }
  return s;
}

TokenId Vocabulary::add(std::string_view token) {
  auto it = index_.find(std::string(token));
  if (it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(token);
  index_.emplace(tokens_.back(), id);
  return id;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || id >= size()) throw IndexError("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::hash() const { return fnv1a(serialize()); }

}  // namespace prefix::text
