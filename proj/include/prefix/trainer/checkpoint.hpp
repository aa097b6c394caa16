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

// Checkpoint file: 8-byte magic, little-endian u64 header length, a JSON
// header (configs, vocabulary, step, loss history, tensor table), then raw
// little-endian doubles for every tensor in table order.

#ifndef PREFIX_TRAINER_CHECKPOINT_HPP_
#define PREFIX_TRAINER_CHECKPOINT_HPP_

#include <filesystem>
#include <string>

#include "prefix/textcore/vocabulary.hpp"
#include "prefix/trainer/model.hpp"
#include "prefix/trainer/train.hpp"

namespace prefix::trainer {

// Parameters, optimizer moments, step and loss history.
void save_checkpoint(const std::filesystem::path& path, const Trainer& trainer);
// Parameters only.
void save_model(const std::filesystem::path& path, const Model& model);

// Throws CheckpointError on a malformed file or, when expected is given, on
// a vocabulary whose hash differs from the checkpoint's.
Model load_model(const std::filesystem::path& path, const text::Vocabulary* expected = nullptr);
// Restores a trainer exactly; needs a file written by save_checkpoint.
Trainer load_trainer(const std::filesystem::path& path);

std::string vocab_hash_hex(const text::Vocabulary& vocab);

}  // namespace prefix::trainer

#endif  // PREFIX_TRAINER_CHECKPOINT_HPP_
