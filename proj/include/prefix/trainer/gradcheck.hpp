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

#ifndef PREFIX_TRAINER_GRADCHECK_HPP_
#define PREFIX_TRAINER_GRADCHECK_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "prefix/corpus/record.hpp"
#include "prefix/trainer/model.hpp"
#include "prefix/trainer/train.hpp"

namespace prefix::trainer {

enum class LossTerm { kMse, kSft, kClip };

std::string_view loss_term_name(LossTerm term);
std::optional<LossTerm> parse_loss_term(std::string_view name);

struct GradCheckReport {
  LossTerm term = LossTerm::kSft;
  double loss = 0.0;
  // |analytic - numeric| / max(|analytic|, |numeric|, 1e-6), worst scalar
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

// Central differences with step h over every scalar of the blocks the term
// depends on.
GradCheckReport grad_check(const Model& model, std::span<const corpus::TripletRecord> batch, LossTerm term,
                           const TrainConfig& cfg, double h = 1e-5);

// Tiny model and a three-record toy batch.
GradCheckReport grad_check(LossTerm term, std::uint64_t seed = 0, double h = 1e-5);

}  // namespace prefix::trainer

#endif  // PREFIX_TRAINER_GRADCHECK_HPP_
