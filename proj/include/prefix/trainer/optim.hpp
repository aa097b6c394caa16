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

#ifndef PREFIX_TRAINER_OPTIM_HPP_
#define PREFIX_TRAINER_OPTIM_HPP_

#include <cstdint>
#include <vector>

#include "prefix/nn/layers.hpp"

namespace prefix::trainer {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  bool operator==(const AdamWConfig&) const = default;
};

// Adam with decoupled weight decay. Parameters that received no gradient
// in a step are left untouched.
class AdamW {
 public:
  AdamW() = default;
  AdamW(nn::ParamList params, double learning_rate, AdamWConfig config = {});

  void step();
  void zero_grad();

  const nn::ParamList& params() const { return params_; }
  double learning_rate() const { return lr_; }
  std::int64_t t() const { return t_; }

  // Moment state, in parameter order, for checkpointing.
  std::vector<ag::Matrix>& first_moments() { return m_; }
  std::vector<ag::Matrix>& second_moments() { return v_; }
  const std::vector<ag::Matrix>& first_moments() const { return m_; }
  const std::vector<ag::Matrix>& second_moments() const { return v_; }
  void set_t(std::int64_t t) { t_ = t; }

 private:
  nn::ParamList params_;
  double lr_ = 0.0;
  AdamWConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<ag::Matrix> m_, v_;
};

}  // namespace prefix::trainer

#endif  // PREFIX_TRAINER_OPTIM_HPP_
