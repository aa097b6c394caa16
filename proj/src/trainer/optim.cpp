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

#include "prefix/trainer/optim.hpp"

#include <cmath>

#include "prefix/common/error.hpp"

namespace prefix::trainer {

AdamW::AdamW(nn::ParamList params, double learning_rate, AdamWConfig config)
    : params_(std::move(params)), lr_(learning_rate), cfg_(config) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  for (const auto& p : params_) {
    m_.push_back(ag::Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
    v_.push_back(ag::Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
  }
}

void AdamW::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ag::Tensor p = params_[i].tensor;
    if (!p.has_grad()) continue;
    const ag::Matrix& g = p.grad();
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    ag::Matrix& w = p.mutable_value();
    w -= lr_ * cfg_.weight_decay * w;
    w.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) {
    ag::Tensor t = p.tensor;
    t.zero_grad();
  }
}

}  // namespace prefix::trainer
