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

#include "prefix/trainer/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "prefix/common/error.hpp"
#include "prefix/corpus/toy_world.hpp"

namespace prefix::trainer {

namespace {

std::set<Block> path_blocks(LossTerm term) {
  switch (term) {
    case LossTerm::kMse: return {Block::kTextEncoder, Block::kDenoiser, Block::kVae};
    case LossTerm::kSft: return {Block::kTextEncoder, Block::kAdapter, Block::kDecoder};
    case LossTerm::kClip: return {Block::kTextEncoder, Block::kImageEncoder, Block::kAfem};
  }
  return {};
}

const ag::Tensor& pick(const BatchLosses& l, LossTerm term) {
  switch (term) {
    case LossTerm::kMse: return l.mse;
    case LossTerm::kSft: return l.sft;
    case LossTerm::kClip: return l.clip;
  }
  return l.sft;
}

}  // namespace

std::string_view loss_term_name(LossTerm term) {
  switch (term) {
    case LossTerm::kMse: return "mse";
    case LossTerm::kSft: return "sft";
    case LossTerm::kClip: return "clip";
  }
  return "?";
}

std::optional<LossTerm> parse_loss_term(std::string_view name) {
  for (LossTerm t : {LossTerm::kMse, LossTerm::kSft, LossTerm::kClip}) {
    if (name == loss_term_name(t)) return t;
  }
  return std::nullopt;
}

GradCheckReport grad_check(const Model& source, std::span<const corpus::TripletRecord> batch, LossTerm term,
                           const TrainConfig& base_cfg, double h) {
  TrainConfig cfg = base_cfg;
  cfg.use_mse = term == LossTerm::kMse;
  cfg.use_clip = term == LossTerm::kClip;

  Model model = source.clone();
  const std::set<Block> blocks = path_blocks(term);
  model.set_trainable(blocks);

  std::vector<PreparedRecord> prepared;
  for (const auto& r : batch) prepared.push_back(prepare_record(model, r));

  const BatchLosses losses = compute_losses(model, batch, prepared, cfg, 0);
  const ag::Tensor& loss = pick(losses, term);
  ag::backward(loss);

  GradCheckReport report;
  report.term = term;
  report.loss = loss.item();
  ag::NoGradGuard no_grad;
  for (Block b : kAllBlocks) {
    if (!blocks.contains(b)) continue;
    for (auto& p : model.parameters(b)) {
      const ag::Matrix analytic = p.tensor.has_grad() ? p.tensor.grad()
                                                      : ag::Matrix::Zero(p.tensor.rows(), p.tensor.cols());
      ag::Matrix& w = p.tensor.mutable_value();
      for (ag::Index i = 0; i < w.size(); ++i) {
        const double saved = w.data()[i];
        w.data()[i] = saved + h;
        const double up = pick(compute_losses(model, batch, prepared, cfg, 0), term).item();
        w.data()[i] = saved - h;
        const double down = pick(compute_losses(model, batch, prepared, cfg, 0), term).item();
        w.data()[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic.data()[i];
        const double abs_err = std::abs(a - numeric);
        const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), 1e-6});
        report.max_abs_error = std::max(report.max_abs_error, abs_err);
        if (rel > report.max_rel_error || report.checked == 0) {
          report.max_rel_error = rel;
          report.worst_parameter = p.name + "[" + std::to_string(i) + "]";
        }
        ++report.checked;
      }
    }
  }
  return report;
}

GradCheckReport grad_check(LossTerm term, std::uint64_t seed, double h) {
  corpus::ToyWorldOptions opts;
  opts.height = 16;
  opts.width = 16;
  opts.nsfw_rate = 0.0;
  const auto records = corpus::generate_toy_world(3, seed, opts);
  std::vector<std::string> texts;
  for (const auto& r : records) texts.push_back(r.fine_prompt);
  ModelConfig mc = ModelConfig::tiny();
  mc.seed = seed;
  const Model model(mc, text::Vocabulary::build(texts));
  TrainConfig cfg;
  cfg.seed = seed;
  return grad_check(model, records, term, cfg, h);
}

}  // namespace prefix::trainer
