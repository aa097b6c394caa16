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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <vector>

#include "prefix/common/error.hpp"
#include "prefix/trainer/checkpoint.hpp"
#include "prefix/trainer/gradcheck.hpp"
#include "prefix/trainer/optim.hpp"
#include "prefix/trainer/train.hpp"
#include "support/fixtures.hpp"

namespace prefix::trainer {
namespace {

std::vector<ag::Matrix> snapshot(const nn::ParamList& params) {
  std::vector<ag::Matrix> out;
  for (const auto& p : params) out.push_back(p.tensor.value());
  return out;
}

TrainConfig small_train_config() {
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.epochs = 2;
  cfg.learning_rate = 1e-3;
  cfg.seed = 3;
  return cfg;
}

TEST(TotalLoss, WeightedSumAndAblations) {
  TrainConfig cfg;
  EXPECT_DOUBLE_EQ(total_loss(1, 2, 3, cfg), 1.5);
  cfg.use_mse = false;
  EXPECT_NEAR(total_loss(1, 2, 3, cfg), 0.5, 1e-15);
  cfg.use_mse = true;
  cfg.use_clip = false;
  EXPECT_NEAR(total_loss(1, 2, 3, cfg), 1.2, 1e-15);
  cfg.use_mse = false;
  EXPECT_NEAR(total_loss(1, 2, 3, cfg), 0.2, 1e-15);
}

TEST(TotalLoss, NonFiniteDiverges) {
  const TrainConfig cfg;
  EXPECT_THROW(total_loss(std::numeric_limits<double>::quiet_NaN(), 0, 0, cfg), TrainingDivergence);
  EXPECT_THROW(total_loss(0, std::numeric_limits<double>::infinity(), 0, cfg), TrainingDivergence);
  TrainConfig no_clip = cfg;
  no_clip.use_clip = false;
  EXPECT_NO_THROW(total_loss(0, 0, std::numeric_limits<double>::quiet_NaN(), no_clip));
}

TEST(ComputeLosses, DisabledTermsAreNotComputed) {
  const auto records = testing::toy_records(4, 1);
  const Model model = testing::tiny_model(records);
  std::vector<PreparedRecord> prepared;
  for (const auto& r : records) prepared.push_back(prepare_record(model, r));
  TrainConfig cfg;
  const auto full = compute_losses(model, records, prepared, cfg, 0);
  EXPECT_NEAR(full.values.total, total_loss(full.values.mse, full.values.sft, full.values.clip, cfg), 1e-12);
  cfg.use_mse = false;
  cfg.use_clip = false;
  const auto sft_only = compute_losses(model, records, prepared, cfg, 0);
  EXPECT_FALSE(sft_only.mse.defined());
  EXPECT_FALSE(sft_only.clip.defined());
  EXPECT_NEAR(sft_only.values.sft, full.values.sft, 1e-12);
  EXPECT_NEAR(sft_only.values.total, 0.1 * full.values.sft, 1e-12);
}

TEST(AdamW, OneStepMatchesClosedForm) {
  ag::Matrix w0(1, 3);
  w0 << 1.0, -2.0, 0.5;
  ag::Matrix g(1, 3);
  g << 0.3, -0.1, 0.0;
  ag::Tensor w(w0, true);
  AdamW opt({{"w", w}}, 0.01);
  ag::backward(ag::sum(ag::mul(w, ag::Tensor(g))));
  opt.step();
  const AdamWConfig c;
  for (int i = 0; i < 3; ++i) {
    const double expected = w0(0, i) * (1 - 0.01 * c.weight_decay) - 0.01 * g(0, i) / (std::abs(g(0, i)) + c.eps);
    EXPECT_NEAR(w.value()(0, i), expected, 1e-15);
  }
  EXPECT_EQ(opt.t(), 1);
}

TEST(AdamW, UntouchedParamsStay) {
  ag::Tensor a(ag::Matrix::Ones(1, 2), true), b(ag::Matrix::Ones(1, 2), true);
  AdamW opt({{"a", a}, {"b", b}}, 0.1);
  ag::backward(ag::sum(a));
  opt.step();
  EXPECT_EQ(b.value(), ag::Matrix::Ones(1, 2));
  EXPECT_NE(a.value(), ag::Matrix::Ones(1, 2));
}

TEST(Config, JsonRoundTrips) {
  TrainConfig t = small_train_config();
  t.use_clip = false;
  t.trainable = {Block::kAdapter};
  EXPECT_EQ(train_config_from_json(to_json(t)), t);
  const ModelConfig m = ModelConfig::tiny();
  EXPECT_EQ(model_config_from_json(to_json(m)), m);
  EXPECT_EQ(train_config_from_json(nlohmann::json::object()), TrainConfig{});
  TrainConfig bad;
  bad.learning_rate = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Blocks, NamesParse) {
  for (Block b : kAllBlocks) EXPECT_EQ(parse_block(block_name(b)), b);
  EXPECT_EQ(parse_block("E_T"), Block::kTextEncoder);
  EXPECT_EQ(parse_block("eps_theta"), Block::kDenoiser);
  EXPECT_FALSE(parse_block("nope").has_value());
}

TEST(Model, CloneAndReinitialize) {
  const auto records = testing::toy_records(4, 2);
  Model m = testing::tiny_model(records);
  const auto initial = snapshot(m.parameters(Block::kAdapter));
  Model c = m.clone();
  for (auto& p : c.parameters(Block::kAdapter)) p.tensor.mutable_value().array() += 1.0;
  EXPECT_EQ(snapshot(m.parameters(Block::kAdapter)), initial);
  c.reinitialize(Block::kAdapter);
  EXPECT_EQ(snapshot(c.parameters(Block::kAdapter)), initial);
}

TEST(Trainer, FrozenBlocksAreByteIdentical) {
  const auto records = testing::toy_records(24, 4);
  Model model = testing::tiny_model(records);
  std::vector<std::vector<ag::Matrix>> frozen;
  const std::vector<Block> frozen_blocks{Block::kDecoder, Block::kImageEncoder, Block::kDenoiser, Block::kVae};
  for (Block b : frozen_blocks) frozen.push_back(snapshot(model.parameters(b)));
  const auto trained_before = snapshot(model.parameters(Block::kTextEncoder));
  Trainer t(std::move(model), small_train_config());
  fit(t, records);
  for (std::size_t i = 0; i < frozen_blocks.size(); ++i) {
    EXPECT_EQ(snapshot(t.model().parameters(frozen_blocks[i])), frozen[i]) << block_name(frozen_blocks[i]);
  }
  EXPECT_NE(snapshot(t.model().parameters(Block::kTextEncoder)), trained_before);
}

TEST(Trainer, InterruptedRunResumesExactly) {
  const auto records = testing::toy_records(24, 5);
  const auto dir = testing::temp_dir("trainer_resume");
  const TrainConfig cfg = small_train_config();

  Trainer straight(testing::tiny_model(records), cfg);
  const auto full = fit(straight, records);
  ASSERT_TRUE(full.finished);

  Trainer first(testing::tiny_model(records), cfg);
  FitOptions stop;
  stop.max_steps = 7;
  EXPECT_FALSE(fit(first, records, stop).finished);
  save_checkpoint(dir / "ckpt.bin", first);
  Trainer resumed = load_trainer(dir / "ckpt.bin");
  EXPECT_EQ(resumed.step(), 7u);
  const auto rest = fit(resumed, records);
  ASSERT_TRUE(rest.finished);

  EXPECT_EQ(snapshot(resumed.model().parameters()), snapshot(straight.model().parameters()));
  ASSERT_EQ(rest.curve.size(), full.curve.size());
  for (std::size_t i = 0; i < full.curve.size(); ++i) {
    EXPECT_NEAR(rest.curve[i].loss.total, full.curve[i].loss.total, 1e-12);
  }
}

TEST(Checkpoint, ModelRoundTripAndVocabularyGuard) {
  const auto records = testing::toy_records(8, 6);
  const Model model = testing::tiny_model(records, 9);
  const auto dir = testing::temp_dir("trainer_ckpt");
  save_model(dir / "m.bin", model);
  const Model back = load_model(dir / "m.bin");
  EXPECT_EQ(back.config(), model.config());
  EXPECT_EQ(snapshot(back.parameters()), snapshot(model.parameters()));
  EXPECT_EQ(vocab_hash_hex(back.vocab()), vocab_hash_hex(model.vocab()));

  const std::vector<std::string> words{"zebra"};
  const auto other = text::Vocabulary::build(words);
  EXPECT_THROW(load_model(dir / "m.bin", &other), CheckpointError);
  {
    std::ofstream(dir / "bad.bin") << "not a checkpoint";
  }
  EXPECT_THROW(load_model(dir / "bad.bin"), CheckpointError);
  EXPECT_THROW(load_trainer(dir / "m.bin"), CheckpointError);
}

TEST(Fit, StepsPerEpochDropsPartialBatch) {
  EXPECT_EQ(steps_per_epoch(16, 16), 1);
  EXPECT_EQ(steps_per_epoch(31, 16), 1);
  EXPECT_EQ(steps_per_epoch(5, 16), 1);
  EXPECT_EQ(steps_per_epoch(73718, 16), 4607);
  EXPECT_THROW(steps_per_epoch(0, 16), ConfigError);
}

TEST(GradCheck, AllTermsWithinTolerance) {
  for (LossTerm term : {LossTerm::kMse, LossTerm::kSft, LossTerm::kClip}) {
    const auto r = grad_check(term, 0);
    EXPECT_LE(r.max_rel_error, 1e-4) << loss_term_name(term) << " at " << r.worst_parameter;
    EXPECT_GT(r.checked, 0u);
  }
}

TEST(LossCurve, CsvShape) {
  std::vector<EpochLoss> curve(2);
  curve[0].epoch = 1;
  curve[0].loss = {1, 2, 3, 1.5};
  curve[1].epoch = 2;
  const std::string csv = loss_curve_csv(curve);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,mse,sft,clip,total");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

}  // namespace
}  // namespace prefix::trainer
