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

#ifndef PREFIX_TRAINER_TRAIN_HPP_
#define PREFIX_TRAINER_TRAIN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefix/afem/afem.hpp"
#include "prefix/corpus/record.hpp"
#include "prefix/corpus/split.hpp"
#include "prefix/trainer/model.hpp"
#include "prefix/trainer/optim.hpp"

namespace prefix::trainer {

struct TrainConfig {
  double alpha1 = 0.1;  // weight of the decoder loss
  double alpha2 = 0.1;  // weight of the contrastive loss
  double learning_rate = 5e-5;
  int batch_size = 16;
  int epochs = 5;
  std::uint64_t seed = 0;
  std::set<Block> trainable{Block::kTextEncoder, Block::kAdapter, Block::kAfem};
  AdamWConfig adam;
  // Ablation switches; a disabled term is neither computed nor weighted.
  bool use_mse = true;
  bool use_clip = true;
  // Off: image features are mean-pooled instead of adaptively weighted.
  bool use_afem = true;
  afem::ClipOptions clip;
  // Condition the denoiser on the encoding of the decoder's greedy
  // teacher-forced output instead of the coarse prompt.
  bool condition_on_decoded = false;
  // Feed the fine prompt to the text encoder in place of a coarse one; used
  // by backbone pretraining.
  bool encode_fine_prompt = false;
  double train_ratio = corpus::kDefaultTrainRatio;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& c);
// Missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct LossBreakdown {
  double mse = 0.0;
  double sft = 0.0;
  double clip = 0.0;
  double total = 0.0;
};

// mse + alpha1 * sft + alpha2 * clip with disabled terms dropped. Throws
// TrainingDivergence naming the first non-finite component.
double total_loss(double mse, double sft, double clip, const TrainConfig& cfg);

// Per-record inputs that do not depend on parameters.
struct PreparedRecord {
  ag::Matrix patch_means;  // latent positions x 3
  ag::Matrix patches;      // P x patch*patch*3
};

PreparedRecord prepare_record(const Model& model, const corpus::TripletRecord& record,
                              const std::string& image_dir = ".");

struct BatchLosses {
  ag::Tensor mse, sft, clip, total;  // mse and clip stay undefined when disabled
  LossBreakdown values;
};

// The losses of one batch at a given step. Every random draw for a record
// comes from a stream keyed on (seed, step, record id).
BatchLosses compute_losses(const Model& model, std::span<const corpus::TripletRecord> batch,
                           std::span<const PreparedRecord> prepared, const TrainConfig& cfg, std::uint64_t step);

struct EpochLoss {
  int epoch = 0;
  LossBreakdown loss;  // means over the epoch's steps
  int steps = 0;
};

std::string loss_curve_csv(std::span<const EpochLoss> curve);

class Trainer {
 public:
  Trainer(Model model, TrainConfig config);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;
  Trainer(Trainer&&) = default;
  Trainer& operator=(Trainer&&) = default;

  LossBreakdown train_step(std::span<const corpus::TripletRecord> batch);

  Model& model() { return model_; }
  const Model& model() const { return model_; }
  const TrainConfig& config() const { return config_; }
  AdamW& optimizer() { return optimizer_; }
  const AdamW& optimizer() const { return optimizer_; }
  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }
  void set_image_dir(std::string dir) { image_dir_ = std::move(dir); }

  // Completed epochs, and running sums of the current one.
  std::vector<EpochLoss>& history() { return history_; }
  const std::vector<EpochLoss>& history() const { return history_; }
  EpochLoss& running() { return running_; }
  const EpochLoss& running() const { return running_; }

 private:
  const PreparedRecord& prepared(const corpus::TripletRecord& record);

  Model model_;
  TrainConfig config_;
  AdamW optimizer_;
  std::uint64_t step_ = 0;
  std::string image_dir_ = ".";
  std::vector<EpochLoss> history_;
  EpochLoss running_;
  std::unordered_map<std::string, PreparedRecord> cache_;
};

struct FitOptions {
  // Written after every epoch when set.
  std::filesystem::path checkpoint_path;
  std::filesystem::path loss_csv_path;
  std::function<void(const EpochLoss&)> on_epoch;
  // Stop after this many steps in this call; for interrupted-run tests.
  std::int64_t max_steps = -1;
};

struct FitResult {
  std::vector<EpochLoss> curve;
  corpus::CorpusSplit split;
  bool finished = false;
};

// Trains on the train side of the seeded split for the configured epochs,
// resuming from trainer.step().
FitResult fit(Trainer& trainer, std::span<const corpus::TripletRecord> corpus, const FitOptions& options = {});

int steps_per_epoch(std::size_t train_size, int batch_size);

// Every word of the fine and coarse prompts, in corpus order.
text::Vocabulary corpus_vocabulary(std::span<const corpus::TripletRecord> corpus);

struct PretrainConfig {
  int epochs = 30;
  double learning_rate = 3e-3;
  int batch_size = 16;
  std::uint64_t seed = 0;
  double train_ratio = corpus::kDefaultTrainRatio;
  std::set<Block> blocks{Block::kTextEncoder, Block::kAdapter, Block::kDecoder, Block::kImageEncoder,
                         Block::kDenoiser};
  // Blocks returned at their initial values after pretraining, so the
  // refiner stage starts its own text encoder and adapter from scratch.
  std::set<Block> reset{Block::kTextEncoder, Block::kAdapter};
};

// Desk-scale stand-in for pretrained backbones: trains the given blocks on
// (fine prompt, image) pairs of the train split with all three losses.
// Returns the pretrained model and its loss curve.
Model pretrain_backbones(Model model, std::span<const corpus::TripletRecord> corpus, const PretrainConfig& cfg,
                         std::vector<EpochLoss>* curve = nullptr);

}  // namespace prefix::trainer

#endif  // PREFIX_TRAINER_TRAIN_HPP_
