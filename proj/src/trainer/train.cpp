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

#include "prefix/trainer/train.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "prefix/autograd/ops.hpp"
#include "prefix/common/error.hpp"
#include "prefix/common/rng.hpp"
#include "prefix/textcore/tokenizer.hpp"
#include "prefix/trainer/checkpoint.hpp"

namespace prefix::trainer {

namespace {

constexpr std::uint64_t kEpochStream = 0x45504f4348ULL;

text::TokenSequence target_sequence(std::string_view fine, const Model& model) {
  std::vector<text::TokenId> words = text::tokenize(fine, model.vocab()).real_ids();
  const auto cap = static_cast<std::size_t>(model.config().text.max_len - 1);
  if (words.size() > cap) words.resize(cap);
  std::vector<text::TokenId> ids;
  ids.reserve(words.size() + 2);
  ids.push_back(text::kBos);
  ids.insert(ids.end(), words.begin(), words.end());
  ids.push_back(text::kEos);
  return text::make_sequence(std::move(ids));
}

// Greedy tokens of teacher-forced logits, cut at the first <eos>.
std::vector<text::TokenId> greedy_tokens(const ag::Matrix& logits) {
  std::vector<text::TokenId> out;
  for (ag::Index r = 0; r < logits.rows(); ++r) {
    ag::Index best = 0;
    logits.row(r).maxCoeff(&best);
    const auto id = static_cast<text::TokenId>(best);
    if (id == text::kEos) break;
    if (id >= text::kNumSpecial) out.push_back(id);
  }
  return out;
}

ag::Tensor mean_of(const std::vector<ag::Tensor>& parts) {
  ag::Tensor acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) acc = ag::add(acc, parts[i]);
  return ag::scale(acc, 1.0 / static_cast<double>(parts.size()));
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {kEpochStream, static_cast<std::uint64_t>(epoch)}));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  return order;
}

}  // namespace

void TrainConfig::validate() const {
  auto finite_nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
  if (!finite_nonneg(alpha1) || !finite_nonneg(alpha2)) throw ConfigError("loss weights must be finite and >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (use_clip && batch_size < 2) throw ConfigError("the contrastive loss needs batch size >= 2");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(clip.temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (!(train_ratio > 0.0 && train_ratio <= 1.0)) throw ConfigError("train ratio must be in (0, 1]");
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json blocks = nlohmann::json::array();
  for (Block b : c.trainable) blocks.push_back(std::string(block_name(b)));
  return {{"alpha1", c.alpha1},
          {"alpha2", c.alpha2},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"trainable", blocks},
          {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps},
                    {"weight_decay", c.adam.weight_decay}}},
          {"use_mse", c.use_mse},
          {"use_clip", c.use_clip},
          {"use_afem", c.use_afem},
          {"clip_temperature", c.clip.temperature},
          {"clip_reading", c.clip.reading == afem::ClipReading::kPerSample ? "per_sample" : "summed_ratio"},
          {"condition_on_decoded", c.condition_on_decoded},
          {"encode_fine_prompt", c.encode_fine_prompt},
          {"train_ratio", c.train_ratio}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.alpha1 = j.value("alpha1", c.alpha1);
    c.alpha2 = j.value("alpha2", c.alpha2);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    if (j.contains("trainable")) {
      c.trainable.clear();
      for (const auto& name : j["trainable"]) {
        const auto b = parse_block(name.get<std::string>());
        if (!b) throw ConfigError("unknown block '" + name.get<std::string>() + "'");
        c.trainable.insert(*b);
      }
    }
    if (j.contains("adam")) {
      const auto& a = j["adam"];
      c.adam.beta1 = a.value("beta1", c.adam.beta1);
      c.adam.beta2 = a.value("beta2", c.adam.beta2);
      c.adam.eps = a.value("eps", c.adam.eps);
      c.adam.weight_decay = a.value("weight_decay", c.adam.weight_decay);
    }
    c.use_mse = j.value("use_mse", c.use_mse);
    c.use_clip = j.value("use_clip", c.use_clip);
    c.use_afem = j.value("use_afem", c.use_afem);
    c.clip.temperature = j.value("clip_temperature", c.clip.temperature);
    const std::string reading = j.value("clip_reading", std::string("per_sample"));
    if (reading == "per_sample") {
      c.clip.reading = afem::ClipReading::kPerSample;
    } else if (reading == "summed_ratio") {
      c.clip.reading = afem::ClipReading::kSummedRatio;
    } else {
      throw ConfigError("unknown clip_reading '" + reading + "'");
    }
    c.condition_on_decoded = j.value("condition_on_decoded", c.condition_on_decoded);
    c.encode_fine_prompt = j.value("encode_fine_prompt", c.encode_fine_prompt);
    c.train_ratio = j.value("train_ratio", c.train_ratio);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad train config: ") + e.what());
  }
  c.validate();
  return c;
}

double total_loss(double mse, double sft, double clip, const TrainConfig& cfg) {
  if (cfg.use_mse && !std::isfinite(mse)) throw TrainingDivergence("mse", mse);
  if (!std::isfinite(sft)) throw TrainingDivergence("sft", sft);
  if (cfg.use_clip && !std::isfinite(clip)) throw TrainingDivergence("clip", clip);
  // Disabled terms contribute an exact zero.
  const double m = cfg.use_mse ? mse : 0.0;
  const double c = cfg.use_clip ? clip : 0.0;
  return m + cfg.alpha1 * sft + cfg.alpha2 * c;
}

PreparedRecord prepare_record(const Model& model, const corpus::TripletRecord& record, const std::string& image_dir) {
  const corpus::Image image = corpus::resolve_image(record, image_dir);
  const int size = model.config().image_size;
  if (image.height != size || image.width != size) {
    throw ShapeError(fmt::format("record {} has a {}x{} image, the model expects {}x{}", record.id, image.height,
                                 image.width, size, size));
  }
  return {diffusion::patch_means(image), afem::patchify(image, diffusion::kPatch)};
}

BatchLosses compute_losses(const Model& model, std::span<const corpus::TripletRecord> batch,
                           std::span<const PreparedRecord> prepared, const TrainConfig& cfg, std::uint64_t step) {
  if (batch.empty()) throw LossError("empty batch");
  if (prepared.size() != batch.size()) throw ShapeError("prepared inputs do not match the batch");
  if (cfg.use_clip && batch.size() < 2) throw LossError("the contrastive loss needs at least 2 records");
  const diffusion::LatentShape shape = model.latent_shape();

  std::vector<ag::Tensor> sft_parts, mse_parts, text_rows, image_rows;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& rec = batch[i];
    Rng rng(derive_seed(cfg.seed, {step, fnv1a(rec.id)}));
    const std::string& coarse = corpus::select_coarse(rec, rng);
    const refiner::EncodedText enc = model.encode(cfg.encode_fine_prompt ? rec.fine_prompt : coarse);
    const refiner::FeatureSequence memory = model.adapter.adapt(enc.sequence);
    const auto tf = model.decoder.decode_teacher_forced(memory, target_sequence(rec.fine_prompt, model));
    sft_parts.push_back(tf.loss);

    if (cfg.use_mse) {
      ag::Tensor cond = enc.sequence.real();
      if (cfg.condition_on_decoded) {
        const auto tokens = greedy_tokens(tf.logits.value());
        if (!tokens.empty()) cond = model.text_encoder.encode(text::make_sequence(tokens)).sequence.real();
      }
      const diffusion::NoiseDraw noise = diffusion::draw_noise(rng, model.schedule, shape);
      const ag::Tensor z0 = model.vae.encode_means(prepared[i].patch_means);
      const ag::Tensor eps(noise.eps);
      const ag::Tensor gamma = diffusion::add_noise(z0, eps, model.schedule.alpha_bar(noise.tau));
      mse_parts.push_back(diffusion::loss_mse(eps, model.denoiser.forward(gamma, shape, noise.tau, cond)));
    }
    if (cfg.use_clip) {
      text_rows.push_back(enc.pooled);
      const ag::Tensor patches = model.image_encoder.encode_patches(prepared[i].patches);
      image_rows.push_back(cfg.use_afem ? afem::adaptive_pool(patches, model.afem.weights(patches))
                                        : ag::mean_rows(patches));
    }
  }

  BatchLosses out;
  out.sft = mean_of(sft_parts);
  out.values.sft = out.sft.item();
  if (cfg.use_mse) {
    out.mse = mean_of(mse_parts);
    out.values.mse = out.mse.item();
  }
  if (cfg.use_clip) {
    out.clip = afem::loss_clip(ag::concat_rows(text_rows), ag::concat_rows(image_rows), cfg.clip);
    out.values.clip = out.clip.item();
  }
  out.values.total = total_loss(out.values.mse, out.values.sft, out.values.clip, cfg);
  out.total = ag::scale(out.sft, cfg.alpha1);
  if (cfg.use_mse) out.total = ag::add(out.mse, out.total);
  if (cfg.use_clip) out.total = ag::add(out.total, ag::scale(out.clip, cfg.alpha2));
  return out;
}

std::string loss_curve_csv(std::span<const EpochLoss> curve) {
  std::string out = "epoch,mse,sft,clip,total\n";
  for (const auto& e : curve) {
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", e.epoch, e.loss.mse, e.loss.sft, e.loss.clip,
                       e.loss.total);
  }
  return out;
}

namespace {

nn::ParamList trainable_params(Model& model, const TrainConfig& cfg) {
  cfg.validate();
  model.set_trainable(cfg.trainable);
  nn::ParamList out;
  for (Block b : kAllBlocks) {
    if (!cfg.trainable.contains(b)) continue;
    auto part = model.parameters(b);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace

Trainer::Trainer(Model model, TrainConfig config)
    : model_(std::move(model)), config_(std::move(config)) {
  optimizer_ = AdamW(trainable_params(model_, config_), config_.learning_rate, config_.adam);
}

const PreparedRecord& Trainer::prepared(const corpus::TripletRecord& record) {
  auto it = cache_.find(record.id);
  if (it == cache_.end()) it = cache_.emplace(record.id, prepare_record(model_, record, image_dir_)).first;
  return it->second;
}

LossBreakdown Trainer::train_step(std::span<const corpus::TripletRecord> batch) {
  std::vector<PreparedRecord> inputs;
  inputs.reserve(batch.size());
  for (const auto& r : batch) inputs.push_back(prepared(r));
  optimizer_.zero_grad();
  const BatchLosses losses = compute_losses(model_, batch, inputs, config_, step_);
  ag::backward(losses.total);
  optimizer_.step();
  optimizer_.zero_grad();
  ++step_;
  return losses.values;
}

int steps_per_epoch(std::size_t train_size, int batch_size) {
  if (train_size == 0) throw ConfigError("training split is empty");
  return std::max(1, static_cast<int>(train_size / static_cast<std::size_t>(batch_size)));
}

FitResult fit(Trainer& trainer, std::span<const corpus::TripletRecord> corpus, const FitOptions& options) {
  const TrainConfig& cfg = trainer.config();
  FitResult result;
  result.split = corpus::split(corpus, cfg.seed, cfg.train_ratio);
  const std::vector<corpus::TripletRecord> train = corpus::select_records(corpus, result.split.train);
  const int spe = steps_per_epoch(train.size(), cfg.batch_size);
  const auto total_steps = static_cast<std::uint64_t>(spe) * static_cast<std::uint64_t>(cfg.epochs);
  const std::size_t per_batch = std::min(train.size(), static_cast<std::size_t>(cfg.batch_size));

  std::int64_t done = 0;
  std::vector<corpus::TripletRecord> batch;
  while (trainer.step() < total_steps && (options.max_steps < 0 || done < options.max_steps)) {
    const int epoch = static_cast<int>(trainer.step() / static_cast<std::uint64_t>(spe));
    const int k = static_cast<int>(trainer.step() % static_cast<std::uint64_t>(spe));
    if (k == 0) trainer.running() = EpochLoss{epoch + 1, {}, 0};
    const auto order = epoch_order(train.size(), cfg.seed, epoch);
    batch.clear();
    for (std::size_t j = 0; j < per_batch; ++j) batch.push_back(train[order[k * per_batch + j]]);

    const LossBreakdown l = trainer.train_step(batch);
    ++done;
    EpochLoss& run = trainer.running();
    run.loss.mse += l.mse;
    run.loss.sft += l.sft;
    run.loss.clip += l.clip;
    ++run.steps;

    if (k == spe - 1) {
      EpochLoss e = run;
      e.loss.mse /= e.steps;
      e.loss.sft /= e.steps;
      e.loss.clip /= e.steps;
      e.loss.total = total_loss(e.loss.mse, e.loss.sft, e.loss.clip, cfg);
      trainer.history().push_back(e);
      trainer.running() = EpochLoss{epoch + 2, {}, 0};
      if (options.on_epoch) options.on_epoch(e);
      if (!options.checkpoint_path.empty()) save_checkpoint(options.checkpoint_path, trainer);
      if (!options.loss_csv_path.empty()) {
        std::ofstream out(options.loss_csv_path, std::ios::binary);
        if (!out) throw Error("cannot write " + options.loss_csv_path.string());
        out << loss_curve_csv(trainer.history());
      }
    }
  }
  result.curve = trainer.history();
  result.finished = trainer.step() >= total_steps;
  return result;
}

Model pretrain_backbones(Model model, std::span<const corpus::TripletRecord> corpus, const PretrainConfig& cfg,
                         std::vector<EpochLoss>* curve) {
  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.batch_size = cfg.batch_size;
  tc.epochs = cfg.epochs;
  tc.seed = cfg.seed;
  tc.train_ratio = cfg.train_ratio;
  tc.encode_fine_prompt = true;
  tc.trainable = cfg.blocks;
  Trainer trainer(std::move(model), tc);
  FitResult r = fit(trainer, corpus);
  if (curve != nullptr) *curve = std::move(r.curve);
  Model out = std::move(trainer.model());
  for (Block b : cfg.reset) out.reinitialize(b);
  out.set_trainable({});
  return out;
}

text::Vocabulary corpus_vocabulary(std::span<const corpus::TripletRecord> corpus) {
  std::vector<std::string> texts;
  for (const auto& r : corpus) {
    texts.push_back(r.fine_prompt);
    for (const auto& [bucket, coarse] : r.coarse_prompts) texts.push_back(coarse);
  }
  return text::Vocabulary::build(texts);
}

}  // namespace prefix::trainer
