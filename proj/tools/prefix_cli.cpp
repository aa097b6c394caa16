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

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "prefix/common/error.hpp"
#include "prefix/corpus/filter.hpp"
#include "prefix/corpus/histogram.hpp"
#include "prefix/corpus/jsonl.hpp"
#include "prefix/corpus/toy_world.hpp"
#include "prefix/evalhub/evalhub.hpp"
#include "prefix/gateway/gateway.hpp"
#include "prefix/sampler/sampler.hpp"
#include "prefix/trainer/checkpoint.hpp"
#include "prefix/trainer/gradcheck.hpp"
#include "prefix/trainer/train.hpp"

#include <CLI11.hpp>

namespace {

using namespace prefix;
using nlohmann::json;

struct Settings {
  trainer::ModelConfig model;
  trainer::TrainConfig train;
  sampler::SamplingConfig sampling;
};

Settings load_settings(const std::string& path) {
  Settings s;
  if (path.empty()) return s;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config " + path + " is not a JSON object");
  if (j.contains("model")) s.model = trainer::model_config_from_json(j["model"]);
  if (j.contains("train")) s.train = trainer::train_config_from_json(j["train"]);
  if (j.contains("sampling")) s.sampling = sampler::sampling_config_from_json(j["sampling"]);
  return s;
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return (v != nullptr && *v != '\0') ? std::string(v) : fallback;
}

std::string need_checkpoint(const std::string& flag) {
  const std::string path = flag.empty() ? env_or("PREFIX_CHECKPOINT", "") : flag;
  if (path.empty()) throw ConfigError("no checkpoint given (use --checkpoint or PREFIX_CHECKPOINT)");
  return path;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

void print_round(const sampler::RefinementSession& s) {
  const auto& round = s.rounds.back();
  for (std::size_t i = 0; i < round.candidates.size(); ++i) {
    const auto& c = round.candidates[i];
    fmt::print("  [{}] {}{}\n", i, c.text, c.eos ? "  <end>" : "");
  }
}

int interactive(const trainer::Model& model, const std::string& prompt, const sampler::SamplingConfig& cfg) {
  auto session = sampler::start_session(model, prompt, cfg);
  while (!session.complete) {
    try {
      sampler::continue_round(model, session);
    } catch (const SessionError& e) {
      if (e.kind() != SessionError::Kind::kComplete) throw;
      break;
    }
    fmt::print("round {}:\n", session.rounds.size());
    print_round(session);
    fmt::print("pick a candidate, or q to stop: ");
    std::fflush(stdout);
    std::string line;
    if (!std::getline(std::cin, line) || line == "q") break;
    try {
      sampler::select(session, std::stoi(line));
    } catch (const std::exception& e) {
      fmt::print(stderr, "{}\n", e.what());
      session.rounds.pop_back();
    }
  }
  fmt::print("final: {}\n", session.current_tokens().empty()
                                    ? prompt
                                    : text::detokenize(session.current_tokens(), model.vocab()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coarse-to-fine prompt refinement toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file with model, train and sampling sections");

  // build-dataset
  auto* build = app.add_subcommand("build-dataset", "Generate, filter and store a toy triplet corpus");
  std::size_t n_records = 256;
  std::uint64_t data_seed = 0;
  std::string data_out = "corpus.jsonl";
  std::string histogram_out;
  int image_size = 32;
  double nsfw_rate = 0.04;
  double threshold = corpus::kDefaultNsfwThreshold;
  build->add_option("-n,--records", n_records, "Number of records")->capture_default_str();
  build->add_option("--seed", data_seed, "Generation seed")->capture_default_str();
  build->add_option("-o,--out", data_out, "Output JSONL")->capture_default_str();
  build->add_option("--image-size", image_size, "Image side in pixels")->capture_default_str();
  build->add_option("--nsfw-rate", nsfw_rate, "Share of prompts with a flagged word")->capture_default_str();
  build->add_option("--threshold", threshold, "NSFW filter threshold")->capture_default_str();
  build->add_option("--histogram", histogram_out, "Write the fine-prompt length histogram CSV");

  // train
  auto* train = app.add_subcommand("train", "Fine-tune the refiner on a corpus");
  std::string train_data, train_out = "model.ckpt", loss_csv, resume;
  int pretrain_epochs = 0;
  double pretrain_lr = trainer::PretrainConfig{}.learning_rate;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<std::uint64_t> train_seed;
  train->add_option("--data", train_data, "Corpus JSONL")->required();
  train->add_option("-o,--out", train_out, "Checkpoint path")->capture_default_str();
  train->add_option("--loss-csv", loss_csv, "Per-epoch loss curve CSV");
  train->add_option("--resume", resume, "Resume from a checkpoint");
  train->add_option("--epochs", epochs, "Override train.epochs");
  train->add_option("--lr", lr, "Override train.learning_rate");
  train->add_option("--seed", train_seed, "Override train.seed and model.seed");
  train->add_option("--pretrain-epochs", pretrain_epochs, "Backbone pretraining epochs before fine-tuning")
      ->capture_default_str();
  train->add_option("--pretrain-lr", pretrain_lr, "Backbone pretraining learning rate")->capture_default_str();

  // refine
  auto* refine = app.add_subcommand("refine", "Refine a coarse prompt");
  std::string ckpt, prompt;
  bool interactive_mode = false;
  std::optional<int> max_tokens;
  std::optional<std::uint64_t> sample_seed;
  refine->add_option("--checkpoint", ckpt, "Checkpoint (default PREFIX_CHECKPOINT)");
  refine->add_option("prompt", prompt, "Coarse prompt")->required();
  refine->add_flag("-i,--interactive", interactive_mode, "Pick among candidates round by round");
  refine->add_option("--max-tokens", max_tokens, "One-shot token budget");
  refine->add_option("--seed", sample_seed, "Sampling seed");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP gateway");
  std::string host = "127.0.0.1", session_log;
  std::optional<int> port;
  bool thumbnails = false;
  serve->add_option("--checkpoint", ckpt, "Checkpoint (default PREFIX_CHECKPOINT)");
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port (default PREFIX_PORT or 8080)");
  serve->add_option("--session-log", session_log, "Append-only session log");
  serve->add_flag("--thumbnails", thumbnails, "Attach illustrative toy renders");

  // eval
  auto* eval = app.add_subcommand("eval", "Score checkpoints on a corpus slice");
  std::vector<std::string> eval_ckpts, eval_labels, scorer_names{"sharpness", "colorfulness", "keyword_coverage"};
  std::string eval_data, eval_csv;
  std::size_t eval_n = 16;
  eval->add_option("--checkpoints", eval_ckpts, "Checkpoints to compare")->required();
  eval->add_option("--labels", eval_labels, "Row labels");
  eval->add_option("--data", eval_data, "Corpus JSONL")->required();
  eval->add_option("-n", eval_n, "Records to score")->capture_default_str();
  eval->add_option("--scorers", scorer_names, "Scorer names")->capture_default_str();
  eval->add_option("--csv", eval_csv, "Write the report CSV");

  // analyze-lengths
  auto* lengths = app.add_subcommand("analyze-lengths", "Score prompt extensions of several lengths");
  evalhub::LengthAblationOptions lopt;
  std::string lengths_csv;
  lengths->add_option("--checkpoint", ckpt, "Checkpoint (default PREFIX_CHECKPOINT)");
  lengths->add_option("--lengths", lopt.lengths, "Token budgets")->capture_default_str();
  lengths->add_option("--samples", lopt.n_samples, "Prompts per length")->capture_default_str();
  lengths->add_option("--seed", lopt.seed, "Seed")->capture_default_str();
  lengths->add_option("--prompts", lopt.prompts, "Coarse prompts (toy-world prompts when empty)");
  lengths->add_option("--csv", lengths_csv, "Write the report CSV");

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "Compare analytic and numeric gradients");
  std::string term_name = "all";
  std::uint64_t gc_seed = 0;
  double tolerance = 1e-4;
  gc->add_option("--term", term_name, "mse, sft, clip or all")->capture_default_str();
  gc->add_option("--seed", gc_seed, "Seed")->capture_default_str();
  gc->add_option("--tolerance", tolerance, "Maximum relative error")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    Settings s = load_settings(config_path);

    if (*build) {
      corpus::ToyWorldOptions opts;
      opts.height = opts.width = image_size;
      opts.nsfw_rate = nsfw_rate;
      const auto records = corpus::generate_toy_world(n_records, data_seed, opts);
      const auto filtered = corpus::filter_nsfw(records, corpus::KeywordNsfwClassifier(), threshold);
      corpus::store_jsonl(filtered.retained, data_out);
      fmt::print("{} records generated, {} retained, {} removed, {} quarantined -> {}\n", records.size(),
                 filtered.retained.size(), filtered.removed.size(), filtered.quarantined.size(), data_out);
      if (!histogram_out.empty()) {
        std::vector<std::string> fine;
        for (const auto& r : filtered.retained) fine.push_back(r.fine_prompt);
        write_text(histogram_out, corpus::length_histogram(fine).to_csv());
      }
      return 0;
    }

    if (*train) {
      const auto records = corpus::load_jsonl(train_data);
      if (epochs) s.train.epochs = *epochs;
      if (lr) s.train.learning_rate = *lr;
      if (train_seed) s.train.seed = s.model.seed = *train_seed;
      s.train.validate();
      trainer::FitOptions fo;
      fo.checkpoint_path = train_out;
      fo.loss_csv_path = loss_csv;
      fo.on_epoch = [](const trainer::EpochLoss& e) {
        fmt::print("epoch {}: mse {:.5f} sft {:.5f} clip {:.5f} total {:.5f}\n", e.epoch, e.loss.mse, e.loss.sft,
                   e.loss.clip, e.loss.total);
      };
      if (!resume.empty()) {
        auto t = trainer::load_trainer(resume);
        trainer::fit(t, records, fo);
      } else {
        trainer::Model model(s.model, trainer::corpus_vocabulary(records));
        if (pretrain_epochs > 0) {
          trainer::PretrainConfig pc;
          pc.epochs = pretrain_epochs;
          pc.learning_rate = pretrain_lr;
          pc.batch_size = s.train.batch_size;
          pc.seed = s.train.seed;
          pc.train_ratio = s.train.train_ratio;
          fmt::print("pretraining backbones for {} epochs\n", pretrain_epochs);
          model = trainer::pretrain_backbones(std::move(model), records, pc);
        }
        trainer::Trainer t(std::move(model), s.train);
        trainer::fit(t, records, fo);
      }
      fmt::print("checkpoint written to {}\n", train_out);
      return 0;
    }

    if (*refine) {
      const auto model = trainer::load_model(need_checkpoint(ckpt));
      if (max_tokens) s.sampling.max_tokens = *max_tokens;
      if (sample_seed) s.sampling.seed = *sample_seed;
      if (interactive_mode) return interactive(model, prompt, s.sampling);
      const auto g = sampler::generate(model, prompt, s.sampling);
      fmt::print("{}\n", g.text);
      return 0;
    }

    if (*serve) {
      gateway::GatewayOptions go;
      go.session_log = session_log;
      go.thumbnails = thumbnails;
      go.sampling = s.sampling;
      gateway::Gateway gw(go);
      const std::string path = ckpt.empty() ? env_or("PREFIX_CHECKPOINT", "") : ckpt;
      if (!path.empty()) gw.load_checkpoint(path);
      const int p = port ? *port : std::stoi(env_or("PREFIX_PORT", "8080"));
      fmt::print("listening on {}:{}{}\n", host, p, path.empty() ? " (no checkpoint, degraded)" : "");
      std::fflush(stdout);
      gateway::serve(gw, host, p);
      return 0;
    }

    if (*eval) {
      const auto records = corpus::load_jsonl(eval_data);
      const std::vector<corpus::TripletRecord> slice(records.begin(),
                                                     records.begin() + std::min(eval_n, records.size()));
      std::vector<trainer::Model> models;
      for (const auto& c : eval_ckpts) models.push_back(trainer::load_model(c));
      std::vector<evalhub::NamedModel> named;
      for (std::size_t i = 0; i < models.size(); ++i) {
        named.push_back({i < eval_labels.size() ? eval_labels[i] : eval_ckpts[i], &models[i]});
      }
      const auto scorers = evalhub::make_scorers(evalhub::ScorerRegistry(), scorer_names);
      const auto table = evalhub::compare_models(named, scorers, slice, s.sampling);
      fmt::print("{}", table.to_text());
      if (!eval_csv.empty()) write_text(eval_csv, table.as_report(s.sampling.seed).to_csv());
      return 0;
    }

    if (*lengths) {
      const auto model = trainer::load_model(need_checkpoint(ckpt));
      lopt.sampling = s.sampling;
      const auto report = evalhub::ablate_prompt_length(model, evalhub::default_scorers(), lopt);
      fmt::print("{}", report.to_text());
      if (!lengths_csv.empty()) write_text(lengths_csv, report.to_csv());
      return 0;
    }

    if (*gc) {
      std::vector<trainer::LossTerm> terms;
      if (term_name == "all") {
        terms = {trainer::LossTerm::kMse, trainer::LossTerm::kSft, trainer::LossTerm::kClip};
      } else if (auto t = trainer::parse_loss_term(term_name)) {
        terms = {*t};
      } else {
        throw ConfigError("unknown loss term " + term_name);
      }
      bool ok = true;
      for (auto t : terms) {
        const auto r = trainer::grad_check(t, gc_seed);
        const bool pass = r.max_rel_error <= tolerance;
        ok = ok && pass;
        fmt::print("{:<5} {} max_rel {:.3e} max_abs {:.3e} over {} entries (worst {})\n", trainer::loss_term_name(t),
                   pass ? "PASS" : "FAIL", r.max_rel_error, r.max_abs_error, r.checked, r.worst_parameter);
      }
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
