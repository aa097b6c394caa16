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

// Structured values cross the boundary as JSON text; the Python package
// decodes them.

#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "prefix/common/error.hpp"
#include "prefix/corpus/filter.hpp"
#include "prefix/corpus/jsonl.hpp"
#include "prefix/corpus/toy_world.hpp"
#include "prefix/evalhub/evalhub.hpp"
#include "prefix/gateway/gateway.hpp"
#include "prefix/sampler/sampler.hpp"
#include "prefix/trainer/checkpoint.hpp"
#include "prefix/trainer/gradcheck.hpp"
#include "prefix/trainer/train.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace prefix;

namespace {

std::vector<corpus::TripletRecord> records_from(const std::string& jsonl) {
  std::istringstream in(jsonl);
  return corpus::parse_jsonl(in);
}

json parse(const std::string& text) { return text.empty() ? json::object() : json::parse(text); }

}  // namespace

PYBIND11_MODULE(_prefix, m) {
  m.doc() = "Coarse-to-fine prompt refinement core";

  py::register_exception<Error>(m, "PrefixError");

  m.def(
      "toy_corpus",
      [](std::size_t n, std::uint64_t seed, int image_size, double nsfw_rate) {
        corpus::ToyWorldOptions o;
        o.height = o.width = image_size;
        o.nsfw_rate = nsfw_rate;
        return corpus::to_jsonl(corpus::generate_toy_world(n, seed, o));
      },
      py::arg("n"), py::arg("seed") = 0, py::arg("image_size") = 32, py::arg("nsfw_rate") = 0.04,
      "Toy triplet corpus as JSONL text.");

  m.def(
      "filter_nsfw",
      [](const std::string& jsonl, double threshold) {
        const auto r = corpus::filter_nsfw(records_from(jsonl), corpus::KeywordNsfwClassifier(), threshold);
        return py::make_tuple(corpus::to_jsonl(r.retained), corpus::to_jsonl(r.removed), r.quarantined.size());
      },
      py::arg("jsonl"), py::arg("threshold") = corpus::kDefaultNsfwThreshold,
      "Returns (retained JSONL, removed JSONL, quarantined count).");

  m.def(
      "filter_top_k_top_p",
      [](const std::vector<double>& logits, int k, double p) { return sampler::filter_top_k_top_p(logits, k, p); },
      py::arg("logits"), py::arg("top_k") = 50, py::arg("top_p") = 0.95);
  m.def(
      "filter_probabilities",
      [](const std::vector<double>& probs, int k, double p) { return sampler::filter_probabilities(probs, k, p); },
      py::arg("probs"), py::arg("top_k") = 50, py::arg("top_p") = 0.95);

  m.def(
      "total_loss",
      [](double mse, double sft, double clip, const std::string& train_config) {
        return trainer::total_loss(mse, sft, clip, trainer::train_config_from_json(parse(train_config)));
      },
      py::arg("mse"), py::arg("sft"), py::arg("clip"), py::arg("train_config") = "");

  m.def("diversity_metric", &evalhub::diversity_metric, py::arg("candidate_sets"));

  m.def(
      "grad_check",
      [](const std::string& term, std::uint64_t seed) {
        const auto t = trainer::parse_loss_term(term);
        if (!t) throw ConfigError("unknown loss term " + term);
        const auto r = trainer::grad_check(*t, seed);
        return json{{"term", term},
                    {"loss", r.loss},
                    {"max_rel_error", r.max_rel_error},
                    {"max_abs_error", r.max_abs_error},
                    {"checked", r.checked},
                    {"worst_parameter", r.worst_parameter}}
            .dump();
      },
      py::arg("term"), py::arg("seed") = 0);

  m.def("default_configs", [] {
    return json{{"model", trainer::to_json(trainer::ModelConfig{})},
                {"tiny_model", trainer::to_json(trainer::ModelConfig::tiny())},
                {"train", trainer::to_json(trainer::TrainConfig{})},
                {"sampling", sampler::to_json(sampler::SamplingConfig{})}}
        .dump();
  });

  py::class_<trainer::Model>(m, "Model")
      .def_static(
          "create",
          [](const std::string& model_config, const std::string& corpus_jsonl) {
            const auto records = records_from(corpus_jsonl);
            return trainer::Model(trainer::model_config_from_json(parse(model_config)),
                                  trainer::corpus_vocabulary(records));
          },
          py::arg("model_config"), py::arg("corpus_jsonl"), "Fresh model with the corpus vocabulary.")
      .def_static(
          "load", [](const std::string& path) { return trainer::load_model(path); }, py::arg("path"))
      .def(
          "save", [](const trainer::Model& self, const std::string& path) { trainer::save_model(path, self); },
          py::arg("path"))
      .def("config_json", [](const trainer::Model& self) { return trainer::to_json(self.config()).dump(); })
      .def("vocab_size", [](const trainer::Model& self) { return self.vocab().size(); })
      .def(
          "refine",
          [](const trainer::Model& self, const std::string& prompt, const std::string& sampling) {
            const auto g = sampler::generate(self, prompt, sampler::sampling_config_from_json(parse(sampling)));
            return g.text;
          },
          py::arg("prompt"), py::arg("sampling") = "")
      .def(
          "start_session",
          [](const trainer::Model& self, const std::string& prompt, const std::string& sampling) {
            auto s = sampler::start_session(self, prompt, sampler::sampling_config_from_json(parse(sampling)));
            sampler::continue_round(self, s);
            return sampler::session_to_json(s).dump();
          },
          py::arg("prompt"), py::arg("sampling") = "", "New session with its first round, as JSON.")
      .def(
          "select",
          [](const trainer::Model& self, const std::string& session_json, int index) {
            auto s = sampler::session_from_json(parse(session_json));
            sampler::select(s, index);
            if (!s.complete) {
              try {
                sampler::continue_round(self, s);
              } catch (const SessionError& e) {
                if (e.kind() != SessionError::Kind::kComplete) throw;
              }
            }
            return sampler::session_to_json(s).dump();
          },
          py::arg("session"), py::arg("index"), "Selects a candidate and runs the next round.")
      .def(
          "replay",
          [](const trainer::Model& self, const std::string& session_json) {
            return sampler::session_to_json(sampler::replay_session(self, parse(session_json))).dump();
          },
          py::arg("session"));

  m.def(
      "train",
      [](trainer::Model& model, const std::string& corpus_jsonl, const std::string& train_config,
         int pretrain_epochs, double pretrain_lr) {
        const auto records = records_from(corpus_jsonl);
        const auto cfg = trainer::train_config_from_json(parse(train_config));
        trainer::Model work = model.clone();
        if (pretrain_epochs > 0) {
          trainer::PretrainConfig pc;
          pc.epochs = pretrain_epochs;
          pc.learning_rate = pretrain_lr;
          pc.batch_size = cfg.batch_size;
          pc.seed = cfg.seed;
          pc.train_ratio = cfg.train_ratio;
          work = trainer::pretrain_backbones(std::move(work), records, pc);
        }
        trainer::Trainer t(std::move(work), cfg);
        const auto result = trainer::fit(t, records);
        model.copy_parameters_from(t.model());
        return trainer::loss_curve_csv(result.curve);
      },
      py::arg("model"), py::arg("corpus_jsonl"), py::arg("train_config") = "", py::arg("pretrain_epochs") = 0,
      py::arg("pretrain_lr") = trainer::PretrainConfig{}.learning_rate,
      "Trains the model in place; returns the loss curve CSV.");

  m.def(
      "ablate_prompt_length",
      [](const trainer::Model& model, const std::vector<int>& lengths, int n_samples, std::uint64_t seed) {
        evalhub::LengthAblationOptions o;
        o.lengths = lengths;
        o.n_samples = n_samples;
        o.seed = seed;
        return evalhub::ablate_prompt_length(model, evalhub::default_scorers(), o).to_csv();
      },
      py::arg("model"), py::arg("lengths") = std::vector<int>{2, 4, 6, 8, 10, 12}, py::arg("n_samples") = 8,
      py::arg("seed") = 0, "Report CSV.");

  py::class_<gateway::Gateway>(m, "Gateway")
      .def(py::init([](const std::string& session_log, bool thumbnails) {
             gateway::GatewayOptions o;
             o.session_log = session_log;
             o.thumbnails = thumbnails;
             return std::make_unique<gateway::Gateway>(o);
           }),
           py::arg("session_log") = "", py::arg("thumbnails") = false)
      .def("load_checkpoint",
           [](gateway::Gateway& self, const std::string& path) { self.load_checkpoint(path); })
      .def(
          "handle",
          [](gateway::Gateway& self, const std::string& method, const std::string& path, const std::string& body) {
            py::gil_scoped_release release;
            const auto r = self.handle(method, path, body);
            return std::make_pair(r.status, r.body.dump());
          },
          py::arg("method"), py::arg("path"), py::arg("body") = "",
          "Returns (status, JSON body text).");
}
