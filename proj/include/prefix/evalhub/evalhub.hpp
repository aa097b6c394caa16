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

#ifndef PREFIX_EVALHUB_EVALHUB_HPP_
#define PREFIX_EVALHUB_EVALHUB_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefix/corpus/image.hpp"
#include "prefix/corpus/record.hpp"
#include "prefix/sampler/sampler.hpp"
#include "prefix/trainer/model.hpp"
#include "prefix/trainer/train.hpp"

namespace prefix::evalhub {

struct ScoreInput {
  const corpus::Image* image = nullptr;
  std::string_view prompt;
};

class ScorerPlugin {
 public:
  virtual ~ScorerPlugin() = default;
  virtual std::string name() const = 0;
  virtual double min_score() const = 0;
  virtual double max_score() const = 0;
  virtual double raw_score(const ScoreInput& input) const = 0;

  // raw_score with the declared range enforced.
  double score(const ScoreInput& input) const;
};

// Mean gradient magnitude of luminance, in [0, sqrt(2)].
class SharpnessScorer : public ScorerPlugin {
 public:
  std::string name() const override { return "sharpness"; }
  double min_score() const override { return 0.0; }
  double max_score() const override;
  double raw_score(const ScoreInput& input) const override;
};

// Opponent-channel colorfulness, in [0, 2].
class ColorfulnessScorer : public ScorerPlugin {
 public:
  std::string name() const override { return "colorfulness"; }
  double min_score() const override { return 0.0; }
  double max_score() const override { return 2.0; }
  double raw_score(const ScoreInput& input) const override;
};

// Share of the toy descriptor groups (color, object, style, scene,
// modifier) the prompt mentions, in [0, 1].
class KeywordCoverageScorer : public ScorerPlugin {
 public:
  std::string name() const override { return "keyword_coverage"; }
  double min_score() const override { return 0.0; }
  double max_score() const override { return 1.0; }
  double raw_score(const ScoreInput& input) const override;
};

using ScorerFactory = std::function<std::unique_ptr<ScorerPlugin>()>;

class ScorerRegistry {
 public:
  // Holds the built-in scorers.
  ScorerRegistry();

  void add(const std::string& name, ScorerFactory factory);
  std::unique_ptr<ScorerPlugin> create(const std::string& name) const;  // ConfigError when unknown
  std::vector<std::string> names() const;

 private:
  std::map<std::string, ScorerFactory> factories_;
};

using ScorerList = std::vector<std::shared_ptr<const ScorerPlugin>>;

ScorerList default_scorers();
ScorerList make_scorers(const ScorerRegistry& registry, std::span<const std::string> names);

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single value
  int count = 0;
};

Stat summarize(std::span<const double> values);

struct ReportCell {
  std::string setting;
  std::string scorer;
  std::optional<Stat> stat;  // empty when the scorer failed
  std::string error;
};

struct AblationReport {
  std::string axis;
  std::vector<ReportCell> cells;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
  std::string note;

  // setting,scorer,mean,stddev,count
  std::string to_csv() const;
  std::string to_text() const;
};

// True when every parameter still equals its initial value.
bool is_untrained(const trainer::Model& model);

struct LengthAblationOptions {
  std::vector<int> lengths{2, 4, 6, 8, 10, 12};
  int n_samples = 8;
  std::uint64_t seed = 0;
  // Coarse prompts, cycled; sampled from the toy world when empty.
  std::vector<std::string> prompts;
  sampler::SamplingConfig sampling;
};

// For each token budget, extends each coarse prompt by that many tokens,
// renders the result in the toy world and scores it.
AblationReport ablate_prompt_length(const trainer::Model& model, const ScorerList& scorers,
                                    const LengthAblationOptions& options);

// Mean pairwise (1 - token Jaccard similarity) within each set, averaged
// over sets. Every set needs at least two candidates.
double diversity_metric(const std::vector<std::vector<std::string>>& candidate_sets);

struct NamedModel {
  std::string label;
  const trainer::Model* model = nullptr;
};

struct ComparisonTable {
  std::vector<std::string> rows;
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<Stat>>> cells;  // rows x columns
  std::vector<std::optional<double>> column_means;      // over the rows that scored

  AblationReport as_report(std::uint64_t seed) const;
  std::string to_text() const;
};

// Scores every model on refinements of the coarse prompts of the slice. A
// failing scorer marks its cell and the run continues.
ComparisonTable compare_models(std::span<const NamedModel> models, const ScorerList& scorers,
                               std::span<const corpus::TripletRecord> slice,
                               const sampler::SamplingConfig& sampling = {});

struct Variant {
  std::string label;
  bool use_mse = true;
  bool use_clip = true;
};

// wo mse+clip, wo mse, wo clip, full.
std::vector<Variant> loss_variants();

struct TrainedVariant {
  std::string label;
  trainer::Model model;
};

// Fine-tunes a copy of the model once per variant.
std::vector<TrainedVariant> train_variants(const trainer::Model& base, std::span<const corpus::TripletRecord> corpus,
                                           const trainer::TrainConfig& cfg, std::span<const Variant> variants);

// Diversity of the first session round across the coarse prompts, for a
// model trained with AFEM and one trained without.
AblationReport afem_diversity(const trainer::Model& with_afem, const trainer::Model& without_afem,
                              std::span<const std::string> prompts, const sampler::SamplingConfig& sampling);

}  // namespace prefix::evalhub

#endif  // PREFIX_EVALHUB_EVALHUB_HPP_
