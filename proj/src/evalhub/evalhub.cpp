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

#include "prefix/evalhub/evalhub.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "prefix/common/error.hpp"
#include "prefix/corpus/toy_world.hpp"
#include "prefix/textcore/vocabulary.hpp"

namespace prefix::evalhub {

namespace {

const corpus::Image& need_image(const ScoreInput& in) {
  if (in.image == nullptr || in.image->height < 2 || in.image->width < 2) {
    throw ShapeError("scorer needs an image of at least 2x2");
  }
  return *in.image;
}

double luminance(const corpus::Image& im, int y, int x) {
  return 0.299 * im.at(y, x, 0) + 0.587 * im.at(y, x, 1) + 0.114 * im.at(y, x, 2);
}

std::string padded_words(std::string_view text) {
  std::string s = " ";
  for (const auto& w : text::split_words(text)) s += w + " ";
  return s;
}

bool mentions_any(const std::string& padded, std::span<const std::string_view> phrases) {
  return std::any_of(phrases.begin(), phrases.end(),
                     [&](std::string_view p) { return padded.find(padded_words(p)) != std::string::npos; });
}

std::string fmt_stat(const std::optional<Stat>& s) {
  return s ? fmt::format("{:.4f} +/- {:.4f} (n={})", s->mean, s->stddev, s->count) : std::string("failed");
}

std::string coarse_of(const corpus::TripletRecord& r) {
  for (const auto& [bucket, text] : r.coarse_prompts) {
    if (!text.empty()) return text;
  }
  return r.fine_prompt;
}

}  // namespace

double ScorerPlugin::score(const ScoreInput& input) const {
  const double s = raw_score(input);
  const double lo = min_score();
  const double hi = max_score();
  const double slack = 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)});
  if (!(s >= lo - slack && s <= hi + slack)) {
    throw PluginContractViolation(fmt::format("scorer {} returned {} outside [{}, {}]", name(), s, lo, hi));
  }
  return std::clamp(s, lo, hi);
}

double SharpnessScorer::max_score() const { return std::sqrt(2.0); }

double SharpnessScorer::raw_score(const ScoreInput& input) const {
  const auto& im = need_image(input);
  double sum = 0.0;
  for (int y = 0; y + 1 < im.height; ++y) {
    for (int x = 0; x + 1 < im.width; ++x) {
      const double l = luminance(im, y, x);
      const double gx = luminance(im, y, x + 1) - l;
      const double gy = luminance(im, y + 1, x) - l;
      sum += std::sqrt(gx * gx + gy * gy);
    }
  }
  return sum / static_cast<double>((im.height - 1) * (im.width - 1));
}

double ColorfulnessScorer::raw_score(const ScoreInput& input) const {
  const auto& im = need_image(input);
  const double n = static_cast<double>(im.height) * im.width;
  double mrg = 0.0, myb = 0.0;
  for (int y = 0; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) {
      mrg += im.at(y, x, 0) - im.at(y, x, 1);
      myb += 0.5 * (im.at(y, x, 0) + im.at(y, x, 1)) - im.at(y, x, 2);
    }
  }
  mrg /= n;
  myb /= n;
  double vrg = 0.0, vyb = 0.0;
  for (int y = 0; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) {
      const double rg = im.at(y, x, 0) - im.at(y, x, 1) - mrg;
      const double yb = 0.5 * (im.at(y, x, 0) + im.at(y, x, 1)) - im.at(y, x, 2) - myb;
      vrg += rg * rg;
      vyb += yb * yb;
    }
  }
  return std::sqrt(vrg / n + vyb / n) + 0.3 * std::sqrt(mrg * mrg + myb * myb);
}

double KeywordCoverageScorer::raw_score(const ScoreInput& input) const {
  const std::string p = padded_words(input.prompt);
  int hit = 0;
  for (auto group : {corpus::toy_colors(), corpus::toy_objects(), corpus::toy_styles(), corpus::toy_scenes(),
                     corpus::toy_modifiers()}) {
    hit += mentions_any(p, group) ? 1 : 0;
  }
  return hit / 5.0;
}

ScorerRegistry::ScorerRegistry() {
  add("sharpness", [] { return std::make_unique<SharpnessScorer>(); });
  add("colorfulness", [] { return std::make_unique<ColorfulnessScorer>(); });
  add("keyword_coverage", [] { return std::make_unique<KeywordCoverageScorer>(); });
}

void ScorerRegistry::add(const std::string& name, ScorerFactory factory) { factories_[name] = std::move(factory); }

std::unique_ptr<ScorerPlugin> ScorerRegistry::create(const std::string& name) const {
  auto it = factories_.find(name);
  if (it == factories_.end()) throw ConfigError("unknown scorer: " + name);
  return it->second();
}

std::vector<std::string> ScorerRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : factories_) out.push_back(k);
  return out;
}

ScorerList make_scorers(const ScorerRegistry& registry, std::span<const std::string> names) {
  ScorerList out;
  for (const auto& n : names) out.push_back(registry.create(n));
  return out;
}

ScorerList default_scorers() {
  const std::vector<std::string> names{"sharpness", "colorfulness", "keyword_coverage"};
  return make_scorers(ScorerRegistry(), names);
}

Stat summarize(std::span<const double> values) {
  Stat s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / s.count;
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / (s.count - 1));
  }
  return s;
}

std::string AblationReport::to_csv() const {
  std::string out = "setting,scorer,mean,stddev,count\n";
  for (const auto& c : cells) {
    if (c.stat) {
      out += fmt::format("{},{},{:.6f},{:.6f},{}\n", c.setting, c.scorer, c.stat->mean, c.stat->stddev, c.stat->count);
    } else {
      out += fmt::format("{},{},failed,,0\n", c.setting, c.scorer);
    }
  }
  return out;
}

std::string AblationReport::to_text() const {
  std::string out = fmt::format("ablation over {} (seed {})\n", axis, seed);
  if (!note.empty()) out += note + "\n";
  for (const auto& w : warnings) out += "warning: " + w + "\n";
  std::size_t w1 = 7, w2 = 6;
  for (const auto& c : cells) {
    w1 = std::max(w1, c.setting.size());
    w2 = std::max(w2, c.scorer.size());
  }
  out += fmt::format("{:<{}}  {:<{}}  {}\n", "setting", w1, "scorer", w2, "mean +/- stddev");
  for (const auto& c : cells) {
    out += fmt::format("{:<{}}  {:<{}}  {}\n", c.setting, w1, c.scorer, w2, fmt_stat(c.stat));
  }
  return out;
}

bool is_untrained(const trainer::Model& model) {
  trainer::Model fresh(model.config(), model.vocab());
  const auto a = model.parameters();
  const auto b = fresh.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].tensor.value() != b[i].tensor.value()) return false;
  }
  return true;
}

AblationReport ablate_prompt_length(const trainer::Model& model, const ScorerList& scorers,
                                    const LengthAblationOptions& options) {
  if (options.lengths.empty()) throw ConfigError("no prompt lengths to ablate");
  if (options.n_samples < 1) throw ConfigError("n_samples must be positive");
  if (scorers.empty()) throw ConfigError("no scorers");

  std::vector<std::string> prompts = options.prompts;
  if (prompts.empty()) {
    for (const auto& r : corpus::generate_toy_world(static_cast<std::size_t>(options.n_samples), options.seed)) {
      prompts.push_back(coarse_of(r));
    }
  }

  AblationReport report;
  report.axis = "prompt length";
  report.seed = options.seed;
  report.note = "images are toy-world renders of the refined prompts";
  if (is_untrained(model)) report.warnings.push_back("model is untrained; scores reflect random refinements");

  const int size = model.config().image_size;
  for (int len : options.lengths) {
    if (len < 1) throw ConfigError("prompt lengths must be positive");
    std::vector<std::vector<double>> values(scorers.size());
    std::vector<std::string> errors(scorers.size());
    for (int i = 0; i < options.n_samples; ++i) {
      const std::string& coarse = prompts[static_cast<std::size_t>(i) % prompts.size()];
      sampler::SamplingConfig sc = options.sampling;
      sc.stride = len;
      sc.n_candidates = 1;
      sc.seed = derive_seed(options.seed, {static_cast<std::uint64_t>(i)});
      auto session = sampler::start_session(model, coarse, sc);
      sampler::continue_round(model, session);
      const std::string refined = session.rounds.back().candidates.front().text;
      const corpus::Image image = corpus::render_prompt(refined, size, size);
      for (std::size_t s = 0; s < scorers.size(); ++s) {
        if (!errors[s].empty()) continue;
        try {
          values[s].push_back(scorers[s]->score({&image, refined}));
        } catch (const std::exception& e) {
          errors[s] = e.what();
        }
      }
    }
    for (std::size_t s = 0; s < scorers.size(); ++s) {
      ReportCell cell{std::to_string(len), scorers[s]->name(), std::nullopt, errors[s]};
      if (errors[s].empty()) cell.stat = summarize(values[s]);
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

double diversity_metric(const std::vector<std::vector<std::string>>& candidate_sets) {
  if (candidate_sets.empty()) throw ConfigError("no candidate sets");
  double total = 0.0;
  for (const auto& set : candidate_sets) {
    if (set.size() < 2) throw ConfigError("diversity needs at least two candidates per set");
    std::vector<std::set<std::string>> words;
    for (const auto& c : set) {
      const auto w = text::split_words(c);
      words.emplace_back(w.begin(), w.end());
    }
    double sum = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < words.size(); ++i) {
      for (std::size_t j = i + 1; j < words.size(); ++j) {
        std::size_t inter = 0;
        for (const auto& w : words[i]) inter += words[j].count(w);
        const std::size_t uni = words[i].size() + words[j].size() - inter;
        const double jaccard = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
        sum += 1.0 - jaccard;
        ++pairs;
      }
    }
    total += sum / pairs;
  }
  return total / static_cast<double>(candidate_sets.size());
}

AblationReport ComparisonTable::as_report(std::uint64_t seed) const {
  AblationReport r;
  r.axis = "model";
  r.seed = seed;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      r.cells.push_back({rows[i], columns[j], cells[i][j], cells[i][j] ? "" : "scorer failed"});
    }
  }
  return r;
}

std::string ComparisonTable::to_text() const {
  std::size_t w0 = 4;
  for (const auto& r : rows) w0 = std::max(w0, r.size());
  std::vector<std::size_t> w(columns.size(), 12);
  for (std::size_t j = 0; j < columns.size(); ++j) w[j] = std::max(w[j], columns[j].size());
  auto cell = [](const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : std::string("failed"); };

  std::string out = fmt::format("{:<{}}", "", w0);
  for (std::size_t j = 0; j < columns.size(); ++j) out += fmt::format("  {:>{}}", columns[j], w[j]);
  out += "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += fmt::format("{:<{}}", rows[i], w0);
    for (std::size_t j = 0; j < columns.size(); ++j) {
      out += fmt::format("  {:>{}}", cell(cells[i][j] ? std::optional<double>(cells[i][j]->mean) : std::nullopt),
                         w[j]);
    }
    out += "\n";
  }
  out += fmt::format("{:<{}}", "mean", w0);
  for (std::size_t j = 0; j < columns.size(); ++j) out += fmt::format("  {:>{}}", cell(column_means[j]), w[j]);
  out += "\n";
  return out;
}

ComparisonTable compare_models(std::span<const NamedModel> models, const ScorerList& scorers,
                               std::span<const corpus::TripletRecord> slice, const sampler::SamplingConfig& sampling) {
  if (models.empty()) throw ConfigError("compare_models needs at least one model");
  if (slice.empty()) throw ConfigError("empty corpus slice");
  ComparisonTable t;
  for (const auto& s : scorers) t.columns.push_back(s->name());
  for (const auto& m : models) {
    if (m.model == nullptr) throw ConfigError("null model for " + m.label);
    t.rows.push_back(m.label);
    const int size = m.model->config().image_size;
    std::vector<std::vector<double>> values(scorers.size());
    std::vector<bool> failed(scorers.size(), false);
    for (std::size_t i = 0; i < slice.size(); ++i) {
      const std::string coarse = coarse_of(slice[i]);
      sampler::SamplingConfig sc = sampling;
      sc.seed = derive_seed(sampling.seed, {static_cast<std::uint64_t>(i)});
      std::string refined = coarse;
      try {
        const auto gen = sampler::generate(*m.model, coarse, sc);
        if (!gen.text.empty()) refined = gen.text;
      } catch (const Error&) {
        std::fill(failed.begin(), failed.end(), true);
        break;
      }
      const corpus::Image image = corpus::render_prompt(refined, size, size);
      for (std::size_t s = 0; s < scorers.size(); ++s) {
        if (failed[s]) continue;
        try {
          values[s].push_back(scorers[s]->score({&image, refined}));
        } catch (const std::exception&) {
          failed[s] = true;
        }
      }
    }
    std::vector<std::optional<Stat>> row;
    for (std::size_t s = 0; s < scorers.size(); ++s) {
      row.push_back(failed[s] ? std::nullopt : std::optional<Stat>(summarize(values[s])));
    }
    t.cells.push_back(std::move(row));
  }
  for (std::size_t j = 0; j < t.columns.size(); ++j) {
    double sum = 0.0;
    int n = 0;
    for (const auto& row : t.cells) {
      if (row[j]) {
        sum += row[j]->mean;
        ++n;
      }
    }
    t.column_means.push_back(n > 0 ? std::optional<double>(sum / n) : std::nullopt);
  }
  return t;
}

std::vector<Variant> loss_variants() {
  return {{"wo mse+clip", false, false}, {"wo mse", false, true}, {"wo clip", true, false}, {"full", true, true}};
}

std::vector<TrainedVariant> train_variants(const trainer::Model& base, std::span<const corpus::TripletRecord> corpus,
                                           const trainer::TrainConfig& cfg, std::span<const Variant> variants) {
  std::vector<TrainedVariant> out;
  for (const auto& v : variants) {
    trainer::TrainConfig c = cfg;
    c.use_mse = v.use_mse;
    c.use_clip = v.use_clip;
    trainer::Trainer t(base.clone(), c);
    trainer::fit(t, corpus);
    out.push_back({v.label, std::move(t.model())});
  }
  return out;
}

AblationReport afem_diversity(const trainer::Model& with_afem, const trainer::Model& without_afem,
                              std::span<const std::string> prompts, const sampler::SamplingConfig& sampling) {
  if (prompts.empty()) throw ConfigError("no prompts");
  if (sampling.n_candidates < 2) throw ConfigError("diversity needs at least two candidates");
  AblationReport r;
  r.axis = "afem";
  r.seed = sampling.seed;
  r.note = "diversity is mean pairwise token-Jaccard distance of first-round candidates (proxy metric)";
  for (const auto& [label, model] : {std::pair<std::string, const trainer::Model*>{"afem on", &with_afem},
                                     std::pair<std::string, const trainer::Model*>{"afem off", &without_afem}}) {
    std::vector<double> values;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      sampler::SamplingConfig sc = sampling;
      sc.seed = derive_seed(sampling.seed, {static_cast<std::uint64_t>(i)});
      auto session = sampler::start_session(*model, prompts[i], sc);
      sampler::continue_round(*model, session);
      std::vector<std::string> texts;
      for (const auto& c : session.rounds.back().candidates) texts.push_back(c.text);
      values.push_back(diversity_metric({texts}));
    }
    r.cells.push_back({label, "diversity", summarize(values), ""});
  }
  return r;
}

}  // namespace prefix::evalhub
