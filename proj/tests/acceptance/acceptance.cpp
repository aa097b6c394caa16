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

// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "prefix/afem/afem.hpp"
#include "prefix/common/error.hpp"
#include "prefix/corpus/filter.hpp"
#include "prefix/corpus/jsonl.hpp"
#include "prefix/corpus/record.hpp"
#include "prefix/corpus/split.hpp"
#include "prefix/corpus/toy_world.hpp"
#include "prefix/diffusion/diffusion.hpp"
#include "prefix/evalhub/evalhub.hpp"
#include "prefix/sampler/sampler.hpp"
#include "prefix/trainer/gradcheck.hpp"
#include "prefix/trainer/train.hpp"
#include "support/fixtures.hpp"

namespace {

using namespace prefix;
using ag::Matrix;
using ag::Tensor;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back((ok ? "" : "FAILED ") + what);
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double max_abs(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

// The model trained by the smoke run, reused by the length ablation.
std::optional<trainer::Model> g_trained;

Outcome gradient_checks() {
  Outcome o;
  const auto t0 = Clock::now();
  for (auto term : {trainer::LossTerm::kMse, trainer::LossTerm::kSft, trainer::LossTerm::kClip}) {
    const auto r = trainer::grad_check(term, 0);
    o.check(r.max_rel_error <= 1e-4,
            fmt::format("{} max rel err {:.2e} over {} scalars", trainer::loss_term_name(term), r.max_rel_error,
                        r.checked));
  }
  const auto mc = trainer::ModelConfig::tiny();
  o.check(mc.text.n <= 8 && mc.text.m <= 8 && mc.afem_hidden <= 8 && mc.denoiser_channels <= 8, "dims <= 8");
  const double s = seconds_since(t0);
  o.check(s < 60.0, fmt::format("{:.1f} s", s));
  return o;
}

Outcome oracle_equivalences() {
  Outcome o;
  {
    Rng r(5);
    refiner::ModelDims d;
    d.n = d.m = 8;
    d.encoder = {1, 2, 16};
    d.decoder = {2, 2, 16};
    d.max_len = 12;
    refiner::TextEncoder enc(8, d, r);
    refiner::TextDecoder dec(8, d, r);
    const auto memory = enc.encode(text::make_sequence({4, 6, 7})).sequence;
    const std::vector<text::TokenId> target{text::kBos, 5, 4, 7, text::kEos};
    const double tf = dec.decode_teacher_forced(memory, text::make_sequence(target)).loss.item();
    double nll = 0.0;
    for (std::size_t i = 1; i < target.size(); ++i) {
      const std::vector<text::TokenId> prefix(target.begin(), target.begin() + static_cast<long>(i));
      const auto logits = dec.decoder_step(memory, prefix);
      double z = 0.0;
      for (int v = 0; v < 8; ++v) z += std::exp(logits(v));
      nll += std::log(z) - logits(target[i]);
    }
    nll /= 4.0;
    o.check(std::abs(tf - nll) <= 1e-9, fmt::format("teacher-forced vs enumerated NLL diff {:.1e}", tf - nll));
  }
  {
    Rng r(6);
    const Matrix patches = testing::random_matrix(r, 6, 5);
    Matrix w = testing::random_matrix(r, 1, 6).cwiseAbs();
    w /= w.sum();
    const Matrix pooled = afem::adaptive_pool(Tensor(patches), Tensor(w)).value();
    Matrix loop = Matrix::Zero(1, 5);
    for (int i = 0; i < 6; ++i) {
      for (int c = 0; c < 5; ++c) loop(0, c) += w(0, i) * patches(i, c);
    }
    o.check(max_abs(pooled, loop) <= 1e-9, fmt::format("adaptive_pool vs loop {:.1e}", max_abs(pooled, loop)));
  }
  {
    const auto f = sampler::filter_probabilities(std::vector<double>{0.5, 0.3, 0.15, 0.05}, 4, 0.95);
    const bool ok = std::abs(f[0] - 10.0 / 19) < 1e-12 && std::abs(f[1] - 6.0 / 19) < 1e-12 &&
                    std::abs(f[2] - 3.0 / 19) < 1e-12 && f[3] == 0.0;
    o.check(ok, fmt::format("nucleus {{{:.6f}, {:.6f}, {:.6f}, {}}}", f[0], f[1], f[2], f[3]));
  }
  return o;
}

Outcome loss_composition() {
  Outcome o;
  trainer::TrainConfig cfg;
  const double full = trainer::total_loss(1, 2, 3, cfg);
  o.check(std::abs(full - 1.5) < 1e-15, fmt::format("total(1,2,3) = {}", full));
  auto with = [&](bool mse, bool clip) {
    trainer::TrainConfig c = cfg;
    c.use_mse = mse;
    c.use_clip = clip;
    return trainer::total_loss(1, 2, 3, c);
  };
  o.check(std::abs(with(false, true) - 0.5) < 1e-15, "wo mse = 0.5");
  o.check(std::abs(with(true, false) - 1.2) < 1e-15, "wo clip = 1.2");
  o.check(std::abs(with(false, false) - 0.2) < 1e-15, "wo both = 0.2");

  const auto records = testing::toy_records(4, 1);
  const auto model = testing::tiny_model(records);
  std::vector<trainer::PreparedRecord> prepared;
  for (const auto& r : records) prepared.push_back(trainer::prepare_record(model, r));
  trainer::TrainConfig off = cfg;
  off.use_mse = off.use_clip = false;
  const auto b = trainer::compute_losses(model, records, prepared, off, 0);
  o.check(!b.mse.defined() && !b.clip.defined() && std::abs(b.values.total - 0.1 * b.values.sft) < 1e-12,
          "disabled terms skipped in training losses");
  return o;
}

Outcome config_defaults() {
  Outcome o;
  const sampler::SamplingConfig s;
  const trainer::TrainConfig t;
  o.check(s.top_p == 0.95 && s.top_k == 50 && s.stride == 6 && s.n_candidates == 3,
          fmt::format("p={} K={} stride={} candidates={}", s.top_p, s.top_k, s.stride, s.n_candidates));
  o.check(corpus::kDefaultNsfwThreshold == 0.9, fmt::format("nsfw threshold {}", corpus::kDefaultNsfwThreshold));
  const auto caps = std::array{corpus::bucket_range(corpus::Bucket::kShort).cap,
                               corpus::bucket_range(corpus::Bucket::kMedium).cap,
                               corpus::bucket_range(corpus::Bucket::kLong).cap};
  o.check(caps == std::array<std::size_t, 3>{5, 10, 15}, fmt::format("bucket caps ({}, {}, {})", caps[0], caps[1], caps[2]));
  o.check(t.learning_rate == 5e-5 && t.batch_size == 16 && t.alpha1 == 0.1 && t.alpha2 == 0.1,
          fmt::format("lr={} B={} alpha={}/{}", t.learning_rate, t.batch_size, t.alpha1, t.alpha2));
  return o;
}

std::vector<std::vector<Matrix>> block_values(const trainer::Model& m, std::span<const trainer::Block> blocks) {
  std::vector<std::vector<Matrix>> out;
  for (auto b : blocks) {
    out.emplace_back();
    for (const auto& p : m.parameters(b)) out.back().push_back(p.tensor.value());
  }
  return out;
}

Outcome training_smoke() {
  Outcome o;
  const auto t0 = Clock::now();
  corpus::ToyWorldOptions tw;
  tw.nsfw_rate = 0.0;
  const auto records = corpus::generate_toy_world(256, 0, tw);
  trainer::ModelConfig mc;
  trainer::Model model(mc, trainer::corpus_vocabulary(records));
  trainer::PretrainConfig pc;
  model = trainer::pretrain_backbones(std::move(model), records, pc);

  trainer::TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  const std::vector<trainer::Block> frozen{trainer::Block::kDecoder, trainer::Block::kImageEncoder,
                                           trainer::Block::kDenoiser, trainer::Block::kVae};
  const auto before = block_values(model, frozen);
  trainer::Trainer t(std::move(model), cfg);
  const auto result = trainer::fit(t, records);
  const auto& c = result.curve;
  const double ratio = c.back().loss.total / c.front().loss.total;
  o.check(c.size() == 5, fmt::format("{} epochs", c.size()));
  o.check(ratio <= 0.8, fmt::format("epoch total {:.4f} -> {:.4f}, ratio {:.3f}", c.front().loss.total,
                                    c.back().loss.total, ratio));
  o.check(block_values(t.model(), frozen) == before, "frozen blocks byte-identical");
  const double s = seconds_since(t0);
  o.check(s < 600.0, fmt::format("{:.1f} s", s));
  g_trained = std::move(t.model());
  return o;
}

Outcome diffusion_checks() {
  Outcome o;
  Rng r(1);
  const Matrix z0 = testing::random_matrix(r, 4, 4);
  const Matrix eps = testing::random_matrix(r, 4, 4);
  o.check(diffusion::add_noise(z0, eps, 1.0) == z0 && diffusion::add_noise(z0, eps, 0.0) == eps,
          "endpoints exact");

  const double abar = 0.3;
  double sum = 0.0, sq = 0.0;
  constexpr int kDraws = 10000;
  for (int i = 0; i < kDraws; ++i) {
    const double z = diffusion::add_noise(Matrix::Constant(1, 1, 0.8), Matrix::Constant(1, 1, r.normal()), abar)(0, 0);
    sum += z;
    sq += z * z;
  }
  const double mean = sum / kDraws;
  const double var = sq / kDraws - mean * mean;
  o.check(std::abs(var / (1 - abar) - 1) <= 0.05, fmt::format("variance {:.4f} vs {:.4f}", var, 1 - abar));

  const diffusion::Vae vae(r);
  double worst = 0.0;
  for (const auto& rec : corpus::generate_toy_world(16, 3)) {
    const auto image = corpus::resolve_image(rec);
    const auto back = vae.decode(vae.encode(image), diffusion::latent_shape(image.height, image.width));
    for (std::size_t i = 0; i < image.data.size(); ++i) worst = std::max(worst, std::abs(back.data[i] - image.data[i]));
  }
  o.check(worst <= 1e-6, fmt::format("VAE round trip {:.1e}", worst));
  return o;
}

Matrix permute_rows(const Matrix& m, const std::vector<int>& perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) out.row(static_cast<long>(i)) = m.row(perm[i]);
  return out;
}

Outcome afem_checks() {
  Outcome o;
  Rng r(2);
  const afem::DynamicWeightNet net(8, 16, 2, r);
  double simplex = 0.0, neg = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Matrix w = net.weights(Tensor(testing::random_matrix(r, 9, 8, 2.0))).value();
    simplex = std::max(simplex, std::abs(w.sum() - 1.0));
    neg = std::min(neg, w.minCoeff());
  }
  o.check(simplex <= 1e-9 && neg >= 0.0, fmt::format("simplex |sum-1| {:.1e}", simplex));

  const Matrix same = net.weights(Tensor(testing::random_matrix(r, 1, 8).replicate(6, 1))).value();
  o.check((same.array() - 1.0 / 6).abs().maxCoeff() <= 1e-12, "identical patches give uniform weights");

  const Matrix x = testing::random_matrix(r, 7, 8);
  const std::vector<int> perm{4, 0, 6, 2, 1, 5, 3};
  const Matrix w = net.weights(Tensor(x)).value();
  const Matrix wp = net.weights(Tensor(permute_rows(x, perm))).value();
  double eq = 0.0;
  for (int i = 0; i < 7; ++i) eq = std::max(eq, std::abs(wp(0, i) - w(0, perm[i])));
  o.check(eq <= 1e-12, fmt::format("permutation equivariance {:.1e}", eq));

  const Matrix t = testing::random_matrix(r, 7, 5);
  const Matrix v = testing::random_matrix(r, 7, 5);
  const double a = afem::loss_clip(Tensor(t), Tensor(v)).item();
  const double b = afem::loss_clip(Tensor(permute_rows(t, perm)), Tensor(permute_rows(v, perm))).item();
  o.check(std::abs(a - b) <= 1e-9, fmt::format("L_clip batch permutation {:.1e}", a - b));

  Matrix ortho(2, 3);
  ortho << 1, 0, 0, 0, 1, 0;
  const double l1 = afem::loss_clip(Tensor(ortho), Tensor(ortho)).item();
  o.check(std::abs(l1 + 1.0) <= 1e-9, fmt::format("B=2 orthogonal L = {:.12f}", l1));
  const Matrix ident = Matrix::Constant(2, 3, 0.7);
  const double l0 = afem::loss_clip(Tensor(ident), Tensor(ident)).item();
  o.check(std::abs(l0) <= 1e-9, fmt::format("identical vectors L = {:.12f}", l0));
  return o;
}

Outcome session_checks() {
  Outcome o;
  const auto records = testing::toy_records(40, 3);
  const auto model = testing::tiny_model(records);
  Rng pick(77);
  int prefix_bad = 0, stride_bad = 0, replay_bad = 0, rounds = 0;
  for (int s = 0; s < 1000; ++s) {
    sampler::SamplingConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(s);
    auto session =
        sampler::start_session(model, records[pick.index(records.size())].coarse_prompts.begin()->second, cfg);
    for (int k = 0; k < 3 && !session.complete; ++k) {
      const auto base = session.current_tokens();
      try {
        sampler::continue_round(model, session);
      } catch (const SessionError& e) {
        if (e.kind() != SessionError::Kind::kComplete) ++replay_bad;
        break;
      }
      ++rounds;
      for (const auto& c : session.rounds.back().candidates) {
        if (c.tokens.size() < base.size() || !std::equal(base.begin(), base.end(), c.tokens.begin())) ++prefix_bad;
        const auto added = c.tokens.size() - base.size();
        if (c.eos ? added > 6 : added != 6) ++stride_bad;
      }
      sampler::select(session, static_cast<int>(pick.index(3)));
    }
    if (!(sampler::replay_session(model, sampler::session_to_json(session)) == session)) ++replay_bad;
  }
  o.check(prefix_bad == 0, fmt::format("prefix preserved ({} rounds)", rounds));
  o.check(stride_bad == 0, "stride-6 extension");
  o.check(replay_bad == 0, "deterministic replay");

  const std::vector<double> p{0.4, 0.3, 0.2, 0.1};
  const auto f = sampler::filter_probabilities(p, static_cast<int>(p.size()), 1.0);
  Rng rng(2024);
  std::vector<int> counts(4, 0);
  constexpr int kDraws = 50000;
  for (int i = 0; i < kDraws; ++i) ++counts[sampler::sample_index(f, rng)];
  double chi2 = 0.0;
  for (int i = 0; i < 4; ++i) chi2 += std::pow(counts[i] - kDraws * p[i], 2) / (kDraws * p[i]);
  // 0.99 quantile of chi-square with 3 degrees of freedom.
  o.check(chi2 < 11.345, fmt::format("chi2 {:.3f} < 11.345", chi2));
  return o;
}

Outcome corpus_checks() {
  Outcome o;
  corpus::ToyWorldOptions tw;
  tw.height = tw.width = 16;
  auto records = corpus::generate_toy_world(10000, 9, tw);
  int bad = 0;
  for (const auto& r : records) {
    for (auto b : corpus::kBuckets) {
      const auto& coarse = r.coarse_prompts.at(b);
      const auto words = text::split_words(coarse);
      const auto range = corpus::bucket_range(b);
      const auto fine = text::split_words(r.fine_prompt);
      const bool ok = fine.size() < range.floor ? words == fine
                                                : words.size() >= range.floor && words.size() <= range.cap;
      if (!ok) ++bad;
    }
  }
  o.check(bad == 0, fmt::format("bucket invariants on {} records", records.size()));

  Rng r(4);
  std::set<std::string> expected;
  for (auto& rec : records) {
    rec.nsfw_score = r.index(5) == 0 ? 0.9 : r.uniform();
    if (rec.nsfw_score < 0.9) expected.insert(rec.id);
  }
  const auto filtered = corpus::filter_nsfw(records, corpus::StoredScoreClassifier(), 0.9);
  std::set<std::string> kept;
  for (const auto& rec : filtered.retained) kept.insert(rec.id);
  o.check(kept == expected && filtered.retained.size() + filtered.removed.size() == records.size(),
          fmt::format("filter keeps {} of {}", kept.size(), records.size()));

  std::vector<std::string> ids;
  for (int i = 0; i < 81910; ++i) ids.push_back(fmt::format("r{:06d}", i));
  const auto split = corpus::split_ids(ids, 0, corpus::kDefaultTrainRatio);
  std::vector<std::string> both;
  std::set_intersection(split.train.begin(), split.train.end(), split.test.begin(), split.test.end(),
                        std::back_inserter(both));
  o.check(split.train.size() == 73718 && split.test.size() == 8192 && both.empty(),
          fmt::format("split {} / {}", split.train.size(), split.test.size()));

  records.resize(500);
  const std::string first = corpus::to_jsonl(records);
  std::istringstream in(first);
  const auto back = corpus::parse_jsonl(in);
  o.check(corpus::to_jsonl(back) == first && back == records, "JSONL round trip byte-stable");
  return o;
}

Outcome length_ablation() {
  Outcome o;
  const trainer::Model* model = g_trained ? &*g_trained : nullptr;
  std::optional<trainer::Model> fallback;
  if (model == nullptr) {
    fallback.emplace(testing::tiny_model(testing::toy_records(16, 0)));
    model = &*fallback;
  }
  evalhub::LengthAblationOptions opts;
  opts.n_samples = 8;
  const auto scorers = evalhub::default_scorers();
  const auto report = evalhub::ablate_prompt_length(*model, scorers, opts);
  std::set<std::string> settings;
  bool all_scored = true;
  for (const auto& c : report.cells) {
    settings.insert(c.setting);
    all_scored = all_scored && c.stat.has_value();
  }
  o.check(settings.size() == 6 && report.cells.size() == 6 * scorers.size() && all_scored,
          fmt::format("{} settings x {} scorers", settings.size(), scorers.size()));
  o.check(report.to_csv().rfind("setting,scorer,mean,stddev,count\n", 0) == 0, "CSV report");
  fmt::print("{}", report.to_text());
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient checks", gradient_checks},   {"oracle equivalences", oracle_equivalences},
      {"loss composition", loss_composition}, {"configuration defaults", config_defaults},
      {"training smoke", training_smoke},     {"diffusion", diffusion_checks},
      {"adaptive feature pooling", afem_checks}, {"refinement sessions", session_checks},
      {"corpus", corpus_checks},              {"prompt-length ablation", length_ablation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    std::string detail;
    for (const auto& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
    fmt::print("{} criterion {:2d} {} ({:.1f} s): {}\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
               seconds_since(t0), detail);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
