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

#ifndef PREFIX_TESTS_SUPPORT_FIXTURES_HPP_
#define PREFIX_TESTS_SUPPORT_FIXTURES_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "prefix/autograd/ops.hpp"
#include "prefix/common/rng.hpp"
#include "prefix/corpus/toy_world.hpp"
#include "prefix/trainer/model.hpp"
#include "prefix/trainer/train.hpp"

namespace prefix::testing {

inline std::vector<corpus::TripletRecord> toy_records(std::size_t n, std::uint64_t seed, int size = 16) {
  corpus::ToyWorldOptions o;
  o.height = o.width = size;
  o.nsfw_rate = 0.0;
  return corpus::generate_toy_world(n, seed, o);
}

inline trainer::Model tiny_model(const std::vector<corpus::TripletRecord>& records, std::uint64_t seed = 0) {
  trainer::ModelConfig mc = trainer::ModelConfig::tiny();
  mc.seed = seed;
  return trainer::Model(mc, trainer::corpus_vocabulary(records));
}

inline ag::Matrix random_matrix(Rng& rng, ag::Index rows, ag::Index cols, double scale = 1.0) {
  ag::Matrix m(rows, cols);
  for (ag::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// Max relative error between the analytic gradient of sum(f(inputs) * probe)
// and central differences, over every input entry.
inline double op_grad_error(const std::function<ag::Tensor(const std::vector<ag::Tensor>&)>& f,
                            std::vector<ag::Matrix> values, std::uint64_t seed = 1, double h = 1e-6) {
  std::vector<ag::Tensor> inputs;
  for (auto& v : values) inputs.emplace_back(v, true);
  const ag::Tensor out = f(inputs);
  Rng rng(seed);
  const ag::Matrix probe = random_matrix(rng, out.rows(), out.cols());
  ag::backward(ag::sum(ag::mul(out, ag::Tensor(probe))));

  auto eval = [&]() {
    ag::NoGradGuard g;
    return f(inputs).value().cwiseProduct(probe).sum();
  };
  double worst = 0.0;
  for (auto& t : inputs) {
    const ag::Matrix analytic = t.has_grad() ? t.grad() : ag::Matrix::Zero(t.rows(), t.cols());
    ag::Matrix& w = t.mutable_value();
    for (ag::Index i = 0; i < w.size(); ++i) {
      const double saved = w.data()[i];
      w.data()[i] = saved + h;
      const double up = eval();
      w.data()[i] = saved - h;
      const double down = eval();
      w.data()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic.data()[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}));
    }
  }
  return worst;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("prefix_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace prefix::testing

#endif  // PREFIX_TESTS_SUPPORT_FIXTURES_HPP_
