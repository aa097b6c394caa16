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

// Synthetic prompt/image corpus. Fine prompts are template sentences over a
// closed vocabulary of objects, colors, scenes, styles and quality
// modifiers; images are rendered from the prompt text by a pure function.
//
// Rasters are drawn on a grid of kVaeFactor-pixel cells, each cell a single
// color, so every toy image lies in the range of the latent projection.

#ifndef PREFIX_CORPUS_TOY_WORLD_HPP_
#define PREFIX_CORPUS_TOY_WORLD_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefix/common/rng.hpp"
#include "prefix/corpus/image.hpp"
#include "prefix/corpus/record.hpp"

namespace prefix::corpus {

struct ToyWorldOptions {
  int height = 32;
  int width = 32;
  // Fraction of prompts carrying a flagged word, to exercise the filter.
  double nsfw_rate = 0.04;
};

std::span<const std::string_view> toy_colors();
std::span<const std::string_view> toy_objects();
std::span<const std::string_view> toy_styles();
std::span<const std::string_view> toy_scenes();     // full phrases, e.g. "in a forest"
std::span<const std::string_view> toy_modifiers();  // e.g. "highly detailed"

std::string sample_fine_prompt(Rng& rng, double nsfw_rate = 0.0);

// Deterministic raster for any prompt text. Unknown words are ignored;
// missing elements fall back to neutral defaults. height and width must be
// multiples of kVaeFactor. Values are multiples of 1/255.
Image render_prompt(std::string_view prompt, int height = 32, int width = 32);

// Records "toy<seed>-<index>" with inline rasters, coarse prompts from the
// default summarizer and keyword NSFW scores. Record i depends only on
// (seed, i).
std::vector<TripletRecord> generate_toy_world(std::size_t n, std::uint64_t seed,
                                              const ToyWorldOptions& options = {});

}  // namespace prefix::corpus

#endif  // PREFIX_CORPUS_TOY_WORLD_HPP_
