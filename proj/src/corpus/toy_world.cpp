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

#include "prefix/corpus/toy_world.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "prefix/common/error.hpp"
#include "prefix/corpus/filter.hpp"
#include "prefix/corpus/summarizer.hpp"
#include "prefix/textcore/vocabulary.hpp"

namespace prefix::corpus {

namespace {

struct Rgb {
  double r = 0, g = 0, b = 0;
};

constexpr Rgb rgb(int r, int g, int b) { return {r / 255.0, g / 255.0, b / 255.0}; }

constexpr std::array<std::string_view, 10> kColors = {"red",    "green", "blue",  "yellow", "purple",
                                                      "orange", "white", "black", "pink",   "teal"};
constexpr std::array<Rgb, 10> kColorValues = {
    rgb(220, 40, 40),   rgb(40, 170, 60),  rgb(40, 80, 220), rgb(240, 210, 40), rgb(140, 60, 180),
    rgb(240, 140, 30),  rgb(245, 245, 245), rgb(20, 20, 20), rgb(240, 130, 180), rgb(30, 160, 160)};

constexpr std::array<std::string_view, 10> kObjects = {"tree",  "house", "moon",  "mountain", "river",
                                                       "tower", "flower", "boat", "bird",     "castle"};
// 4x4 occupancy templates, top row first.
constexpr std::array<std::array<std::string_view, 4>, 10> kObjectMasks = {{
    {"0110", "1111", "0110", "0110"},
    {"0110", "1111", "1001", "1111"},
    {"0110", "1000", "1000", "0110"},
    {"0000", "0100", "1110", "1111"},
    {"1000", "0100", "0010", "0001"},
    {"0110", "0110", "0110", "0110"},
    {"0100", "1110", "0100", "0100"},
    {"0000", "0100", "1111", "0110"},
    {"1001", "0110", "0000", "0000"},
    {"1010", "1111", "1111", "1001"},
}};

constexpr std::array<std::string_view, 8> kScenePhrases = {
    "in a forest", "at sunset", "in the desert", "on the beach",
    "in space",    "in the snow", "in the city", "by the ocean"};
constexpr std::array<std::string_view, 8> kSceneWords = {"forest", "sunset", "desert", "beach",
                                                         "space",  "snow",   "city",   "ocean"};
constexpr std::array<Rgb, 8> kSceneValues = {rgb(34, 85, 45),   rgb(235, 120, 70), rgb(215, 180, 120),
                                             rgb(230, 215, 170), rgb(10, 10, 35),  rgb(230, 235, 245),
                                             rgb(110, 110, 120), rgb(30, 90, 150)};

constexpr std::array<std::string_view, 6> kStyles = {"watercolor", "neon",          "vintage",
                                                     "minimalist", "cyberpunk",     "impressionist"};

constexpr std::array<std::string_view, 8> kModifiers = {
    "highly detailed", "sharp focus",  "soft lighting",          "dramatic lighting",
    "4k resolution",   "best quality", "trending on artstation", "intricate"};

template <std::size_t N>
std::optional<std::size_t> find(const std::array<std::string_view, N>& list, std::string_view w) {
  for (std::size_t i = 0; i < N; ++i) {
    if (list[i] == w) return i;
  }
  return std::nullopt;
}

Rgb mix(Rgb a, Rgb b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}
Rgb mul(Rgb a, double s) { return {a.r * s, a.g * s, a.b * s}; }
Rgb contrast(Rgb a, double s) {
  return {0.5 + (a.r - 0.5) * s, 0.5 + (a.g - 0.5) * s, 0.5 + (a.b - 0.5) * s};
}
Rgb saturate(Rgb a, double s) {
  const double m = (a.r + a.g + a.b) / 3.0;
  return {m + (a.r - m) * s, m + (a.g - m) * s, m + (a.b - m) * s};
}
Rgb sepia(Rgb a) {
  return {0.393 * a.r + 0.769 * a.g + 0.189 * a.b, 0.349 * a.r + 0.686 * a.g + 0.168 * a.b,
          0.272 * a.r + 0.534 * a.g + 0.131 * a.b};
}

struct Scene {
  std::optional<std::size_t> object, object_color;
  std::optional<std::size_t> second, second_color;
  std::optional<std::size_t> scene, style;
  bool detailed = false, sharp = false, soft = false, dramatic = false, hires = false, best = false,
       trending = false, intricate = false;
};

Scene parse_scene(std::string_view prompt) {
  Scene s;
  std::optional<std::size_t> pending_color;
  for (const auto& w : text::split_words(prompt)) {
    if (auto c = find(kColors, w)) {
      pending_color = c;
    } else if (auto o = find(kObjects, w)) {
      if (!s.object) {
        s.object = o;
        s.object_color = pending_color;
      } else if (!s.second && *o != *s.object) {
        s.second = o;
        s.second_color = pending_color;
      }
      pending_color.reset();
    } else if (auto sc = find(kSceneWords, w)) {
      if (!s.scene) s.scene = sc;
    } else if (auto st = find(kStyles, w)) {
      if (!s.style) s.style = st;
    } else if (w == "detailed") {
      s.detailed = true;
    } else if (w == "sharp") {
      s.sharp = true;
    } else if (w == "soft") {
      s.soft = true;
    } else if (w == "dramatic") {
      s.dramatic = true;
    } else if (w == "4k") {
      s.hires = true;
    } else if (w == "best") {
      s.best = true;
    } else if (w == "trending") {
      s.trending = true;
    } else if (w == "intricate") {
      s.intricate = true;
    }
  }
  return s;
}

bool mask_at(std::size_t object, int ty, int tx) { return kObjectMasks[object][ty][tx] == '1'; }

}  // namespace

std::span<const std::string_view> toy_colors() { return kColors; }
std::span<const std::string_view> toy_objects() { return kObjects; }
std::span<const std::string_view> toy_styles() { return kStyles; }
std::span<const std::string_view> toy_scenes() { return kScenePhrases; }
std::span<const std::string_view> toy_modifiers() { return kModifiers; }

std::string sample_fine_prompt(Rng& rng, double nsfw_rate) {
  const std::size_t color = rng.index(kColors.size());
  const std::size_t object = rng.index(kObjects.size());
  std::string p = fmt::format("a {} {} {}", kColors[color], kObjects[object],
                              kScenePhrases[rng.index(kScenePhrases.size())]);
  if (rng.uniform() < 0.3) {
    std::size_t second = rng.index(kObjects.size() - 1);
    if (second >= object) ++second;
    p += fmt::format(" with a {} {}", kColors[rng.index(kColors.size())], kObjects[second]);
  }
  p += fmt::format(", {} style", kStyles[rng.index(kStyles.size())]);

  std::array<std::size_t, kModifiers.size()> order{};
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
  const std::size_t n_mod = 1 + rng.index(4);
  for (std::size_t i = 0; i < n_mod; ++i) p += fmt::format(", {}", kModifiers[order[i]]);

  if (rng.uniform() < nsfw_rate) p += ", nsfw";
  return p;
}

Image render_prompt(std::string_view prompt, int height, int width) {
  if (height <= 0 || width <= 0 || height % kVaeFactor != 0 || width % kVaeFactor != 0) {
    throw ShapeError("toy render size must be a positive multiple of " + std::to_string(kVaeFactor));
  }
  const Scene s = parse_scene(prompt);
  const int gh = height / kVaeFactor;
  const int gw = width / kVaeFactor;
  const bool minimalist = s.style && kStyles[*s.style] == "minimalist";
  const bool cyberpunk = s.style && kStyles[*s.style] == "cyberpunk";

  const Rgb bg_base = s.scene ? kSceneValues[*s.scene] : rgb(200, 200, 200);
  const Rgb obj_color = s.object_color ? kColorValues[*s.object_color] : rgb(128, 128, 128);
  const Rgb second_color = s.second_color ? kColorValues[*s.second_color] : rgb(90, 90, 90);

  std::vector<Rgb> cells(static_cast<std::size_t>(gh) * gw);
  std::vector<bool> is_object(cells.size(), false);
  for (int cy = 0; cy < gh; ++cy) {
    for (int cx = 0; cx < gw; ++cx) {
      const int ty = cy * 4 / gh;
      const int tx = cx * 4 / gw;
      Rgb c = bg_base;
      if (minimalist) {
        c = rgb(235, 235, 230);
      } else {
        const double gradient = gh > 1 ? 1.1 - 0.2 * cy / (gh - 1) : 1.0;
        c = mul(c, gradient);
        if (cyberpunk) {
          const double t = gw > 1 ? static_cast<double>(cx) / (gw - 1) : 0.5;
          c = mix(c, mix(rgb(200, 40, 160), rgb(30, 200, 220), t), 0.6);
        }
      }
      const std::size_t k = static_cast<std::size_t>(cy) * gw + cx;
      if (s.second && mask_at(*s.second, ty, 3 - tx)) {
        c = second_color;
        is_object[k] = true;
      }
      if (s.object && mask_at(*s.object, ty, tx)) {
        c = obj_color;
        is_object[k] = true;
      }
      cells[k] = c;
    }
  }

  for (int cy = 0; cy < gh; ++cy) {
    for (int cx = 0; cx < gw; ++cx) {
      const std::size_t k = static_cast<std::size_t>(cy) * gw + cx;
      const bool parity = (cx + cy) % 2 == 0;
      Rgb c = cells[k];
      if (s.style) {
        const auto style = kStyles[*s.style];
        if (style == "watercolor") c = mix(c, rgb(255, 255, 255), 0.45);
        if (style == "neon") c = is_object[k] ? saturate(c, 1.5) : mul(c, 0.25);
        if (style == "vintage") c = sepia(c);
        if (style == "impressionist") c = mul(c, parity ? 1.12 : 0.88);
      }
      if (s.detailed && is_object[k]) c = mul(c, parity ? 1.10 : 0.90);
      if (s.intricate) c = mul(c, parity ? 0.94 : 1.06);
      if (s.sharp) c = contrast(c, 1.3);
      if (s.soft) c = contrast(c, 0.75);
      if (s.hires) c = contrast(c, 1.1);
      if (s.best) c = saturate(c, 1.15);
      if (s.trending) c = saturate(c, 1.1);
      if (s.dramatic && (cx == 0 || cx == gw - 1) && (cy == 0 || cy == gh - 1)) c = mul(c, 0.6);
      cells[k] = c;
    }
  }

  Image img(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Rgb& c = cells[static_cast<std::size_t>(y / kVaeFactor) * gw + x / kVaeFactor];
      const double v[3] = {c.r, c.g, c.b};
      for (int ch = 0; ch < 3; ++ch) {
        img.at(y, x, ch) = std::lround(std::clamp(v[ch], 0.0, 1.0) * 255.0) / 255.0;
      }
    }
  }
  return img;
}

std::vector<TripletRecord> generate_toy_world(std::size_t n, std::uint64_t seed,
                                              const ToyWorldOptions& options) {
  if (n == 0) throw RecordError("toy world needs n >= 1");
  const KeywordNsfwClassifier classifier;
  std::vector<TripletRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, {i}));
    TripletRecord r;
    r.id = fmt::format("toy{}-{:06d}", seed, i);
    r.fine_prompt = sample_fine_prompt(rng, options.nsfw_rate);
    r.coarse_prompts = summarize_to_buckets(r.fine_prompt);
    r.gen_params.step = 50;
    r.gen_params.seed = static_cast<std::int64_t>(rng.next_u64() & 0x7fffffff);
    r.gen_params.height = options.height;
    r.gen_params.width = options.width;
    r.image_ref = inline_image_ref(render_prompt(r.fine_prompt, options.height, options.width));
    r.nsfw_score = classifier.score(r);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace prefix::corpus
