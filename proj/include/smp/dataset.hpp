/*
 * Copyright 2026 The SMP Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "smp/error.hpp"
#include "smp/image_io.hpp"
#include "smp/tensor.hpp"

namespace smp {

inline constexpr std::uint8_t ignore_label = 255;

struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> labels;  // row-major

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), labels(h * w, fill) {}

  std::uint8_t& operator()(std::size_t r, std::size_t c) { return labels[r * width + c]; }
  std::uint8_t operator()(std::size_t r, std::size_t c) const { return labels[r * width + c]; }
  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

inline void check_labels(const LabelMap& m, std::size_t classes) {
  for (auto v : m.labels)
    if (v != ignore_label && v >= classes)
      fail(ErrorKind::label, "label " + std::to_string(v) + " >= class count " + std::to_string(classes));
}

enum SynthClass : std::uint8_t { background = 0, blob = 1, thin_line = 2, small_dot = 3 };

struct SynthConfig {
  std::size_t height = 80;
  std::size_t width = 80;
  std::size_t classes = 4;
  std::size_t blobs = 3;
  std::size_t lines = 2;
  std::size_t dots = 6;
  double noise = 0.12;
  std::uint64_t seed = 0;
};

struct Sample {
  Tensor<float> image;  // (1, 3, h, w), values in [0, 1]
  LabelMap label;
};

namespace detail {

inline constexpr std::array<std::array<float, 3>, 4> class_color{{
    {0.30f, 0.30f, 0.32f},  // background
    {0.70f, 0.42f, 0.35f},  // blob
    {0.42f, 0.68f, 0.45f},  // thin line
    {0.45f, 0.50f, 0.75f},  // small dot
}};

inline void paint_disk(LabelMap& m, double cy, double cx, double ry, double rx, std::uint8_t cls) {
  const auto r0 = static_cast<long>(std::floor(cy - ry)), r1 = static_cast<long>(std::ceil(cy + ry));
  const auto c0 = static_cast<long>(std::floor(cx - rx)), c1 = static_cast<long>(std::ceil(cx + rx));
  for (long r = std::max(r0, 0L); r <= std::min(r1, static_cast<long>(m.height) - 1); ++r)
    for (long c = std::max(c0, 0L); c <= std::min(c1, static_cast<long>(m.width) - 1); ++c) {
      const double dy = (static_cast<double>(r) - cy) / ry, dx = (static_cast<double>(c) - cx) / rx;
      if (dy * dy + dx * dx <= 1.0) m(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = cls;
    }
}

// Rasterizes a segment one pixel wide, plus a neighbour row/column when thick.
inline std::vector<std::pair<std::size_t, std::size_t>> line_pixels(const LabelMap& m, double y0, double x0,
                                                                    double y1, double x1, bool thick) {
  std::vector<std::pair<std::size_t, std::size_t>> px;
  const double len = std::max(std::abs(y1 - y0), std::abs(x1 - x0));
  const bool steep = std::abs(y1 - y0) > std::abs(x1 - x0);
  const auto steps = static_cast<std::size_t>(std::ceil(len));
  auto push = [&](long r, long c) {
    if (r < 0 || c < 0 || r >= static_cast<long>(m.height) || c >= static_cast<long>(m.width)) return;
    const std::pair<std::size_t, std::size_t> p{static_cast<std::size_t>(r), static_cast<std::size_t>(c)};
    if (std::find(px.begin(), px.end(), p) == px.end()) px.push_back(p);
  };
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = steps ? static_cast<double>(i) / static_cast<double>(steps) : 0.0;
    const long r = std::lround(y0 + t * (y1 - y0));
    const long c = std::lround(x0 + t * (x1 - x0));
    push(r, c);
    if (thick) steep ? push(r, c + 1) : push(r + 1, c);
  }
  return px;
}

}  // namespace detail

/// Renders one labelled image: elliptic blobs, thin lines (1-2 px) and small
/// dots (radius 1-2 px) over a background, with class colours plus seeded
/// uniform noise. Pure function of (cfg.seed, index).
inline Sample gen_synthetic(const SynthConfig& cfg, std::uint64_t index) {
  if (cfg.height < 8 || cfg.width < 8) fail(ErrorKind::config, "synthetic images must be at least 8x8");
  if (cfg.classes != 4) fail(ErrorKind::config, "the synthetic generator renders exactly 4 classes");
  Rng rng(mix_seed(cfg.seed, index));
  const double H = static_cast<double>(cfg.height), W = static_cast<double>(cfg.width);
  LabelMap label(cfg.height, cfg.width, background);

  for (std::size_t i = 0; i < cfg.blobs; ++i) {
    const double ry = 4 + rng.uniform() * 0.1 * H, rx = 4 + rng.uniform() * 0.1 * W;
    detail::paint_disk(label, rng.uniform() * H, rng.uniform() * W, ry, rx, blob);
  }

  const double budget = 0.05 * H * W;
  std::size_t line_px = 0;
  for (std::size_t i = 0; i < cfg.lines; ++i) {
    const double len = 0.25 * std::min(H, W) + rng.uniform() * 0.25 * std::min(H, W);
    const double angle = rng.uniform() * 3.14159265358979323846;
    const double y0 = rng.uniform() * H, x0 = rng.uniform() * W;
    const bool thick = rng.coin();
    const auto px = detail::line_pixels(label, y0, x0, y0 + len * std::sin(angle), x0 + len * std::cos(angle), thick);
    if (static_cast<double>(line_px + px.size()) >= budget) continue;
    for (auto [r, c] : px) label(r, c) = thin_line;
    line_px += px.size();
  }

  for (std::size_t i = 0; i < cfg.dots; ++i) {
    const double rad = rng.coin() ? 1.0 : 1.6;
    detail::paint_disk(label, 2 + rng.uniform() * (H - 4), 2 + rng.uniform() * (W - 4), rad, rad, small_dot);
  }

  Sample s{Tensor<float>(Shape4{1, 3, cfg.height, cfg.width}), std::move(label)};
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t r = 0; r < cfg.height; ++r)
      for (std::size_t c = 0; c < cfg.width; ++c) {
        const double base = detail::class_color[s.label(r, c)][ch];
        const double v = base + cfg.noise * (2 * rng.uniform() - 1);
        s.image(0, ch, r, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
  return s;
}

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentWindow {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  bool flip = false;
};

/// Applies one crop window and flip decision to both image and label.
inline std::pair<Tensor<float>, LabelMap> apply_augment(const Tensor<float>& image, const LabelMap& label,
                                                        const AugmentWindow& a) {
  const Shape4& s = image.shape();
  if (s.n != 1 || s.h != label.height || s.w != label.width)
    fail(ErrorKind::shape, "image " + s.str() + " does not match its label map");
  if (a.height == 0 || a.width == 0 || a.top + a.height > s.h || a.left + a.width > s.w)
    fail(ErrorKind::config, "crop window exceeds the image");
  Tensor<float> out(Shape4{1, s.c, a.height, a.width});
  LabelMap lab(a.height, a.width);
  for (std::size_t r = 0; r < a.height; ++r)
    for (std::size_t c = 0; c < a.width; ++c) {
      const std::size_t sc = a.left + (a.flip ? a.width - 1 - c : c);
      for (std::size_t ch = 0; ch < s.c; ++ch) out(0, ch, r, c) = image(0, ch, a.top + r, sc);
      lab(r, c) = label(a.top + r, sc);
    }
  return {std::move(out), std::move(lab)};
}

/// Seeded random crop of crop_h x crop_w and horizontal flip with probability 1/2.
inline std::pair<Tensor<float>, LabelMap> augment(const Tensor<float>& image, const LabelMap& label, Rng& rng,
                                                  std::size_t crop_h, std::size_t crop_w) {
  if (crop_h == 0 || crop_w == 0 || crop_h > label.height || crop_w > label.width)
    fail(ErrorKind::config, "crop " + std::to_string(crop_h) + "x" + std::to_string(crop_w) + " larger than image");
  AugmentWindow a;
  a.height = crop_h;
  a.width = crop_w;
  a.top = rng.below(label.height - crop_h + 1);
  a.left = rng.below(label.width - crop_w + 1);
  a.flip = rng.coin();
  return apply_augment(image, label, a);
}

// ---------------------------------------------------------------------------
// IoU

struct MetricReport {
  std::vector<std::uint64_t> intersection;
  std::vector<std::uint64_t> union_;
  std::vector<std::optional<double>> iou;  // empty for classes absent from prediction and truth
  double mean_iou = 0;
};

/// Accumulates per-class intersection and union over many label maps.
class IouAccumulator {
 public:
  explicit IouAccumulator(std::size_t classes) : inter_(classes, 0), union_(classes, 0) {}

  void add(const LabelMap& pred, const LabelMap& truth) {
    if (pred.height != truth.height || pred.width != truth.width)
      fail(ErrorKind::shape, "prediction and truth extents differ");
    const std::size_t k = inter_.size();
    for (std::size_t i = 0; i < truth.labels.size(); ++i) {
      const auto t = truth.labels[i];
      if (t == ignore_label) continue;
      const auto p = pred.labels[i];
      if (t >= k) fail(ErrorKind::label, "truth label out of range");
      if (p < k && p == t) {
        ++inter_[t];
        ++union_[t];
      } else {
        ++union_[t];
        if (p < k) ++union_[p];
      }
    }
  }

  MetricReport report() const {
    MetricReport r{inter_, union_, {}, 0};
    double sum = 0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < inter_.size(); ++c) {
      if (union_[c] == 0) {
        r.iou.emplace_back(std::nullopt);
        continue;
      }
      const double v = static_cast<double>(inter_[c]) / static_cast<double>(union_[c]);
      r.iou.emplace_back(v);
      sum += v;
      ++present;
    }
    r.mean_iou = present ? sum / static_cast<double>(present) : 0.0;
    return r;
  }

 private:
  std::vector<std::uint64_t> inter_;
  std::vector<std::uint64_t> union_;
};

/// Per-class IoU of one prediction, skipping pixels whose truth is the ignore value.
inline MetricReport iou(const LabelMap& pred, const LabelMap& truth, std::size_t classes) {
  IouAccumulator acc(classes);
  acc.add(pred, truth);
  return acc.report();
}

// ---------------------------------------------------------------------------
// Conversions

/// Channel argmax per pixel of batch b.
template <typename T>
LabelMap argmax_labels(const Tensor<T>& logits, std::size_t b = 0) {
  const Shape4& s = logits.shape();
  LabelMap m(s.h, s.w);
  for (std::size_t r = 0; r < s.h; ++r)
    for (std::size_t c = 0; c < s.w; ++c) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < s.c; ++k)
        if (logits(b, k, r, c) > logits(b, best, r, c)) best = k;
      m(r, c) = static_cast<std::uint8_t>(best);
    }
  return m;
}

inline Tensor<float> image_to_tensor(const RgbImage& img) {
  Tensor<float> t(Shape4{1, 3, img.height, img.width});
  for (std::size_t r = 0; r < img.height; ++r)
    for (std::size_t c = 0; c < img.width; ++c)
      for (std::size_t ch = 0; ch < 3; ++ch)
        t(0, ch, r, c) = static_cast<float>(img.pixels[(r * img.width + c) * 3 + ch]) / 255.0f;
  return t;
}

inline RgbImage tensor_to_image(const Tensor<float>& t) {
  const Shape4& s = t.shape();
  if (s.n != 1 || s.c != 3) fail(ErrorKind::shape, "expected a 1x3xHxW image tensor, got " + s.str());
  RgbImage img{s.w, s.h, std::vector<std::uint8_t>(s.h * s.w * 3)};
  for (std::size_t r = 0; r < s.h; ++r)
    for (std::size_t c = 0; c < s.w; ++c)
      for (std::size_t ch = 0; ch < 3; ++ch)
        img.pixels[(r * s.w + c) * 3 + ch] =
            static_cast<std::uint8_t>(std::lround(std::clamp(t(0, ch, r, c), 0.0f, 1.0f) * 255.0f));
  return img;
}

inline GrayImage labels_to_image(const LabelMap& m) { return GrayImage{m.width, m.height, m.labels}; }
inline LabelMap image_to_labels(const GrayImage& g) {
  LabelMap m(g.height, g.width);
  m.labels = g.pixels;
  return m;
}

}  // namespace smp
