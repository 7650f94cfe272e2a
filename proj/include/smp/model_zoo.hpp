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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "smp/error.hpp"
#include "smp/layers.hpp"
#include "smp/network.hpp"
#include "smp/tensor.hpp"

namespace smp {

enum class ArchVariant { MaxPoolNet, DilatedNet, SplitNet, ToySmp, ToyBaseline };

inline std::string_view to_string(ArchVariant v) {
  switch (v) {
    case ArchVariant::MaxPoolNet: return "maxpool";
    case ArchVariant::DilatedNet: return "dilated";
    case ArchVariant::SplitNet: return "split";
    case ArchVariant::ToySmp: return "toy_smp";
    case ArchVariant::ToyBaseline: return "toy_baseline";
  }
  return "?";
}

inline ArchVariant parse_variant(std::string_view s) {
  if (s == "maxpool") return ArchVariant::MaxPoolNet;
  if (s == "dilated") return ArchVariant::DilatedNet;
  if (s == "split") return ArchVariant::SplitNet;
  if (s == "toy_smp") return ArchVariant::ToySmp;
  if (s == "toy_baseline") return ArchVariant::ToyBaseline;
  fail(ErrorKind::config, "unknown variant '" + std::string(s) + "'");
}

/// Toy residual network configuration. widths[0] is the stem width and
/// widths[i] (i >= 1) the width of stage i; blocks[i-1] basic blocks per stage.
/// One pooling site follows the stem and every stage after the first
/// downsamples once, so a config has widths.size() - 1 sites.
struct ToyConfig {
  std::size_t classes = 4;
  std::vector<std::size_t> widths{16, 32, 64};
  std::vector<std::size_t> blocks{1, 1};
  Window window{2, 2};
  std::uint64_t seed = 0;
  std::size_t in_channels = 3;

  std::size_t sites() const { return widths.size() - 1; }
};

inline void validate(const ToyConfig& cfg) {
  if (cfg.classes < 2) fail(ErrorKind::config, "need at least two classes");
  if (cfg.widths.size() < 2) fail(ErrorKind::config, "widths needs a stem width and at least one stage");
  if (cfg.blocks.size() != cfg.widths.size() - 1)
    fail(ErrorKind::config, "blocks must list one count per stage (" + std::to_string(cfg.widths.size() - 1) + ")");
  for (auto w : cfg.widths)
    if (w == 0) fail(ErrorKind::config, "zero width");
  for (auto b : cfg.blocks)
    if (b == 0) fail(ErrorKind::config, "zero block count");
  if (cfg.window.w == 0 || cfg.window.h == 0) fail(ErrorKind::config, "zero window extent");
  if (cfg.in_channels == 0) fail(ErrorKind::config, "zero input channels");
}

/// Desk-scale config with `sites` pooling sites; two sites gives the default.
inline ToyConfig toy_config_for_sites(std::size_t sites, std::uint64_t seed = 0) {
  if (sites == 0) fail(ErrorKind::config, "need at least one site");
  ToyConfig cfg;
  cfg.seed = seed;
  cfg.widths = {16};
  cfg.blocks.clear();
  for (std::size_t i = 0; i < sites; ++i) {
    cfg.widths.push_back(16 * (std::size_t{1} << std::min<std::size_t>(i + 1, 2)));
    cfg.blocks.push_back(1);
  }
  return cfg;
}

namespace detail {

template <typename T>
class NetBuilder {
 public:
  explicit NetBuilder(std::uint64_t seed) : rng_(seed) {}

  int next_id() { return ++id_; }
  int last_id() const { return id_; }

  Conv2dParams<T> conv(std::size_t in, std::size_t out, Pair2 k, Pair2 stride, Pair2 dil, Pair2 pad, bool bias) {
    auto p = make_conv<T>(in, out, k, stride, dil, pad, bias);
    const double bound = std::sqrt(6.0 / static_cast<double>(in * k.h * k.w));
    for (auto& v : p.weight.values()) v = static_cast<T>((2 * rng_.uniform() - 1) * bound);
    return p;
  }

 private:
  Rng rng_;
  int id_ = 0;
};

}  // namespace detail

/// Runtime comparison trio: conv1 (3->64) then either max pooling + conv2,
/// a dilated conv2 at full resolution, or split pooling + conv2 + merge.
/// conv2 is 64->128, 3x3. Equal seeds give equal conv weights across variants.
template <typename T = float>
Network<T> build_runtime_net(ArchVariant variant, std::uint64_t seed = 0) {
  if (variant != ArchVariant::MaxPoolNet && variant != ArchVariant::DilatedNet && variant != ArchVariant::SplitNet)
    fail(ErrorKind::config, "build_runtime_net accepts maxpool, dilated or split");
  detail::NetBuilder<T> b(seed);
  Network<T> net;
  net.model = std::string(to_string(variant));
  auto c1 = b.conv(3, 64, {3, 3}, {1, 1}, {1, 1}, {1, 1}, false);
  const bool dilated = variant == ArchVariant::DilatedNet;
  auto c2 = b.conv(64, 128, {3, 3}, {1, 1}, dilated ? Pair2{2, 2} : Pair2{1, 1}, dilated ? Pair2{2, 2} : Pair2{1, 1},
                   false);
  net.layers.push_back(conv_layer<T>(b.next_id(), "conv1", std::move(c1)));
  net.layers.push_back(relu_layer<T>(b.next_id()));
  if (variant == ArchVariant::MaxPoolNet) net.layers.push_back(maxpool_layer<T>(b.next_id(), "pooling"));
  if (variant == ArchVariant::SplitNet)
    net.layers.push_back(pool_layer<T>(b.next_id(), LayerKind::split, 1, Window{2, 2}, std::nullopt, "pooling"));
  net.layers.push_back(conv_layer<T>(b.next_id(), "conv2", std::move(c2)));
  if (variant == ArchVariant::SplitNet)
    net.layers.push_back(pool_layer<T>(b.next_id(), LayerKind::merge, 1, Window{2, 2}, std::nullopt, "merge"));
  net.classes = 128;
  return net;
}

namespace detail {

template <typename T>
Network<T> build_toy(const ToyConfig& cfg, bool smp, bool training) {
  validate(cfg);
  if (!smp && !(cfg.window == Window{2, 2})) fail(ErrorKind::config, "the max-pool baseline supports 2x2 windows only");
  NetBuilder<T> b(cfg.seed);
  Network<T> net;
  net.model = smp ? "toy_smp" : "toy_baseline";
  net.classes = cfg.classes;
  auto& L = net.layers;
  const Pair2 one{1, 1}, three{3, 3}, none{0, 0};
  const LayerKind open = training ? LayerKind::shrink : LayerKind::split;
  const LayerKind close = training ? LayerKind::expand : LayerKind::merge;

  L.push_back(conv_layer<T>(b.next_id(), "stem.conv", b.conv(cfg.in_channels, cfg.widths[0], three, one, one, one, false)));
  L.push_back(bn_layer<T>(b.next_id(), "stem.bn", make_batchnorm<T>(cfg.widths[0])));
  L.push_back(relu_layer<T>(b.next_id(), "stem.relu"));
  int site = 1;
  if (smp)
    L.push_back(pool_layer<T>(b.next_id(), open, site, cfg.window, std::nullopt, "pool1"));
  else
    L.push_back(maxpool_layer<T>(b.next_id(), "pool1"));

  for (std::size_t s = 0; s < cfg.blocks.size(); ++s) {
    const std::size_t out = cfg.widths[s + 1];
    for (std::size_t j = 0; j < cfg.blocks[s]; ++j) {
      const std::string tag = "s" + std::to_string(s + 1) + ".b" + std::to_string(j);
      const bool down = s > 0 && j == 0;
      if (down) ++site;
      const std::size_t cin = j == 0 ? (s == 0 ? cfg.widths[0] : cfg.widths[s]) : out;
      const int block_input = b.last_id();
      const Pair2 stride = down && !smp ? Pair2{2, 2} : one;

      L.push_back(conv_layer<T>(b.next_id(), tag + ".conv1", b.conv(cin, out, three, stride, one, one, false)));
      L.push_back(bn_layer<T>(b.next_id(), tag + ".bn1", make_batchnorm<T>(out)));
      if (down && smp) L.push_back(pool_layer<T>(b.next_id(), open, site, cfg.window, std::nullopt, tag + ".pool"));
      L.push_back(relu_layer<T>(b.next_id(), tag + ".relu1"));
      L.push_back(conv_layer<T>(b.next_id(), tag + ".conv2", b.conv(out, out, three, one, one, one, false)));
      L.push_back(bn_layer<T>(b.next_id(), tag + ".bn2", make_batchnorm<T>(out)));

      std::vector<Layer<T>> shortcut;
      if (cin != out || down) {
        if (down && smp)
          shortcut.push_back(pool_layer<T>(b.next_id(), open, site, cfg.window, std::nullopt, tag + ".proj_pool"));
        shortcut.push_back(conv_layer<T>(b.next_id(), tag + ".proj", b.conv(cin, out, one, stride, one, none, false)));
        shortcut.push_back(bn_layer<T>(b.next_id(), tag + ".proj_bn", make_batchnorm<T>(out)));
      }
      L.push_back(add_layer<T>(b.next_id(), block_input, std::move(shortcut), tag + ".add"));
      L.push_back(relu_layer<T>(b.next_id(), tag + ".relu2"));
    }
  }

  const std::size_t last = cfg.widths.back();
  auto head = b.conv(last, cfg.classes, one, one, one, none, true);
  L.push_back(head_layer<T>(b.next_id(), "head", std::move(head)));
  if (smp) {
    for (int s = site; s >= 1; --s)
      L.push_back(pool_layer<T>(b.next_id(), close, s, cfg.window, std::nullopt, "unpool" + std::to_string(s)));
  } else {
    L.push_back(upsample_layer<T>(b.next_id(), std::size_t{1} << cfg.sites(), "upsample"));
  }
  net.training = training;
  return net;
}

}  // namespace detail

/// Residual network with every subsampling site replaced by split pooling
/// (inference) or shrink pooling (training), closed by merges or expands so
/// the output has the input's spatial extents.
template <typename T = float>
Network<T> build_toy_smp(const ToyConfig& cfg, bool training = false) {
  return detail::build_toy<T>(cfg, true, training);
}

/// The same residual network with max pooling and stride-2 convolutions,
/// a 1x1 head and bilinear upsampling to full resolution.
template <typename T = float>
Network<T> build_toy_baseline(const ToyConfig& cfg, bool training = false) {
  return detail::build_toy<T>(cfg, false, training);
}

template <typename T = float>
Network<T> build_variant(ArchVariant v, const ToyConfig& cfg, bool training = false) {
  switch (v) {
    case ArchVariant::ToySmp: return build_toy_smp<T>(cfg, training);
    case ArchVariant::ToyBaseline: return build_toy_baseline<T>(cfg, training);
    default: return build_runtime_net<T>(v, cfg.seed);
  }
}

/// Fills BN affine parameters and running statistics with seeded values so
/// eval-mode BN is not the identity. Used by equivalence checks.
template <typename T>
void randomize_batchnorm(std::vector<Layer<T>>& layers, Rng& rng) {
  for (auto& l : layers) {
    if (l.kind == LayerKind::bn) {
      auto& p = l.bn();
      for (std::size_t c = 0; c < p.channels; ++c) {
        p.scale[c] = static_cast<T>(0.5 + rng.uniform());
        p.shift[c] = static_cast<T>(rng.uniform() - 0.5);
        p.running_mean[c] = static_cast<T>(0.4 * (rng.uniform() - 0.5));
        p.running_var[c] = static_cast<T>(0.5 + rng.uniform());
      }
    } else if (l.kind == LayerKind::add_from) {
      randomize_batchnorm(l.add().shortcut, rng);
    }
  }
}

}  // namespace smp
