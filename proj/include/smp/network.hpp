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

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "smp/error.hpp"
#include "smp/layers.hpp"
#include "smp/pooling.hpp"
#include "smp/tensor.hpp"

namespace smp {

enum class LayerKind : std::uint8_t {
  conv = 0,
  bn = 1,
  relu = 2,
  maxpool = 3,
  split = 4,
  merge = 5,
  shrink = 6,
  expand = 7,
  upsample = 8,
  pad = 9,
  crop = 10,
  add_from = 11,
  head_conv1x1 = 12,
};

inline constexpr int max_layer_kind = 12;

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::bn: return "bn";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::split: return "split";
    case LayerKind::merge: return "merge";
    case LayerKind::shrink: return "shrink";
    case LayerKind::expand: return "expand";
    case LayerKind::upsample: return "upsample";
    case LayerKind::pad: return "pad";
    case LayerKind::crop: return "crop";
    case LayerKind::add_from: return "add_from";
    case LayerKind::head_conv1x1: return "head_conv1x1";
  }
  return "?";
}

/// Payload of split, merge, shrink and expand layers. Layers that share a
/// site id share one SampleLoc per forward pass; merges and expands close the
/// site opened by the matching split or shrink.
struct PoolSite {
  Window window;
  int site = 0;
  std::optional<SampleLoc> fixed;
};

struct Upsample {
  std::size_t factor = 1;
};

struct Pad {
  Window window;
};

struct Crop {
  int pad_id = 0;  // restores the extents recorded at this pad layer
};

/// Id of the network input when used as an add_from source.
inline constexpr int input_id = -1;

template <typename T>
struct Layer;

/// Adds the output of an earlier layer, optionally passed through a short
/// shortcut sequence (conv, bn, relu, split or shrink of an open site).
template <typename T>
struct AddFrom {
  int from = input_id;
  std::vector<Layer<T>> shortcut;
};

template <typename T = float>
struct Layer {
  int id = 0;
  LayerKind kind = LayerKind::relu;
  std::string name;
  std::variant<std::monostate, Conv2dParams<T>, BatchNorm<T>, PoolSite, Upsample, Pad, Crop, AddFrom<T>> payload;

  Conv2dParams<T>& conv() { return std::get<Conv2dParams<T>>(payload); }
  const Conv2dParams<T>& conv() const { return std::get<Conv2dParams<T>>(payload); }
  BatchNorm<T>& bn() { return std::get<BatchNorm<T>>(payload); }
  const BatchNorm<T>& bn() const { return std::get<BatchNorm<T>>(payload); }
  const PoolSite& pool() const { return std::get<PoolSite>(payload); }
  PoolSite& pool() { return std::get<PoolSite>(payload); }
  const AddFrom<T>& add() const { return std::get<AddFrom<T>>(payload); }
  AddFrom<T>& add() { return std::get<AddFrom<T>>(payload); }
};

template <typename T = float>
struct Network {
  std::string model;
  std::vector<Layer<T>> layers;
  std::size_t classes = 0;
  bool training = false;
};

// Layer factories --------------------------------------------------------

template <typename T>
Layer<T> conv_layer(int id, std::string name, Conv2dParams<T> p) {
  return Layer<T>{id, LayerKind::conv, std::move(name), std::move(p)};
}
template <typename T>
Layer<T> head_layer(int id, std::string name, Conv2dParams<T> p) {
  return Layer<T>{id, LayerKind::head_conv1x1, std::move(name), std::move(p)};
}
template <typename T>
Layer<T> bn_layer(int id, std::string name, BatchNorm<T> p) {
  return Layer<T>{id, LayerKind::bn, std::move(name), std::move(p)};
}
template <typename T>
Layer<T> relu_layer(int id, std::string name = "relu") {
  return Layer<T>{id, LayerKind::relu, std::move(name), std::monostate{}};
}
template <typename T>
Layer<T> maxpool_layer(int id, std::string name = "maxpool") {
  return Layer<T>{id, LayerKind::maxpool, std::move(name), std::monostate{}};
}
template <typename T>
Layer<T> pool_layer(int id, LayerKind kind, int site, Window win = {}, std::optional<SampleLoc> fixed = std::nullopt,
                    std::string name = {}) {
  if (name.empty()) name = std::string(to_string(kind));
  return Layer<T>{id, kind, std::move(name), PoolSite{win, site, fixed}};
}
template <typename T>
Layer<T> upsample_layer(int id, std::size_t factor, std::string name = "upsample") {
  return Layer<T>{id, LayerKind::upsample, std::move(name), Upsample{factor}};
}
template <typename T>
Layer<T> pad_layer(int id, Window win, std::string name = "pad") {
  return Layer<T>{id, LayerKind::pad, std::move(name), Pad{win}};
}
template <typename T>
Layer<T> crop_layer(int id, int pad_id, std::string name = "crop") {
  return Layer<T>{id, LayerKind::crop, std::move(name), Crop{pad_id}};
}
template <typename T>
Layer<T> add_layer(int id, int from, std::vector<Layer<T>> shortcut = {}, std::string name = "add") {
  return Layer<T>{id, LayerKind::add_from, std::move(name), AddFrom<T>{from, std::move(shortcut)}};
}

inline bool is_conv_kind(LayerKind k) { return k == LayerKind::conv || k == LayerKind::head_conv1x1; }
inline bool opens_site(LayerKind k) { return k == LayerKind::split || k == LayerKind::shrink; }
inline bool closes_site(LayerKind k) { return k == LayerKind::merge || k == LayerKind::expand; }

// Shape propagation --------------------------------------------------------

struct OpenSite {
  int site;
  Window window;
  LayerKind kind;
};

struct ShapeTrace {
  Shape4 input;
  std::vector<Shape4> outputs;           // one per top-level layer
  std::vector<std::size_t> multipliers;  // batch multiplier after each layer
  std::vector<OpenSite> open_sites;      // sites still open at the end
  Shape4 output() const { return outputs.empty() ? input : outputs.back(); }
};

namespace detail {

inline std::string layer_label(int id, LayerKind kind) {
  return std::string(to_string(kind)) + " layer " + std::to_string(id);
}

template <typename T>
Shape4 layer_out_shape(const Layer<T>& layer, const Shape4& in, std::vector<OpenSite>& sites,
                       const std::map<int, Shape4>& outputs, const std::map<int, Shape4>& pad_inputs,
                       bool in_shortcut) {
  const auto where = layer_label(layer.id, layer.kind);
  try {
    switch (layer.kind) {
      case LayerKind::conv:
      case LayerKind::head_conv1x1:
        return conv_out_shape(in, layer.conv());
      case LayerKind::bn:
        if (in.c != layer.bn().channels) fail(ErrorKind::shape, "channel mismatch");
        return in;
      case LayerKind::relu:
        return in;
      case LayerKind::maxpool:
        if (in.h % 2 || in.w % 2) fail(ErrorKind::divisibility, "odd extents");
        return Shape4{in.n, in.c, in.h / 2, in.w / 2};
      case LayerKind::split:
      case LayerKind::shrink: {
        const auto& p = layer.pool();
        detail::check_divisible(in, p.window);
        if (p.fixed) detail::check_loc(p.window, *p.fixed);
        if (in_shortcut) {
          bool found = false;
          for (const auto& s : sites)
            if (s.site == p.site && s.window == p.window && s.kind == layer.kind) found = true;
          if (!found) fail(ErrorKind::graph, "shortcut pooling must reuse an open site of the same kind");
        } else {
          for (const auto& s : sites)
            if (s.site == p.site) fail(ErrorKind::graph, "site " + std::to_string(p.site) + " opened twice");
          sites.push_back({p.site, p.window, layer.kind});
        }
        if (layer.kind == LayerKind::split) return split_shape(in, p.window);
        return Shape4{in.n, in.c, in.h / p.window.h, in.w / p.window.w};
      }
      case LayerKind::merge:
      case LayerKind::expand: {
        const auto& p = layer.pool();
        if (in_shortcut) fail(ErrorKind::graph, "shortcuts cannot close sites");
        const LayerKind opener = layer.kind == LayerKind::merge ? LayerKind::split : LayerKind::shrink;
        if (sites.empty()) fail(ErrorKind::graph, "no open site to close");
        const auto top = sites.back();
        if (top.site != p.site || top.kind != opener || !(top.window == p.window))
          fail(ErrorKind::graph, "closes site " + std::to_string(p.site) + " but innermost open site is " +
                                     std::to_string(top.site) + " (" + std::string(to_string(top.kind)) + ")");
        sites.pop_back();
        if (layer.kind == LayerKind::merge) {
          if (in.n % p.window.area()) fail(ErrorKind::meta, "batch count not divisible by window area");
          return Shape4{in.n / p.window.area(), in.c, in.h * p.window.h, in.w * p.window.w};
        }
        return Shape4{in.n, in.c, in.h * p.window.h, in.w * p.window.w};
      }
      case LayerKind::upsample: {
        const auto f = std::get<Upsample>(layer.payload).factor;
        if (f == 0) fail(ErrorKind::argument, "zero upsample factor");
        return Shape4{in.n, in.c, in.h * f, in.w * f};
      }
      case LayerKind::pad: {
        const auto& win = std::get<Pad>(layer.payload).window;
        detail::check_window(win);
        return Shape4{in.n, in.c, (in.h + win.h - 1) / win.h * win.h, (in.w + win.w - 1) / win.w * win.w};
      }
      case LayerKind::crop: {
        const auto it = pad_inputs.find(std::get<Crop>(layer.payload).pad_id);
        if (it == pad_inputs.end()) fail(ErrorKind::graph, "crop refers to an unknown pad layer");
        if (it->second.h > in.h || it->second.w > in.w) fail(ErrorKind::shape, "crop larger than input");
        return Shape4{in.n, in.c, it->second.h, it->second.w};
      }
      case LayerKind::add_from: {
        if (in_shortcut) fail(ErrorKind::graph, "nested add_from is not supported");
        const auto& a = layer.add();
        const auto src = outputs.find(a.from);
        if (src == outputs.end()) fail(ErrorKind::graph, "add_from source " + std::to_string(a.from) + " not found");
        Shape4 s = src->second;
        for (const auto& sub : a.shortcut) s = layer_out_shape(sub, s, sites, outputs, pad_inputs, true);
        if (!(s == in)) fail(ErrorKind::shape, "skip shape " + s.str() + " does not match " + in.str());
        return in;
      }
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::graph) throw;
    throw Error(ErrorKind::graph, where + ": " + e.what());
  }
  fail(ErrorKind::graph, where + ": unknown kind");
}

}  // namespace detail

/// Propagates shapes through the network. Structural problems (unknown skip
/// sources, mismatched sites, shape failures) raise graph errors.
/// require_closed additionally demands that every opened site is closed.
template <typename T>
ShapeTrace propagate_shapes(const Network<T>& net, const Shape4& input, bool require_closed = false) {
  validate(input);
  ShapeTrace trace{input, {}, {}, {}};
  std::map<int, Shape4> outputs{{input_id, input}};
  std::map<int, Shape4> pad_inputs;
  std::vector<OpenSite> sites;
  Shape4 cur = input;
  for (const auto& layer : net.layers) {
    if (outputs.count(layer.id)) fail(ErrorKind::graph, "duplicate layer id " + std::to_string(layer.id));
    if (layer.kind == LayerKind::pad) pad_inputs[layer.id] = cur;
    cur = detail::layer_out_shape(layer, cur, sites, outputs, pad_inputs, false);
    outputs[layer.id] = cur;
    trace.outputs.push_back(cur);
    trace.multipliers.push_back(cur.n / input.n);
  }
  trace.open_sites = sites;
  if (require_closed && !sites.empty())
    fail(ErrorKind::graph, "site " + std::to_string(sites.back().site) + " is never closed");
  return trace;
}

// Parameter traversal --------------------------------------------------------

/// Visits every trainable array in a fixed pre-order: conv weight then bias,
/// bn scale then shift, shortcut layers inside their add_from.
template <typename LayerT, typename Fn>
void visit_params(std::span<LayerT> layers, Fn&& fn) {
  for (auto& layer : layers) {
    if (is_conv_kind(layer.kind)) {
      auto& p = layer.conv();
      fn(p.weight.values());
      if (p.has_bias()) fn(std::span(p.bias));
    } else if (layer.kind == LayerKind::bn) {
      auto& p = layer.bn();
      fn(std::span(p.scale));
      fn(std::span(p.shift));
    } else if (layer.kind == LayerKind::add_from) {
      visit_params(std::span(layer.add().shortcut), fn);
    }
  }
}

template <typename T>
std::vector<std::span<T>> parameter_views(Network<T>& net) {
  std::vector<std::span<T>> out;
  visit_params(std::span(net.layers), [&](std::span<T> s) { out.push_back(s); });
  return out;
}

template <typename T>
std::size_t parameter_count(const Network<T>& net) {
  std::size_t total = 0;
  visit_params(std::span(net.layers), [&](auto s) { total += s.size(); });
  return total;
}

/// Rewrites split/merge into shrink/expand (training) or back (inference), recursively.
template <typename T>
void set_mode(std::vector<Layer<T>>& layers, bool training) {
  for (auto& layer : layers) {
    switch (layer.kind) {
      case LayerKind::split:
      case LayerKind::shrink:
        layer.kind = training ? LayerKind::shrink : LayerKind::split;
        break;
      case LayerKind::merge:
      case LayerKind::expand:
        layer.kind = training ? LayerKind::expand : LayerKind::merge;
        break;
      case LayerKind::add_from:
        set_mode(layer.add().shortcut, training);
        break;
      default:
        break;
    }
    if (layer.kind == LayerKind::split || layer.kind == LayerKind::merge) layer.pool().fixed.reset();
  }
}

template <typename T>
Network<T> with_mode(Network<T> net, bool training) {
  set_mode(net.layers, training);
  net.training = training;
  return net;
}

}  // namespace smp
