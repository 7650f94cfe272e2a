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

#include <cmath>
#include <cstddef>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <type_traits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smp/error.hpp"
#include "smp/layers.hpp"
#include "smp/network.hpp"
#include "smp/pooling.hpp"
#include "smp/tensor.hpp"
#include "smp/thread_pool.hpp"

namespace smp {

struct ForwardOptions {
  /// Source of SampleLoc draws for shrink sites without a fixed location.
  /// Draws happen in layer order, one per site per pass.
  Rng* rng = nullptr;
  /// Per-site locations; these take precedence over rng but not over a
  /// location fixed in the layer itself.
  std::map<int, SampleLoc> locs;
};

template <typename T>
struct SeqTape;

template <typename T>
struct LayerCache {
  BnCache<T> bn;
  std::vector<std::size_t> argmax;
  SampleLoc loc;
  std::shared_ptr<SeqTape<T>> shortcut;
};

template <typename T>
struct SeqTape {
  std::vector<Tensor<T>> inputs;
  std::vector<LayerCache<T>> caches;
};

template <typename T>
struct Tape {
  bool training = false;
  SeqTape<T> main;
  std::map<int, SampleLoc> locs;  // location used by each shrink site
};

template <typename T>
struct ForwardResult {
  Tensor<T> output;
  Tape<T> tape;
};

namespace detail {

template <typename T>
struct RunContext {
  bool training = false;
  const ForwardOptions* opts = nullptr;
  std::map<int, SampleLoc> locs;
  std::set<int> keep;                  // ids whose outputs later layers read
  std::map<int, Tensor<T>> outputs;
  std::map<int, Extents> pad_extents;
};

template <typename T>
void collect_references(const std::vector<Layer<T>>& layers, std::set<int>& keep) {
  for (const auto& l : layers) {
    if (l.kind == LayerKind::add_from) {
      keep.insert(l.add().from);
      collect_references(l.add().shortcut, keep);
    }
  }
}

template <typename T>
SampleLoc resolve_loc(const PoolSite& p, RunContext<T>& ctx) {
  if (p.fixed) return *p.fixed;
  if (auto it = ctx.locs.find(p.site); it != ctx.locs.end()) return it->second;
  if (auto it = ctx.opts->locs.find(p.site); it != ctx.opts->locs.end()) {
    detail::check_loc(p.window, it->second);
    ctx.locs[p.site] = it->second;
    return it->second;
  }
  if (!ctx.opts->rng) fail(ErrorKind::argument, "no sampling location for site " + std::to_string(p.site));
  const SampleLoc loc = sample_location(*ctx.opts->rng, p.window);
  ctx.locs[p.site] = loc;
  return loc;
}

template <typename T>
Tensor<T> run_sequence(const std::vector<Layer<T>>& layers, std::size_t begin, std::size_t end, Tensor<T> x,
                       RunContext<T>& ctx, std::type_identity_t<SeqTape<T>>* tape);

template <typename T>
Tensor<T> run_layer(const Layer<T>& layer, const Tensor<T>& x, RunContext<T>& ctx, LayerCache<T>* cache) {
  switch (layer.kind) {
    case LayerKind::conv:
    case LayerKind::head_conv1x1:
      return conv2d_fwd(x, layer.conv());
    case LayerKind::bn:
      return batchnorm_fwd(x, layer.bn(), ctx.training ? BnMode::train : BnMode::eval, cache ? &cache->bn : nullptr);
    case LayerKind::relu:
      return relu_fwd(x);
    case LayerKind::maxpool: {
      auto r = maxpool2x2_fwd(x);
      if (cache) cache->argmax = std::move(r.argmax);
      return std::move(r.output);
    }
    case LayerKind::split:
      return split_fwd(x, layer.pool().window).first;
    case LayerKind::merge: {
      const auto& win = layer.pool().window;
      return merge_fwd(x, SplitMeta{win, x.shape().n / win.area()});
    }
    case LayerKind::shrink: {
      const SampleLoc loc = resolve_loc(layer.pool(), ctx);
      if (cache) cache->loc = loc;
      return shrink_fwd(x, layer.pool().window, loc);
    }
    case LayerKind::expand: {
      const SampleLoc loc = resolve_loc(layer.pool(), ctx);
      if (cache) cache->loc = loc;
      return expand_fwd(x, layer.pool().window, loc);
    }
    case LayerKind::upsample:
      return bilinear_upsample(x, std::get<Upsample>(layer.payload).factor);
    case LayerKind::pad: {
      ctx.pad_extents[layer.id] = Extents{x.shape().h, x.shape().w};
      return zero_pad_to_divisible(x, std::get<Pad>(layer.payload).window).first;
    }
    case LayerKind::crop: {
      const auto it = ctx.pad_extents.find(std::get<Crop>(layer.payload).pad_id);
      if (it == ctx.pad_extents.end()) fail(ErrorKind::graph, "crop refers to a pad layer outside this pass");
      return crop_top_left(x, it->second.h, it->second.w);
    }
    case LayerKind::add_from: {
      const auto& a = layer.add();
      const auto src = ctx.outputs.find(a.from);
      if (src == ctx.outputs.end())
        fail(ErrorKind::graph, "add_from source " + std::to_string(a.from) + " is not available");
      SeqTape<T>* sub = nullptr;
      if (cache) {
        cache->shortcut = std::make_shared<SeqTape<T>>();
        sub = cache->shortcut.get();
      }
      Tensor<T> skip = run_sequence(a.shortcut, 0, a.shortcut.size(), src->second, ctx, sub);
      return map2(x, skip, BinaryOp::add);
    }
  }
  fail(ErrorKind::graph, "unknown layer kind");
}

template <typename T>
Tensor<T> run_sequence(const std::vector<Layer<T>>& layers, std::size_t begin, std::size_t end, Tensor<T> x,
                       RunContext<T>& ctx, std::type_identity_t<SeqTape<T>>* tape) {
  for (std::size_t i = begin; i < end; ++i) {
    const auto& layer = layers[i];
    LayerCache<T>* cache = nullptr;
    if (tape) {
      tape->inputs.push_back(x);
      tape->caches.emplace_back();
      cache = &tape->caches.back();
    }
    x = run_layer(layer, x, ctx, cache);
    if (ctx.keep.count(layer.id)) ctx.outputs[layer.id] = x;
  }
  return x;
}

template <typename T>
RunContext<T> make_context(const Network<T>& net, const ForwardOptions& opts) {
  RunContext<T> ctx;
  ctx.training = net.training;
  ctx.opts = &opts;
  collect_references(net.layers, ctx.keep);
  return ctx;
}

}  // namespace detail

/// Runs the network and records everything backward needs. In training mode
/// BN uses batch statistics and shrink sites draw one location per pass.
template <typename T>
ForwardResult<T> forward(const Network<T>& net, const Tensor<T>& x, const ForwardOptions& opts = {}) {
  propagate_shapes(net, x.shape(), true);
  auto ctx = detail::make_context(net, opts);
  ctx.outputs[input_id] = x;
  ForwardResult<T> r;
  r.tape.training = net.training;
  r.output = detail::run_sequence(net.layers, 0, net.layers.size(), x, ctx, &r.tape.main);
  r.tape.locs = ctx.locs;
  return r;
}

/// Forward without a tape.
template <typename T>
Tensor<T> predict(const Network<T>& net, const Tensor<T>& x, const ForwardOptions& opts = {}) {
  propagate_shapes(net, x.shape(), true);
  auto ctx = detail::make_context(net, opts);
  ctx.outputs[input_id] = x;
  return detail::run_sequence(net.layers, 0, net.layers.size(), x, ctx, nullptr);
}

/// Folds the BN batch statistics recorded by a training pass into the running estimates.
template <typename T>
void commit_batch_stats(Network<T>& net, const Tape<T>& tape) {
  if (!tape.training) return;
  auto walk = [](auto& self, std::vector<Layer<T>>& layers, const SeqTape<T>& st) -> void {
    for (std::size_t i = 0; i < layers.size() && i < st.caches.size(); ++i) {
      auto& layer = layers[i];
      if (layer.kind == LayerKind::bn) {
        const auto& in = st.inputs[i].shape();
        batchnorm_update_running(layer.bn(), st.caches[i].bn, in.n * in.plane());
      } else if (layer.kind == LayerKind::add_from && st.caches[i].shortcut) {
        self(self, layer.add().shortcut, *st.caches[i].shortcut);
      }
    }
  };
  walk(walk, net.layers, tape.main);
}

// ---------------------------------------------------------------------------
// Backward

template <typename T>
struct Gradients {
  Tensor<T> input;
  /// One array per trainable parameter, in parameter_views order.
  std::vector<std::vector<T>> params;
};

namespace detail {

template <typename T>
void zero_params(std::vector<Layer<T>>& layers) {
  visit_params(std::span(layers), [](std::span<T> s) { std::fill(s.begin(), s.end(), T(0)); });
}

template <typename T>
void accumulate(std::span<T> dst, std::span<const T> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
Tensor<T> backward_sequence(const std::vector<Layer<T>>& layers, std::vector<Layer<T>>& grads, const SeqTape<T>& tape,
                            Tensor<T> g, std::map<int, Tensor<T>>& pending) {
  for (std::size_t idx = layers.size(); idx-- > 0;) {
    const auto& layer = layers[idx];
    const auto& x = tape.inputs[idx];
    const auto& cache = tape.caches[idx];
    if (auto it = pending.find(layer.id); it != pending.end()) {
      add_inplace(g, it->second);
      pending.erase(it);
    }
    switch (layer.kind) {
      case LayerKind::conv:
      case LayerKind::head_conv1x1: {
        auto cg = conv2d_bwd(x, layer.conv(), g);
        auto& gp = grads[idx].conv();
        accumulate(gp.weight.values(), std::span<const T>(cg.grad_w.values()));
        if (gp.has_bias()) accumulate(std::span(gp.bias), std::span<const T>(cg.grad_b));
        g = std::move(cg.grad_x);
        break;
      }
      case LayerKind::bn: {
        auto bg = batchnorm_bwd(g, layer.bn(), cache.bn);
        auto& gp = grads[idx].bn();
        accumulate(std::span(gp.scale), std::span<const T>(bg.grad_scale));
        accumulate(std::span(gp.shift), std::span<const T>(bg.grad_shift));
        g = std::move(bg.grad_x);
        break;
      }
      case LayerKind::relu:
        g = relu_bwd(x, g);
        break;
      case LayerKind::maxpool:
        g = maxpool2x2_bwd(g, std::span<const std::size_t>(cache.argmax), x.shape());
        break;
      case LayerKind::split:
        g = split_bwd(g, SplitMeta{layer.pool().window, x.shape().n});
        break;
      case LayerKind::merge:
        g = merge_bwd(g, SplitMeta{layer.pool().window, x.shape().n / layer.pool().window.area()});
        break;
      case LayerKind::shrink:
        g = shrink_bwd(g, layer.pool().window, cache.loc, x.shape());
        break;
      case LayerKind::expand:
        g = expand_bwd(g, layer.pool().window, cache.loc);
        break;
      case LayerKind::upsample:
        g = bilinear_upsample_bwd(g, std::get<Upsample>(layer.payload).factor, x.shape());
        break;
      case LayerKind::pad:
        g = crop_top_left(g, x.shape().h, x.shape().w);
        break;
      case LayerKind::crop: {
        const auto& s = x.shape();
        g = pad_bottom_right(g, s.h, s.w);
        break;
      }
      case LayerKind::add_from: {
        const auto& a = layer.add();
        std::map<int, Tensor<T>> inner;
        Tensor<T> gs = backward_sequence(a.shortcut, grads[idx].add().shortcut, *cache.shortcut, g, inner);
        if (auto it = pending.find(a.from); it != pending.end())
          add_inplace(it->second, gs);
        else
          pending.emplace(a.from, std::move(gs));
        break;
      }
    }
  }
  return g;
}

}  // namespace detail

/// Reverse pass over a training-mode tape. Expand layers route only the
/// gradient of their sampled positions; everything else is exact.
template <typename T>
Gradients<T> backward(const Network<T>& net, const Tape<T>& tape, const Tensor<T>& grad_out) {
  if (!tape.training) fail(ErrorKind::mode, "backward needs a tape recorded in training mode");
  if (tape.main.inputs.size() != net.layers.size()) fail(ErrorKind::graph, "tape does not belong to this network");
  std::vector<Layer<T>> grads = net.layers;
  detail::zero_params(grads);
  std::map<int, Tensor<T>> pending;
  Tensor<T> g = detail::backward_sequence(net.layers, grads, tape.main, grad_out, pending);
  if (auto it = pending.find(input_id); it != pending.end()) add_inplace(g, it->second);

  Gradients<T> out{std::move(g), {}};
  visit_params(std::span(grads), [&](std::span<T> s) { out.params.emplace_back(s.begin(), s.end()); });
  return out;
}

// ---------------------------------------------------------------------------
// Adam

template <typename T = float>
struct AdamState {
  double lr = 1e-3;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

/// Adam with the weight-decay term added to the gradient before the moment
/// updates (Adam + L2).
template <typename T>
void adam_step(std::span<const std::span<T>> params, const std::vector<std::vector<T>>& grads, AdamState<T>& st) {
  if (params.size() != grads.size())
    fail(ErrorKind::shape, "adam got " + std::to_string(params.size()) + " parameters and " +
                               std::to_string(grads.size()) + " gradients");
  if (st.m.empty()) {
    for (const auto& p : params) {
      st.m.emplace_back(p.size(), T(0));
      st.v.emplace_back(p.size(), T(0));
    }
  }
  if (st.m.size() != params.size()) fail(ErrorKind::shape, "adam state does not match the parameter list");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].size() != grads[i].size() || st.m[i].size() != params[i].size())
      fail(ErrorKind::shape, "adam parameter " + std::to_string(i) + " shape mismatch");

  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    auto& m = st.m[i];
    auto& v = st.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = static_cast<double>(grads[i][j]) + st.weight_decay * static_cast<double>(p[j]);
      const double mj = st.beta1 * m[j] + (1.0 - st.beta1) * g;
      const double vj = st.beta2 * v[j] + (1.0 - st.beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      p[j] = static_cast<T>(p[j] - st.lr * (mj / c1) / (std::sqrt(vj / c2) + st.epsilon));
    }
  }
}

template <typename T>
void adam_step(Network<T>& net, const Gradients<T>& grads, AdamState<T>& st) {
  auto views = parameter_views(net);
  adam_step(std::span<const std::span<T>>(views), grads.params, st);
}

// ---------------------------------------------------------------------------
// Parallel inference over split batches

/// Runs the layers after the first top-level split as one task per split
/// batch on `workers` threads; the matching merge is the barrier. Every task
/// performs exactly the per-sample arithmetic of forward(), so the output is
/// bitwise identical for every worker count.
template <typename T>
Tensor<T> forward_parallel(const Network<T>& net, const Tensor<T>& x, std::size_t workers) {
  if (workers < 1) fail(ErrorKind::argument, "forward_parallel needs at least one worker");
  if (net.training) fail(ErrorKind::mode, "forward_parallel runs inference networks only");
  propagate_shapes(net, x.shape(), true);

  const auto& layers = net.layers;
  std::size_t split_at = layers.size();
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].kind == LayerKind::split) {
      split_at = i;
      break;
    }
  if (split_at == layers.size()) fail(ErrorKind::graph, "forward_parallel needs a split layer");
  const int site = layers[split_at].pool().site;
  std::size_t merge_at = layers.size();
  for (std::size_t i = split_at + 1; i < layers.size(); ++i)
    if (layers[i].kind == LayerKind::merge && layers[i].pool().site == site) {
      merge_at = i;
      break;
    }
  if (merge_at == layers.size()) fail(ErrorKind::graph, "split site " + std::to_string(site) + " is never merged");

  const ForwardOptions opts;
  auto ctx = detail::make_context(net, opts);
  ctx.outputs[input_id] = x;
  Tensor<T> y = detail::run_sequence(layers, 0, split_at + 1, x, ctx, nullptr);

  const int split_id = layers[split_at].id;
  std::vector<Tensor<T>> parts(y.shape().n);
  {
    ThreadPool pool(workers);
    std::vector<std::future<Tensor<T>>> futures;
    futures.reserve(parts.size());
    for (std::size_t b = 0; b < parts.size(); ++b) {
      futures.push_back(pool.submit([&, b] {
        auto task = detail::make_context(net, opts);
        Tensor<T> slice = batch_select(y, b);
        task.outputs[split_id] = slice;
        return detail::run_sequence(layers, split_at + 1, merge_at, std::move(slice), task, nullptr);
      }));
    }
    for (std::size_t b = 0; b < parts.size(); ++b) parts[b] = futures[b].get();
  }

  Tensor<T> merged = stack_batches(parts);
  return detail::run_sequence(layers, merge_at, layers.size(), std::move(merged), ctx, nullptr);
}

// ---------------------------------------------------------------------------
// Full-split oracle

namespace detail {

template <typename T>
void collect_sites(const std::vector<Layer<T>>& layers, std::vector<std::pair<int, Window>>& sites) {
  for (const auto& l : layers) {
    if (opens_site(l.kind)) {
      bool seen = false;
      for (const auto& s : sites) seen = seen || s.first == l.pool().site;
      if (!seen) sites.emplace_back(l.pool().site, l.pool().window);
    } else if (l.kind == LayerKind::add_from) {
      collect_sites(l.add().shortcut, sites);
    }
  }
}

template <typename T>
void check_oracle_validity(const std::vector<Layer<T>>& layers) {
  for (const auto& l : layers) {
    if (is_conv_kind(l.kind) && !(l.conv().stride == Pair2{1, 1}))
      fail(ErrorKind::validity, "oracle needs stride-1 convolutions (layer " + std::to_string(l.id) + ")");
    if (l.kind == LayerKind::add_from) check_oracle_validity(l.add().shortcut);
  }
}

}  // namespace detail

/// Reassembles the split-network output from shrink-only passes: one pass per
/// combination of locations over all sites, each expanded to full resolution
/// and summed. Valid only with eval-mode BN and stride-1 convolutions.
template <typename T>
Tensor<T> full_split_oracle(const Network<T>& net_smp, const Tensor<T>& x) {
  if (net_smp.training) fail(ErrorKind::validity, "oracle requires BN in eval mode");
  detail::check_oracle_validity(net_smp.layers);

  std::vector<std::pair<int, Window>> sites;
  detail::collect_sites(net_smp.layers, sites);
  if (sites.empty()) return predict(net_smp, x);

  Network<T> shrink_net = net_smp;
  set_mode(shrink_net.layers, true);
  shrink_net.training = false;

  std::size_t combos = 1;
  for (const auto& s : sites) combos *= s.second.area();

  std::optional<Tensor<T>> sum;
  for (std::size_t combo = 0; combo < combos; ++combo) {
    ForwardOptions opts;
    std::size_t rest = combo;
    for (const auto& [site, win] : sites) {
      opts.locs[site] = loc_from_offset(win, rest % win.area());
      rest /= win.area();
    }
    Tensor<T> y = predict(shrink_net, x, opts);
    if (!sum)
      sum = std::move(y);
    else
      add_inplace(*sum, y);
  }
  return std::move(*sum);
}

}  // namespace smp
