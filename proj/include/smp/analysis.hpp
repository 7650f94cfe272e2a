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
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "smp/error.hpp"
#include "smp/network.hpp"

namespace smp {

struct FlopEntry {
  int id = 0;
  std::string name;
  LayerKind kind = LayerKind::relu;
  std::size_t batches = 1;  // batch count the layer runs over
  double gflops = 0;
};

struct FlopReport {
  std::string model;
  Shape4 input;
  std::vector<FlopEntry> layers;
  std::vector<std::pair<std::string, double>> groups;  // per layer name, first-seen order
  double total_gflops = 0;
};

/// Multiply-adds count as two operations; bias, BN, ReLU and every pooling or
/// rearrangement layer cost nothing.
inline double conv_flops(const Shape4& out, std::size_t in_ch, const Pair2& kernel) {
  return 2.0 * static_cast<double>(kernel.h * kernel.w) * static_cast<double>(in_ch) *
         static_cast<double>(out.c) * static_cast<double>(out.h * out.w) * static_cast<double>(out.n);
}

template <typename T>
FlopReport count_flops(const Network<T>& net, const Shape4& input) {
  const ShapeTrace trace = propagate_shapes(net, input);
  FlopReport r;
  r.model = net.model;
  r.input = input;
  std::map<int, Shape4> outputs{{input_id, input}};

  auto add_entry = [&](const Layer<T>& l, const Shape4& out, double flops) {
    r.layers.push_back(FlopEntry{l.id, l.name, l.kind, out.n, flops / 1e9});
  };

  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    const Shape4 out = trace.outputs[i];
    if (is_conv_kind(l.kind)) {
      add_entry(l, out, conv_flops(out, l.conv().in_ch, l.conv().kernel));
    } else if (l.kind == LayerKind::add_from) {
      add_entry(l, out, 0);
      Shape4 s = outputs.at(l.add().from);
      for (const auto& sub : l.add().shortcut) {
        Shape4 next = s;
        if (is_conv_kind(sub.kind)) {
          next = conv_out_shape(s, sub.conv());
          add_entry(sub, next, conv_flops(next, sub.conv().in_ch, sub.conv().kernel));
        } else {
          if (sub.kind == LayerKind::split) next = detail::split_shape(s, sub.pool().window);
          if (sub.kind == LayerKind::shrink)
            next = Shape4{s.n, s.c, s.h / sub.pool().window.h, s.w / sub.pool().window.w};
          add_entry(sub, next, 0);
        }
        s = next;
      }
    } else {
      add_entry(l, out, 0);
    }
    outputs[l.id] = out;
  }

  for (const auto& e : r.layers) {
    r.total_gflops += e.gflops;
    bool found = false;
    for (auto& g : r.groups)
      if (g.first == e.name) {
        g.second += e.gflops;
        found = true;
      }
    if (!found) r.groups.emplace_back(e.name, e.gflops);
  }
  return r;
}

inline std::string render_text(const FlopReport& r) {
  std::ostringstream os;
  char line[160];
  os << "model: " << r.model << "  input: " << r.input.str() << "\n";
  std::snprintf(line, sizeof line, "%6s  %-20s %-14s %8s %10s\n", "id", "name", "kind", "batches", "GFLOPs");
  os << line;
  for (const auto& e : r.layers) {
    std::snprintf(line, sizeof line, "%6d  %-20s %-14s %8zu %10.2f\n", e.id, e.name.c_str(),
                  std::string(to_string(e.kind)).c_str(), e.batches, e.gflops);
    os << line;
  }
  std::snprintf(line, sizeof line, "%-52s %10.2f\n", "total", r.total_gflops);
  os << line;
  return os.str();
}

inline nlohmann::json to_json(const FlopReport& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& e : r.layers)
    layers.push_back({{"id", e.id}, {"name", e.name}, {"kind", std::string(to_string(e.kind))},
                      {"batches", e.batches}, {"gflops", e.gflops}});
  return {{"model", r.model},
          {"input_shape", {r.input.n, r.input.c, r.input.h, r.input.w}},
          {"layers", layers},
          {"total_gflops", r.total_gflops}};
}

// ---------------------------------------------------------------------------
// Receptive field

struct RfEntry {
  int id = 0;
  std::string name;
  LayerKind kind = LayerKind::relu;
  std::int64_t rf_h = 1, rf_w = 1;
  std::int64_t jump_h = 1, jump_w = 1;
};

struct RfReport {
  std::string model;
  std::vector<RfEntry> layers;
  std::int64_t rf_h() const { return layers.empty() ? 1 : layers.back().rf_h; }
  std::int64_t rf_w() const { return layers.empty() ? 1 : layers.back().rf_w; }
};

namespace detail {

struct RfState {
  std::int64_t rf_h = 1, rf_w = 1, jump_h = 1, jump_w = 1;
};

inline void rf_kernel(RfState& s, std::size_t kh, std::size_t kw, std::size_t dh, std::size_t dw, std::size_t sh,
                      std::size_t sw) {
  s.rf_h += (static_cast<std::int64_t>(dh * (kh - 1) + 1) - 1) * s.jump_h;
  s.rf_w += (static_cast<std::int64_t>(dw * (kw - 1) + 1) - 1) * s.jump_w;
  s.jump_h *= static_cast<std::int64_t>(sh);
  s.jump_w *= static_cast<std::int64_t>(sw);
}

inline void rf_unstride(RfState& s, std::size_t fh, std::size_t fw, int id) {
  if (s.jump_h % static_cast<std::int64_t>(fh) || s.jump_w % static_cast<std::int64_t>(fw))
    fail(ErrorKind::analysis, "layer " + std::to_string(id) + " refines the grid below the input resolution");
  s.jump_h /= static_cast<std::int64_t>(fh);
  s.jump_w /= static_cast<std::int64_t>(fw);
}

// Pooling windows (maxpool, split, shrink) subsample the grid: each output
// cell is addressed by one input cell per window, so they update the jump
// only. Merge, expand and upsampling restore the finer grid without
// widening the field.
template <typename T>
void rf_step(RfState& s, const Layer<T>& l) {
  switch (l.kind) {
    case LayerKind::conv:
    case LayerKind::head_conv1x1: {
      const auto& p = l.conv();
      rf_kernel(s, p.kernel.h, p.kernel.w, p.dilation.h, p.dilation.w, p.stride.h, p.stride.w);
      break;
    }
    case LayerKind::maxpool:
      rf_kernel(s, 1, 1, 1, 1, 2, 2);
      break;
    case LayerKind::split:
    case LayerKind::shrink:
      rf_kernel(s, 1, 1, 1, 1, l.pool().window.h, l.pool().window.w);
      break;
    case LayerKind::merge:
    case LayerKind::expand:
      rf_unstride(s, l.pool().window.h, l.pool().window.w, l.id);
      break;
    case LayerKind::upsample: {
      const auto f = std::get<Upsample>(l.payload).factor;
      rf_unstride(s, f, f, l.id);
      break;
    }
    case LayerKind::bn:
    case LayerKind::relu:
    case LayerKind::pad:
    case LayerKind::crop:
      break;
    case LayerKind::add_from:
      fail(ErrorKind::analysis, "add_from handled by caller");
  }
}

}  // namespace detail

/// Cumulative receptive field and jump per layer. For add_from the wider of
/// the main path and the shortcut path wins.
template <typename T>
RfReport receptive_field(const Network<T>& net) {
  RfReport r;
  r.model = net.model;
  std::map<int, detail::RfState> states{{input_id, {}}};
  detail::RfState s;
  for (const auto& l : net.layers) {
    if (l.kind == LayerKind::add_from) {
      const auto it = states.find(l.add().from);
      if (it == states.end()) fail(ErrorKind::analysis, "add_from source not found");
      detail::RfState skip = it->second;
      for (const auto& sub : l.add().shortcut) detail::rf_step(skip, sub);
      if (skip.jump_h != s.jump_h || skip.jump_w != s.jump_w)
        fail(ErrorKind::analysis, "skip and main path disagree on grid stride at layer " + std::to_string(l.id));
      s.rf_h = std::max(s.rf_h, skip.rf_h);
      s.rf_w = std::max(s.rf_w, skip.rf_w);
    } else {
      detail::rf_step(s, l);
    }
    states[l.id] = s;
    r.layers.push_back(RfEntry{l.id, l.name, l.kind, s.rf_h, s.rf_w, s.jump_h, s.jump_w});
  }
  return r;
}

/// Total subsampling factor of a network: the coarsest grid step it reaches.
template <typename T>
Window subsampling_factor(const Network<T>& net) {
  Window w{1, 1};
  for (const auto& e : receptive_field(net).layers) {
    w.w = std::max(w.w, static_cast<std::size_t>(e.jump_w));
    w.h = std::max(w.h, static_cast<std::size_t>(e.jump_h));
  }
  return w;
}

inline std::string render_text(const RfReport& r) {
  std::ostringstream os;
  char line[160];
  os << "model: " << r.model << "\n";
  std::snprintf(line, sizeof line, "%6s  %-20s %-14s %8s %8s %8s %8s\n", "id", "name", "kind", "rf_h", "rf_w",
                "jump_h", "jump_w");
  os << line;
  for (const auto& e : r.layers) {
    std::snprintf(line, sizeof line, "%6d  %-20s %-14s %8lld %8lld %8lld %8lld\n", e.id, e.name.c_str(),
                  std::string(to_string(e.kind)).c_str(), static_cast<long long>(e.rf_h),
                  static_cast<long long>(e.rf_w), static_cast<long long>(e.jump_h), static_cast<long long>(e.jump_w));
    os << line;
  }
  return os.str();
}

}  // namespace smp
