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

// Desk-scale training loop for the toy networks on the synthetic dataset.
// Every random choice (data, init, shuffling, augmentation, sample
// locations) comes from streams derived from one seed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smp/config.hpp"
#include "smp/dataset.hpp"
#include "smp/error.hpp"
#include "smp/executor.hpp"
#include "smp/layers.hpp"
#include "smp/model_zoo.hpp"
#include "smp/network.hpp"
#include "smp/tensor.hpp"

namespace smp {

struct TrainConfig {
  ArchVariant variant = ArchVariant::ToySmp;
  ToyConfig arch;
  std::size_t steps = 300;
  std::size_t batch = 4;
  double lr = 1e-3;
  double weight_decay = 5e-4;
  std::size_t train_images = 200;
  std::size_t val_images = 40;
  std::size_t image_size = 80;
  std::size_t crop = 64;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.variant != ArchVariant::ToySmp && cfg.variant != ArchVariant::ToyBaseline)
    fail(ErrorKind::config, "training supports toy_smp and toy_baseline only");
  validate(cfg.arch);
  if (cfg.batch == 0 || cfg.train_images == 0 || cfg.val_images == 0)
    fail(ErrorKind::config, "batch, train_images and val_images must be positive");
  if (cfg.crop == 0 || cfg.crop > cfg.image_size) fail(ErrorKind::config, "crop must be in [1, image_size]");
  if (!(cfg.lr > 0) || cfg.weight_decay < 0) fail(ErrorKind::config, "lr must be positive and weight_decay non-negative");
  std::size_t factor_w = 1, factor_h = 1;
  for (std::size_t i = 0; i < cfg.arch.sites(); ++i) {
    factor_w *= cfg.arch.window.w;
    factor_h *= cfg.arch.window.h;
  }
  if (cfg.crop % factor_w || cfg.crop % factor_h || cfg.image_size % factor_w || cfg.image_size % factor_h)
    fail(ErrorKind::config, "crop and image_size must be divisible by the total subsampling factor");
}

inline const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys{"steps",        "batch",      "lr",         "weight_decay",
                                             "train_images", "val_images", "image_size", "crop"};
  return keys;
}

inline TrainConfig parse_train_config(const KeyValues& kv) {
  const ArchConfig arch = parse_arch_config(kv, train_config_keys());
  TrainConfig cfg;
  cfg.variant = arch.variant;
  cfg.arch = arch.toy;
  cfg.seed = arch.toy.seed;
  auto get_uint = [&](const char* key, std::size_t& dst) {
    if (auto it = kv.find(key); it != kv.end()) dst = parse_uint(it->second, key);
  };
  get_uint("steps", cfg.steps);
  get_uint("batch", cfg.batch);
  get_uint("train_images", cfg.train_images);
  get_uint("val_images", cfg.val_images);
  get_uint("image_size", cfg.image_size);
  get_uint("crop", cfg.crop);
  if (auto it = kv.find("lr"); it != kv.end()) cfg.lr = parse_double(it->second, "lr");
  if (auto it = kv.find("weight_decay"); it != kv.end()) cfg.weight_decay = parse_double(it->second, "weight_decay");
  validate(cfg);
  return cfg;
}

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t step = 0;     // steps completed
  double loss = 0;          // mean training loss over the epoch's steps
  MetricReport val;
};

/// BN running statistics versus the batch statistics the inference network
/// actually sees on training images, per BN layer.
struct BnStatGap {
  std::string layer;
  double mean_shift = 0;  // mean over channels of |running_mean - mean| / sqrt(var + eps)
  double var_ratio = 0;   // mean over channels of running_var / var
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::vector<double> step_loss;
  Network<float> model;  // inference mode
  std::vector<BnStatGap> bn_gap;
};

inline nlohmann::json to_json(const MetricReport& m) {
  nlohmann::json iou = nlohmann::json::array();
  for (const auto& v : m.iou) iou.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  return {{"mean_iou", m.mean_iou}, {"iou", iou}, {"intersection", m.intersection}, {"union", m.union_}};
}

inline nlohmann::json to_json(const EpochLog& e) {
  nlohmann::json iou = nlohmann::json::array();
  for (const auto& v : e.val.iou) iou.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  return {{"epoch", e.epoch}, {"step", e.step}, {"loss", e.loss}, {"val_miou", e.val.mean_iou}, {"val_iou", iou}};
}

inline nlohmann::json to_json(const BnStatGap& g) {
  return {{"layer", g.layer}, {"mean_shift", g.mean_shift}, {"var_ratio", g.var_ratio}};
}

namespace detail {

inline SynthConfig synth_for(const TrainConfig& cfg) {
  SynthConfig s;
  s.height = cfg.image_size;
  s.width = cfg.image_size;
  s.classes = cfg.arch.classes;
  s.seed = cfg.seed;
  return s;
}

inline MetricReport evaluate(const Network<float>& inference, const std::vector<Sample>& val, std::size_t classes) {
  IouAccumulator acc(classes);
  for (const auto& s : val) acc.add(argmax_labels(predict(inference, s.image)), s.label);
  return acc.report();
}

template <typename T>
void collect_bn_caches(const std::vector<Layer<T>>& layers, const SeqTape<T>& tape,
                       std::vector<std::pair<const Layer<T>*, const BnCache<T>*>>& out) {
  for (std::size_t i = 0; i < layers.size() && i < tape.caches.size(); ++i) {
    if (layers[i].kind == LayerKind::bn) out.emplace_back(&layers[i], &tape.caches[i].bn);
    if (layers[i].kind == LayerKind::add_from && tape.caches[i].shortcut)
      collect_bn_caches(layers[i].add().shortcut, *tape.caches[i].shortcut, out);
  }
}

// Output positions a training pass actually computed: the trailing expand
// chain applied to a field of ones. Elsewhere the logits are expand's zeros.
inline std::vector<std::uint8_t> sampled_mask(const Network<float>& net, const Tape<float>& tape, const Shape4& out) {
  std::vector<const Layer<float>*> tail;
  for (auto it = net.layers.rbegin(); it != net.layers.rend() && it->kind == LayerKind::expand; ++it)
    tail.push_back(&*it);
  Shape4 s{out.n, 1, out.h, out.w};
  for (const auto* l : tail) {
    s.h /= l->pool().window.h;
    s.w /= l->pool().window.w;
  }
  Tensor<float> m(s, 1.0f);
  for (auto it = tail.rbegin(); it != tail.rend(); ++it) {
    const auto& p = (*it)->pool();
    m = expand_fwd(m, p.window, p.fixed ? *p.fixed : tape.locs.at(p.site));
  }
  std::vector<std::uint8_t> mask(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) mask[i] = m.values()[i] != 0.0f;
  return mask;
}

// Runs the inference graph with batch statistics over a stack of training
// images and compares them with the running estimates.
inline std::vector<BnStatGap> measure_bn_gap(const Network<float>& inference, const std::vector<Sample>& train,
                                             std::size_t images) {
  std::vector<Tensor<float>> batch;
  for (std::size_t i = 0; i < std::min(images, train.size()); ++i) batch.push_back(train[i].image);
  Network<float> probe = inference;
  probe.training = true;  // split/merge layers, batch-statistics BN
  const auto r = forward(probe, stack_batches(std::span<const Tensor<float>>(batch)));
  std::vector<std::pair<const Layer<float>*, const BnCache<float>*>> caches;
  collect_bn_caches(probe.layers, r.tape.main, caches);
  std::vector<BnStatGap> gaps;
  for (const auto& [layer, cache] : caches) {
    const auto& p = layer->bn();
    BnStatGap g{layer->name, 0, 0};
    for (std::size_t c = 0; c < p.channels; ++c) {
      const double var = cache->var[c];
      g.mean_shift += std::abs(p.running_mean[c] - cache->mean[c]) / std::sqrt(var + p.epsilon);
      g.var_ratio += p.running_var[c] / std::max(var, 1e-12);
    }
    g.mean_shift /= static_cast<double>(p.channels);
    g.var_ratio /= static_cast<double>(p.channels);
    gaps.push_back(g);
  }
  return gaps;
}

}  // namespace detail

/// Trains cfg.variant for cfg.steps Adam steps. An epoch is one pass over a
/// fresh permutation of the training images; the last epoch may be partial.
/// The loss averages over the output positions the pass computed, so a
/// shrink network is scored on its sampled subgrid only.
/// on_epoch is called after each epoch's validation.
inline TrainResult train_toy(const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch = {}) {
  validate(cfg);
  ToyConfig arch = cfg.arch;
  arch.seed = mix_seed(cfg.seed, 1);
  Network<float> net = build_variant<float>(cfg.variant, arch, true);

  const SynthConfig synth = detail::synth_for(cfg);
  std::vector<Sample> train, val;
  for (std::size_t i = 0; i < cfg.train_images; ++i) train.push_back(gen_synthetic(synth, i));
  for (std::size_t i = 0; i < cfg.val_images; ++i) val.push_back(gen_synthetic(synth, cfg.train_images + i));

  Rng order_rng(mix_seed(cfg.seed, 2));
  Rng aug_rng(mix_seed(cfg.seed, 3));
  Rng loc_rng(mix_seed(cfg.seed, 4));
  ForwardOptions opts;
  opts.rng = &loc_rng;

  AdamState<float> adam;
  adam.lr = cfg.lr;
  adam.weight_decay = cfg.weight_decay;

  TrainResult result;
  std::vector<std::size_t> order(train.size());
  std::size_t cursor = order.size();
  std::size_t epoch = 0;
  double epoch_loss = 0;
  std::size_t epoch_steps = 0;

  auto finish_epoch = [&](std::size_t step) {
    EpochLog e;
    e.epoch = epoch;
    e.step = step;
    e.loss = epoch_steps ? epoch_loss / static_cast<double>(epoch_steps) : 0.0;
    e.val = detail::evaluate(with_mode(net, false), val, cfg.arch.classes);
    result.epochs.push_back(e);
    if (on_epoch) on_epoch(e);
    epoch_loss = 0;
    epoch_steps = 0;
  };

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    if (cursor + cfg.batch > order.size()) {
      if (step > 0) {
        finish_epoch(step);
        ++epoch;
      }
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
      cursor = 0;
    }
    std::vector<Tensor<float>> images;
    std::vector<std::uint8_t> labels;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const auto& s = train[order[cursor++]];
      auto [img, lab] = augment(s.image, s.label, aug_rng, cfg.crop, cfg.crop);
      images.push_back(std::move(img));
      labels.insert(labels.end(), lab.labels.begin(), lab.labels.end());
    }
    const Tensor<float> x = stack_batches(std::span<const Tensor<float>>(images));
    auto fwd = forward(net, x, opts);
    const auto mask = detail::sampled_mask(net, fwd.tape, fwd.output.shape());
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (!mask[i]) labels[i] = ignore_label;
    const double loss = softmax_xent_fwd(fwd.output, std::span<const std::uint8_t>(labels));
    const auto grads = backward(net, fwd.tape, softmax_xent_bwd(fwd.output, std::span<const std::uint8_t>(labels)));
    commit_batch_stats(net, fwd.tape);
    adam_step(net, grads, adam);
    result.step_loss.push_back(loss);
    epoch_loss += loss;
    ++epoch_steps;
  }
  if (epoch_steps > 0 || result.epochs.empty()) finish_epoch(cfg.steps);

  result.model = with_mode(net, false);
  result.bn_gap = detail::measure_bn_gap(result.model, train, 16);
  return result;
}

}  // namespace smp
