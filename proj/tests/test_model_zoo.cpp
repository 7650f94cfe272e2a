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

#include <gtest/gtest.h>

#include <map>
#include <string>

#include "smp/analysis.hpp"
#include "smp/config.hpp"
#include "smp/executor.hpp"
#include "smp/model_zoo.hpp"
#include "test_util.hpp"

using namespace smp;

TEST(ModelZoo, ToyVariantsHaveEqualParameterCounts) {
  for (std::size_t sites : {1u, 2u, 3u}) {
    const auto cfg = toy_config_for_sites(sites, 1);
    EXPECT_EQ(parameter_count(build_toy_smp<float>(cfg)), parameter_count(build_toy_baseline<float>(cfg))) << sites;
  }
  ToyConfig wide;
  wide.widths = {8, 8, 24};
  wide.blocks = {2, 3};
  EXPECT_EQ(parameter_count(build_toy_smp<float>(wide)), parameter_count(build_toy_baseline<float>(wide)));
}

TEST(ModelZoo, ParameterCountByHand) {
  ToyConfig cfg;
  cfg.classes = 2;
  cfg.widths = {2, 4};
  cfg.blocks = {1};
  // stem 3x3 3->2 + BN(2); block conv1 3x3 2->4 + BN, conv2 3x3 4->4 + BN,
  // projection 1x1 2->4 + BN; head 1x1 4->2 with bias
  const std::size_t expected = 54 + 4 + 72 + 8 + 144 + 8 + 8 + 8 + 8 + 2;
  EXPECT_EQ(parameter_count(build_toy_smp<float>(cfg)), expected);
}

TEST(ModelZoo, BatchMultiplierPeaksAtWindowPowerOfSites) {
  for (std::size_t sites : {1u, 2u, 3u}) {
    const auto net = build_toy_smp<float>(toy_config_for_sites(sites), false);
    const auto trace = propagate_shapes(net, Shape4{1, 3, 32, 32}, true);
    std::size_t peak = 0;
    for (auto m : trace.multipliers) peak = std::max(peak, m);
    std::size_t expected = 1;
    for (std::size_t i = 0; i < sites; ++i) expected *= 4;
    EXPECT_EQ(peak, expected);
    EXPECT_EQ(trace.output(), (Shape4{1, 4, 32, 32}));
  }
}

TEST(ModelZoo, BothToyNetsKeepInputExtents) {
  const ToyConfig cfg;
  const Shape4 in{2, 3, 48, 64};
  for (bool training : {false, true}) {
    EXPECT_EQ(propagate_shapes(build_toy_smp<float>(cfg, training), in, true).output(), (Shape4{2, 4, 48, 64}));
    EXPECT_EQ(propagate_shapes(build_toy_baseline<float>(cfg, training), in, true).output(), (Shape4{2, 4, 48, 64}));
  }
}

TEST(ModelZoo, ToyReceptiveFieldsMatchLayerByLayer) {
  for (std::size_t sites : {1u, 2u, 3u}) {
    const auto cfg = toy_config_for_sites(sites);
    const auto a = receptive_field(build_toy_smp<float>(cfg));
    const auto b = receptive_field(build_toy_baseline<float>(cfg));
    std::map<std::string, RfEntry> by_name;
    for (const auto& e : b.layers) by_name[e.name] = e;
    std::size_t matched = 0;
    for (const auto& e : a.layers) {
      const auto it = by_name.find(e.name);
      if (it == by_name.end() || e.kind == LayerKind::conv) continue;
      // a strided conv subsamples before its pooled counterpart does, so
      // compare after activations, adds and the head
      EXPECT_EQ(e.rf_h, it->second.rf_h) << e.name;
      EXPECT_EQ(e.rf_w, it->second.rf_w) << e.name;
      ++matched;
    }
    EXPECT_GT(matched, 5u);
    EXPECT_EQ(a.rf_h(), b.rf_h());
    EXPECT_EQ(a.rf_w(), b.rf_w());
  }
}

TEST(ModelZoo, RuntimeVariantsShareWeights) {
  const auto a = build_runtime_net<float>(ArchVariant::MaxPoolNet, 3);
  const auto c = build_runtime_net<float>(ArchVariant::SplitNet, 3);
  EXPECT_EQ(a.layers[0].conv().weight, c.layers[0].conv().weight);
  EXPECT_EQ(parameter_count(a), parameter_count(c));
  EXPECT_EQ(parameter_count(a), parameter_count(build_runtime_net<float>(ArchVariant::DilatedNet, 3)));
}

TEST(ModelZoo, SplitOutputContainsSubsampledNetOutput) {
  const auto split = build_runtime_net<float>(ArchVariant::SplitNet, 4);
  auto sub = build_runtime_net<float>(ArchVariant::MaxPoolNet, 4);
  for (auto& l : sub.layers)
    if (l.kind == LayerKind::maxpool) l = pool_layer<float>(l.id, LayerKind::shrink, 1, Window{2, 2}, SampleLoc{0, 0});
  sub.layers.push_back(pool_layer<float>(99, LayerKind::expand, 1, Window{2, 2}, SampleLoc{0, 0}));
  const auto x = random_uniform<float>(Shape4{1, 3, 16, 16}, 5, 0.f, 1.f);
  const auto full = predict(split, x);
  const auto coarse = predict(sub, x);
  ASSERT_EQ(coarse.shape(), full.shape());
  for (std::size_t c = 0; c < 128; ++c)
    for (std::size_t r = 0; r < 16; ++r)
      for (std::size_t col = 0; col < 16; ++col) {
        const bool sampled = r % 2 == 0 && col % 2 == 0;
        ASSERT_EQ(coarse(0, c, r, col), sampled ? full(0, c, r, col) : 0.f);
      }
}

TEST(ModelZoo, VariantNamesRoundTrip) {
  for (auto v : {ArchVariant::MaxPoolNet, ArchVariant::DilatedNet, ArchVariant::SplitNet, ArchVariant::ToySmp,
                 ArchVariant::ToyBaseline})
    EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_EQ(kind_of([] { parse_variant("resnet"); }), ErrorKind::config);
}

TEST(ModelZoo, ConfigErrors) {
  EXPECT_EQ(kind_of([] { build_runtime_net<float>(ArchVariant::ToySmp); }), ErrorKind::config);
  ToyConfig bad;
  bad.blocks = {1};
  EXPECT_EQ(kind_of([&] { build_toy_smp<float>(bad); }), ErrorKind::config);
  bad = ToyConfig{};
  bad.classes = 1;
  EXPECT_EQ(kind_of([&] { build_toy_smp<float>(bad); }), ErrorKind::config);
  bad = ToyConfig{};
  bad.window = Window{3, 3};
  EXPECT_EQ(kind_of([&] { build_toy_baseline<float>(bad); }), ErrorKind::config);
  EXPECT_NO_THROW(build_toy_smp<float>(bad));
  EXPECT_EQ(kind_of([] { toy_config_for_sites(0); }), ErrorKind::config);
}

TEST(ModelZoo, ArchConfigParsing) {
  const auto kv = parse_key_values("variant = toy_smp\nclasses = 3\nwidths = 4, 8\nblocks = 2\nwindow = 2x2\nseed = 9\n");
  const auto cfg = parse_arch_config(kv, {});
  EXPECT_EQ(cfg.variant, ArchVariant::ToySmp);
  EXPECT_EQ(cfg.toy.classes, 3u);
  EXPECT_EQ(cfg.toy.widths, (std::vector<std::size_t>{4, 8}));
  EXPECT_EQ(cfg.toy.blocks, (std::vector<std::size_t>{2}));
  EXPECT_EQ(cfg.toy.seed, 9u);
  EXPECT_EQ(kind_of([] { parse_arch_config(parse_key_values("variant = split\nbogus = 1\n"), {}); }),
            ErrorKind::config);
}
