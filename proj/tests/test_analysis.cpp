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

#include "smp/analysis.hpp"
#include "smp/model_zoo.hpp"
#include "test_util.hpp"

using namespace smp;

namespace {

const Shape4 input256{1, 3, 256, 256};

// 2 * kh * kw * cin * cout * out_h * out_w * batches, in GFLOPs
double hand_gflops(double k, double cin, double cout, double h, double w, double batches) {
  return 2 * k * k * cin * cout * h * w * batches / 1e9;
}

double group(const FlopReport& r, const std::string& name) {
  for (const auto& [n, g] : r.groups)
    if (n == name) return g;
  ADD_FAILURE() << "no group " << name;
  return 0;
}

}  // namespace

TEST(Flops, MatchesClosedForm) {
  const double conv1 = hand_gflops(3, 3, 64, 256, 256, 1);
  const double pooled = hand_gflops(3, 64, 128, 128, 128, 1);
  const double full = hand_gflops(3, 64, 128, 256, 256, 1);
  const double split = hand_gflops(3, 64, 128, 128, 128, 4);

  const auto a = count_flops(build_runtime_net<float>(ArchVariant::MaxPoolNet), input256);
  const auto b = count_flops(build_runtime_net<float>(ArchVariant::DilatedNet), input256);
  const auto c = count_flops(build_runtime_net<float>(ArchVariant::SplitNet), input256);
  for (const auto* r : {&a, &b, &c}) EXPECT_DOUBLE_EQ(group(*r, "conv1"), conv1);
  EXPECT_DOUBLE_EQ(group(a, "conv2"), pooled);
  EXPECT_DOUBLE_EQ(group(b, "conv2"), full);
  EXPECT_DOUBLE_EQ(group(c, "conv2"), split);
  EXPECT_DOUBLE_EQ(a.total_gflops, conv1 + pooled);
  EXPECT_EQ(b.total_gflops, c.total_gflops);
}

TEST(Flops, ReferenceValuesWithinTolerance) {
  struct Row {
    ArchVariant v;
    double conv1, conv2, total;
  };
  for (const auto& row : {Row{ArchVariant::MaxPoolNet, 0.23, 2.42, 2.65}, Row{ArchVariant::DilatedNet, 0.23, 9.68, 9.92},
                          Row{ArchVariant::SplitNet, 0.23, 9.68, 9.92}}) {
    const auto r = count_flops(build_runtime_net<float>(row.v), input256);
    EXPECT_NEAR(group(r, "conv1"), row.conv1, 0.05);
    EXPECT_NEAR(group(r, "conv2"), row.conv2, 0.05);
    EXPECT_NEAR(r.total_gflops, row.total, 0.05);
  }
}

TEST(Flops, BatchCountAndZeroCostLayers) {
  const auto r = count_flops(build_runtime_net<float>(ArchVariant::SplitNet), input256);
  double sum = 0;
  for (const auto& e : r.layers) {
    sum += e.gflops;
    if (!is_conv_kind(e.kind)) EXPECT_EQ(e.gflops, 0.0) << e.name;
    if (e.name == "conv2") EXPECT_EQ(e.batches, 4u);
    if (e.name == "conv1" || e.name == "merge") EXPECT_EQ(e.batches, 1u);
  }
  EXPECT_DOUBLE_EQ(sum, r.total_gflops);
}

TEST(Flops, DoublingHeightDoublesConvEntries) {
  for (auto v : {ArchVariant::MaxPoolNet, ArchVariant::DilatedNet, ArchVariant::SplitNet}) {
    const auto net = build_runtime_net<float>(v);
    const auto a = count_flops(net, Shape4{1, 3, 64, 96});
    const auto b = count_flops(net, Shape4{1, 3, 128, 96});
    ASSERT_EQ(a.layers.size(), b.layers.size());
    for (std::size_t i = 0; i < a.layers.size(); ++i) EXPECT_DOUBLE_EQ(b.layers[i].gflops, 2 * a.layers[i].gflops);
  }
}

TEST(Flops, SplitAndDilatedAgreeOnDeeperStacks) {
  // split + two stride-1 convs vs the same convs dilated by 2 at full resolution
  auto stack = [](bool split) {
    Network<float> n;
    int id = 1;
    n.layers.push_back(conv_layer<float>(id++, "a", make_conv<float>(3, 8, {3, 3}, {1, 1}, {1, 1}, {1, 1})));
    if (split) n.layers.push_back(pool_layer<float>(id++, LayerKind::split, 1, Window{2, 2}));
    const Pair2 d = split ? Pair2{1, 1} : Pair2{2, 2};
    n.layers.push_back(conv_layer<float>(id++, "b", make_conv<float>(8, 8, {3, 3}, {1, 1}, d, d)));
    n.layers.push_back(conv_layer<float>(id++, "c", make_conv<float>(8, 5, {1, 1})));
    if (split) n.layers.push_back(pool_layer<float>(id++, LayerKind::merge, 1, Window{2, 2}));
    return n;
  };
  const Shape4 in{2, 3, 32, 48};
  EXPECT_DOUBLE_EQ(count_flops(stack(true), in).total_gflops, count_flops(stack(false), in).total_gflops);
}

TEST(Flops, JsonSchema) {
  const auto j = to_json(count_flops(build_runtime_net<float>(ArchVariant::SplitNet), input256));
  for (const char* k : {"model", "input_shape", "layers", "total_gflops"}) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["input_shape"], nlohmann::json({1, 3, 256, 256}));
  for (const auto& l : j["layers"])
    for (const char* k : {"id", "kind", "batches", "gflops"}) EXPECT_TRUE(l.contains(k)) << k;
  const auto text = render_text(count_flops(build_runtime_net<float>(ArchVariant::MaxPoolNet), input256));
  EXPECT_NE(text.find("total"), std::string::npos);
}

TEST(Flops, ShapeErrorsPropagate) {
  EXPECT_EQ(kind_of([] { count_flops(build_runtime_net<float>(ArchVariant::SplitNet), Shape4{1, 3, 15, 16}); }),
            ErrorKind::graph);
}

TEST(ReceptiveField, SingleConv) {
  Network<float> n;
  n.layers.push_back(conv_layer<float>(1, "c", make_conv<float>(1, 1, {3, 3})));
  const auto r = receptive_field(n);
  EXPECT_EQ(r.rf_h(), 3);
  EXPECT_EQ(r.rf_w(), 3);
}

TEST(ReceptiveField, DilationAndStride) {
  Network<float> n;
  n.layers.push_back(conv_layer<float>(1, "a", make_conv<float>(1, 1, {3, 3}, {2, 2})));
  n.layers.push_back(conv_layer<float>(2, "b", make_conv<float>(1, 1, {3, 5}, {1, 1}, {2, 1})));
  // rf = 3 + (2*2) * 2 in h, 3 + 4 * 2 in w
  const auto r = receptive_field(n);
  EXPECT_EQ(r.rf_h(), 11);
  EXPECT_EQ(r.rf_w(), 11);
  EXPECT_EQ(r.layers.back().jump_h, 2);
}

TEST(ReceptiveField, RuntimeNetsAgree) {
  for (auto v : {ArchVariant::MaxPoolNet, ArchVariant::DilatedNet, ArchVariant::SplitNet}) {
    const auto r = receptive_field(build_runtime_net<float>(v));
    EXPECT_EQ(r.rf_h(), 7) << to_string(v);
    EXPECT_EQ(r.rf_w(), 7) << to_string(v);
  }
}

TEST(ReceptiveField, MergeRestoresJump) {
  const auto r = receptive_field(build_runtime_net<float>(ArchVariant::SplitNet));
  EXPECT_EQ(r.layers.back().jump_h, 1);
  EXPECT_EQ(r.layers[r.layers.size() - 2].jump_h, 2);
  EXPECT_EQ(subsampling_factor(build_toy_smp<float>(ToyConfig{})), (Window{4, 4}));
}

TEST(ReceptiveField, RefiningBelowInputIsAnError) {
  Network<float> n;
  n.layers.push_back(upsample_layer<float>(1, 2));
  EXPECT_EQ(kind_of([&] { receptive_field(n); }), ErrorKind::analysis);
}
