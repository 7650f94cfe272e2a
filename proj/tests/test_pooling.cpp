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

#include <algorithm>
#include <array>
#include <vector>

#include "smp/gradcheck.hpp"
#include "smp/pooling.hpp"
#include "test_util.hpp"

using namespace smp;

namespace {

Tensor<float> iota_4x4() {
  std::vector<float> v(16);
  for (int i = 0; i < 16; ++i) v[i] = static_cast<float>(i);
  return create<float>(Shape4{1, 1, 4, 4}, v);
}

Tensor<float> grid(std::size_t h, std::size_t w, std::vector<float> v) { return create<float>(Shape4{1, 1, h, w}, v); }

// Direct transcription of the index rule: element (b, c, r, x) goes to batch
// b*w*h + (x mod w)*h + (r mod h) at (r / h, x / w).
Tensor<float> reference_split(const Tensor<float>& x, const Window& win) {
  const Shape4& s = x.shape();
  Tensor<float> out(Shape4{s.n * win.area(), s.c, s.h / win.h, s.w / win.w});
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t r = 0; r < s.h; ++r)
        for (std::size_t col = 0; col < s.w; ++col) {
          const std::size_t k = col % win.w, l = r % win.h;
          out(b * win.area() + k * win.h + l, c, r / win.h, col / win.w) = x(b, c, r, col);
        }
  return out;
}

}  // namespace

TEST(Split, FourByFourExample) {
  const auto [y, meta] = split_fwd(iota_4x4(), Window{2, 2});
  EXPECT_EQ(y.shape(), (Shape4{4, 1, 2, 2}));
  EXPECT_EQ(meta.pre_batches, 1u);
  EXPECT_EQ(batch_select(y, split_offset(Window{2, 2}, {0, 0})), grid(2, 2, {0, 2, 8, 10}));
  EXPECT_EQ(batch_select(y, split_offset(Window{2, 2}, {1, 0})), grid(2, 2, {1, 3, 9, 11}));
  EXPECT_EQ(batch_select(y, split_offset(Window{2, 2}, {0, 1})), grid(2, 2, {4, 6, 12, 14}));
  EXPECT_EQ(batch_select(y, split_offset(Window{2, 2}, {1, 1})), grid(2, 2, {5, 7, 13, 15}));
  EXPECT_EQ(merge_fwd(y, meta), iota_4x4());
}

TEST(Split, MatchesIndexRuleOnRandomInputs) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const Window win{1 + rng.below(3), 1 + rng.below(3)};
    const Shape4 s{1 + rng.below(3), 1 + rng.below(3), win.h * (1 + rng.below(5)), win.w * (1 + rng.below(5))};
    const auto x = random_uniform<float>(s, rng.next(), -1.f, 1.f);
    EXPECT_EQ(split_fwd(x, win).first, reference_split(x, win));
  }
}

TEST(Split, IdentityWindowAndErrors) {
  const auto x = random_uniform<float>(Shape4{2, 3, 5, 4}, 1, 0.f, 1.f);
  EXPECT_EQ(split_fwd(x, Window{1, 1}).first, x);
  EXPECT_EQ(merge_fwd(x, SplitMeta{Window{1, 1}, 2}), x);
  EXPECT_EQ(kind_of([&] { split_fwd(x, Window{2, 2}); }), ErrorKind::divisibility);
  EXPECT_EQ(kind_of([] { merge_fwd(Tensor<float>(Shape4{3, 1, 2, 2}), SplitMeta{Window{2, 2}, 1}); }),
            ErrorKind::meta);
}

TEST(Split, PreservesValueMultiset) {
  const auto x = random_uniform<float>(Shape4{2, 2, 6, 6}, 2, -1.f, 1.f);
  const auto y = split_fwd(x, Window{3, 2}).first;
  std::vector<float> a(x.values().begin(), x.values().end()), b(y.values().begin(), y.values().end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(Split, MergeThenSplitRestores) {
  const auto y = random_uniform<float>(Shape4{8, 2, 3, 3}, 3, -1.f, 1.f);
  const SplitMeta meta{Window{2, 2}, 2};
  EXPECT_EQ(split_fwd(merge_fwd(y, meta), meta.window).first, y);
}

TEST(Split, NestedSplitsGiveSixteenBatches) {
  const auto x = random_uniform<float>(Shape4{1, 2, 8, 8}, 4, -1.f, 1.f);
  auto [y1, m1] = split_fwd(x, Window{2, 2});
  auto [y2, m2] = split_fwd(y1, Window{2, 2});
  EXPECT_EQ(y2.shape().n, 16u);
  EXPECT_EQ(merge_fwd(merge_fwd(y2, m2), m1), x);
}

TEST(SplitBackward, Cases) {
  const Window win{2, 2};
  const auto g = random_uniform<float>(Shape4{1, 1, 4, 4}, 6, -1.f, 1.f);
  auto [sg, meta] = split_fwd(g, win);
  EXPECT_EQ(split_bwd(sg, meta), g);
  EXPECT_EQ(split_bwd(Tensor<float>(sg.shape(), 1.f), meta), Tensor<float>(g.shape(), 1.f));

  // single 1 at batch k*h+l, position (i, j) -> input row j*h+l, column i*w+k
  const std::size_t k = 1, l = 0, i = 1, j = 0;
  Tensor<float> one(sg.shape());
  one(k * win.h + l, 0, j, i) = 1.f;
  const auto back = split_bwd(one, meta);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(back(0, 0, r, c), (r == j * win.h + l && c == i * win.w + k) ? 1.f : 0.f);

  EXPECT_EQ(merge_bwd(split_bwd(sg, meta), meta), sg);
  EXPECT_EQ(merge_bwd(Tensor<float>(g.shape(), 1.f), meta), Tensor<float>(sg.shape(), 1.f));
  EXPECT_EQ(merge_bwd(g, SplitMeta{Window{1, 1}, 1}), g);
}

TEST(Shrink, FourByFourExample) {
  EXPECT_EQ(shrink_fwd(iota_4x4(), Window{2, 2}, SampleLoc{1, 0}), grid(2, 2, {1, 3, 9, 11}));
  const auto x = random_uniform<float>(Shape4{1, 2, 3, 3}, 7, 0.f, 1.f);
  EXPECT_EQ(shrink_fwd(x, Window{1, 1}, SampleLoc{0, 0}), x);
  EXPECT_EQ(kind_of([&] { shrink_fwd(iota_4x4(), Window{2, 2}, SampleLoc{2, 0}); }), ErrorKind::location);
  EXPECT_EQ(kind_of([&] { shrink_fwd(x, Window{2, 2}, SampleLoc{0, 0}); }), ErrorKind::divisibility);
}

TEST(Shrink, EqualsSplitBatchForEveryLocation) {
  const Window win{3, 2};
  const auto x = random_uniform<float>(Shape4{1, 2, 6, 9}, 8, -1.f, 1.f);
  const auto y = split_fwd(x, win).first;
  for (std::size_t k = 0; k < win.w; ++k)
    for (std::size_t l = 0; l < win.h; ++l)
      EXPECT_EQ(shrink_fwd(x, win, SampleLoc{k, l}), batch_select(y, k * win.h + l));
}

TEST(Shrink, BackwardScattersOntoSubgrid) {
  const auto g = shrink_bwd(Tensor<float>(Shape4{1, 1, 2, 2}, 1.f), Window{2, 2}, SampleLoc{0, 0}, Shape4{1, 1, 4, 4});
  std::size_t ones = 0, zeros = 0;
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      const bool sampled = r % 2 == 0 && c % 2 == 0;
      EXPECT_EQ(g(0, 0, r, c), sampled ? 1.f : 0.f);
      (sampled ? ones : zeros) += 1;
    }
  EXPECT_EQ(ones, 4u);
  EXPECT_EQ(zeros, 12u);

  const auto go = random_uniform<float>(Shape4{2, 3, 2, 3}, 9, -1.f, 1.f);
  EXPECT_EQ(shrink_bwd(go, Window{1, 1}, SampleLoc{0, 0}, go.shape()), go);
  const auto scattered = shrink_bwd(go, Window{2, 3}, SampleLoc{1, 2}, Shape4{2, 3, 6, 6});
  double a = 0, b = 0;
  for (float v : go.values()) a += v;
  for (float v : scattered.values()) b += v;
  EXPECT_DOUBLE_EQ(a, b);
  EXPECT_EQ(kind_of([&] { shrink_bwd(go, Window{2, 2}, SampleLoc{0, 0}, Shape4{2, 3, 6, 6}); }), ErrorKind::shape);
}

TEST(Expand, FourByFourExample) {
  const auto y = expand_fwd(grid(2, 2, {1, 3, 9, 11}), Window{2, 2}, SampleLoc{1, 0});
  const std::array<float, 16> want{0, 1, 0, 3, 0, 0, 0, 0, 0, 9, 0, 11, 0, 0, 0, 0};
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(y.values()[i], want[i]);
}

TEST(Expand, SparsityAndIdentity) {
  const auto x = random_uniform<float>(Shape4{2, 2, 6, 6}, 10, 0.5f, 1.f);
  const auto e = expand_fwd(shrink_fwd(x, Window{2, 3}, SampleLoc{1, 1}), Window{2, 3}, SampleLoc{1, 1});
  const auto zeros = std::count(e.values().begin(), e.values().end(), 0.f);
  EXPECT_EQ(static_cast<std::size_t>(zeros), e.size() - e.size() / 6);
  EXPECT_EQ(expand_fwd(x, Window{1, 1}, SampleLoc{0, 0}), x);
  EXPECT_EQ(kind_of([&] { expand_fwd(x, Window{2, 2}, SampleLoc{0, 2}); }), ErrorKind::location);
}

TEST(Expand, Backward) {
  const Window win{2, 2};
  EXPECT_EQ(expand_bwd(Tensor<float>(Shape4{1, 1, 4, 4}, 1.f), win, SampleLoc{1, 1}), Tensor<float>(Shape4{1, 1, 2, 2}, 1.f));
  const auto g = random_uniform<float>(Shape4{1, 2, 3, 3}, 11, -1.f, 1.f);
  EXPECT_EQ(expand_bwd(expand_fwd(g, win, SampleLoc{0, 1}), win, SampleLoc{0, 1}), g);
  // gradient only at positions other than the sampled one is dropped
  const auto off = expand_fwd(g, win, SampleLoc{1, 0});
  EXPECT_EQ(expand_bwd(off, win, SampleLoc{0, 1}), Tensor<float>(g.shape()));
  EXPECT_EQ(kind_of([&] { expand_bwd(Tensor<float>(Shape4{1, 1, 3, 4}), win, SampleLoc{0, 0}); }),
            ErrorKind::divisibility);
}

TEST(Pooling, ForwardsAreLinear) {
  const Window win{2, 2};
  const SampleLoc loc{0, 1};
  const auto x = random_uniform<float>(Shape4{1, 2, 4, 4}, 12, -1.f, 1.f);
  const auto y = random_uniform<float>(Shape4{1, 2, 4, 4}, 13, -1.f, 1.f);
  const auto sum = map2(x, y, BinaryOp::add);
  EXPECT_EQ(split_fwd(sum, win).first, map2(split_fwd(x, win).first, split_fwd(y, win).first, BinaryOp::add));
  EXPECT_EQ(shrink_fwd(sum, win, loc), map2(shrink_fwd(x, win, loc), shrink_fwd(y, win, loc), BinaryOp::add));
}

TEST(Pooling, AdjointnessIsExact) {
  Rng rng(14);
  for (int i = 0; i < 50; ++i) {
    const Window win{1 + rng.below(3), 1 + rng.below(3)};
    const Shape4 s{1 + rng.below(2), 1 + rng.below(2), win.h * (1 + rng.below(4)), win.w * (1 + rng.below(4))};
    const auto x = random_uniform<float>(s, rng.next(), -1.f, 1.f);
    auto [y, meta] = split_fwd(x, win);
    const auto g = random_uniform<float>(y.shape(), rng.next(), -1.f, 1.f);
    EXPECT_EQ(canonical_dot(y, g), canonical_dot(x, split_bwd(g, meta)));
    const SampleLoc loc = sample_location(rng, win);
    const auto sx = shrink_fwd(x, win, loc);
    const auto gs = random_uniform<float>(sx.shape(), rng.next(), -1.f, 1.f);
    EXPECT_EQ(canonical_dot(sx, gs), canonical_dot(x, shrink_bwd(gs, win, loc, s)));
  }
}

TEST(SampleLocation, UnitWindowAlwaysOrigin) {
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto loc = sample_location(rng, Window{1, 1});
    EXPECT_EQ(loc.k, 0u);
    EXPECT_EQ(loc.l, 0u);
  }
}

TEST(SampleLocation, FrequenciesAreUniform) {
  Rng rng(2024);
  std::array<int, 4> count{};
  for (int i = 0; i < 10000; ++i) ++count[split_offset(Window{2, 2}, sample_location(rng, Window{2, 2}))];
  for (int c : count) EXPECT_NEAR(c / 10000.0, 0.25, 0.02);
}

TEST(SampleLocation, SameSeedSameSequence) {
  Rng a(77), b(77);
  for (int i = 0; i < 100; ++i) {
    const auto x = sample_location(a, Window{3, 2});
    const auto y = sample_location(b, Window{3, 2});
    EXPECT_EQ(x.k, y.k);
    EXPECT_EQ(x.l, y.l);
  }
}
