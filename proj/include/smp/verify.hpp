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

// Self-checks behind `smp verify`. Each suite returns one result per
// property; a suite passes when all of its results pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "smp/error.hpp"
#include "smp/executor.hpp"
#include "smp/gradcheck.hpp"
#include "smp/layers.hpp"
#include "smp/model_zoo.hpp"
#include "smp/network.hpp"
#include "smp/pooling.hpp"
#include "smp/tensor.hpp"

namespace smp {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

inline bool all_passed(const std::vector<CheckResult>& rs) {
  return std::all_of(rs.begin(), rs.end(), [](const CheckResult& r) { return r.passed; });
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

inline Window random_window(Rng& rng, std::size_t max = 3) { return Window{1 + rng.below(max), 1 + rng.below(max)}; }

// Random shape whose spatial extents lie in [2, max_extent] and are multiples of win.
inline Shape4 random_divisible_shape(Rng& rng, const Window& win, std::size_t max_extent = 64) {
  auto extent = [&](std::size_t f) {
    const std::size_t lo = (2 + f - 1) / f;
    const std::size_t hi = max_extent / f;
    return f * (lo + rng.below(hi - lo + 1));
  };
  return Shape4{1 + rng.below(3), 1 + rng.below(3), extent(win.h), extent(win.w)};
}

template <typename T>
Tensor<T> random_tensor(Rng& rng, const Shape4& s, T lo = T(-1), T hi = T(1)) {
  return random_uniform<T>(s, rng.next(), lo, hi);
}

inline std::vector<double> flatten(std::initializer_list<std::span<const double>> parts) {
  std::vector<double> out;
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Round trips, shrink/split consistency and adjointness

inline CheckResult check_split_merge_roundtrip(std::uint64_t seed, std::size_t cases) {
  Rng rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    const Window win = detail::random_window(rng, 4);
    const auto x = detail::random_tensor<float>(rng, detail::random_divisible_shape(rng, win));
    auto [y, meta] = split_fwd(x, win);
    if (!(merge_fwd(y, meta) == x)) return {"split/merge round trip", false, "mismatch at case " + std::to_string(i)};
  }
  return {"split/merge round trip", true, std::to_string(cases) + " cases bitwise"};
}

inline CheckResult check_nested_roundtrip(std::uint64_t seed, std::size_t cases) {
  Rng rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    const Window a = detail::random_window(rng), b = detail::random_window(rng);
    const Window both{a.w * b.w, a.h * b.h};
    const auto x = detail::random_tensor<float>(rng, detail::random_divisible_shape(rng, both));
    auto [y1, m1] = split_fwd(x, a);
    auto [y2, m2] = split_fwd(y1, b);
    if (!(merge_fwd(merge_fwd(y2, m2), m1) == x))
      return {"nested split/merge round trip", false, "mismatch at case " + std::to_string(i)};
  }
  return {"nested split/merge round trip", true, std::to_string(cases) + " cases bitwise"};
}

inline CheckResult check_shrink_matches_split(std::uint64_t seed, std::size_t cases) {
  Rng rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    const Window win = detail::random_window(rng);
    const auto x = detail::random_tensor<float>(rng, detail::random_divisible_shape(rng, win, 32));
    const auto y = split_fwd(x, win).first;
    for (std::size_t k = 0; k < win.w; ++k)
      for (std::size_t l = 0; l < win.h; ++l) {
        const auto s = shrink_fwd(x, win, SampleLoc{k, l});
        for (std::size_t b = 0; b < x.shape().n; ++b) {
          const auto part = y.batch(b * win.area() + split_offset(win, SampleLoc{k, l}));
          const auto got = s.batch(b);
          if (!std::equal(part.begin(), part.end(), got.begin(), got.end()))
            return {"shrink equals split batch", false, "mismatch at case " + std::to_string(i)};
        }
      }
  }
  return {"shrink equals split batch", true, std::to_string(cases) + " cases, every location"};
}

inline CheckResult check_adjointness(std::uint64_t seed, std::size_t cases) {
  Rng rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    const Window win = detail::random_window(rng);
    const Shape4 s = detail::random_divisible_shape(rng, win, 24);
    const auto x = detail::random_tensor<float>(rng, s);
    auto [y, meta] = split_fwd(x, win);
    const auto g = detail::random_tensor<float>(rng, y.shape());
    const auto bad = [&](const char* op) {
      return CheckResult{"adjointness", false, std::string(op) + " differs at case " + std::to_string(i)};
    };
    if (canonical_dot(y, g) != canonical_dot(x, split_bwd(g, meta))) return bad("split");
    const auto gm = detail::random_tensor<float>(rng, x.shape());
    if (canonical_dot(merge_fwd(y, meta), gm) != canonical_dot(y, merge_bwd(gm, meta))) return bad("merge");

    const SampleLoc loc = sample_location(rng, win);
    const auto sx = shrink_fwd(x, win, loc);
    const auto gs = detail::random_tensor<float>(rng, sx.shape());
    if (canonical_dot(sx, gs) != canonical_dot(x, shrink_bwd(gs, win, loc, s))) return bad("shrink");
    const auto ex = expand_fwd(sx, win, loc);
    const auto ge = detail::random_tensor<float>(rng, ex.shape());
    if (canonical_dot(ex, ge) != canonical_dot(sx, expand_bwd(ge, win, loc))) return bad("expand");
  }
  return {"adjointness", true, std::to_string(cases) + " cases exact"};
}

inline std::vector<CheckResult> verify_roundtrip(std::uint64_t seed, std::size_t cases = 200) {
  return {check_split_merge_roundtrip(mix_seed(seed, 10), cases), check_nested_roundtrip(mix_seed(seed, 11), cases),
          check_shrink_matches_split(mix_seed(seed, 12), cases), check_adjointness(mix_seed(seed, 13), cases)};
}

// ---------------------------------------------------------------------------
// Gradient checks (64-bit, loss = <f(x), g> for a fixed random g)

namespace detail {

inline double gradcheck_conv(Rng& rng) {
  const std::size_t k = 1 + rng.below(3);
  const Pair2 stride{1 + rng.below(2), 1 + rng.below(2)};
  const Pair2 dil{1 + rng.below(2), 1 + rng.below(2)};
  const Pair2 pad{rng.below(2), rng.below(2)};
  auto p = make_conv<double>(1 + rng.below(3), 1 + rng.below(3), Pair2{k, k}, stride, dil, pad, rng.coin());
  p.weight = random_tensor<double>(rng, p.weight.shape());
  for (auto& b : p.bias) b = 2 * rng.uniform() - 1;
  auto x = random_tensor<double>(rng, Shape4{1 + rng.below(2), p.in_ch, 5 + rng.below(3), 5 + rng.below(3)});
  const auto g = random_tensor<double>(rng, conv_out_shape(x.shape(), p));
  const auto an = conv2d_bwd(x, p, g);
  auto loss = [&] { return dot(conv2d_fwd(x, p), g); };
  const auto nx = numeric_gradient(x.values(), loss);
  const auto nw = numeric_gradient(p.weight.values(), loss);
  const auto nb = numeric_gradient(std::span(p.bias), loss);
  return relative_error(flatten({an.grad_x.values(), an.grad_w.values(), an.grad_b}), flatten({nx, nw, nb}));
}

inline double gradcheck_bn(Rng& rng) {
  const std::size_t c = 1 + rng.below(3);
  auto p = make_batchnorm<double>(c);
  for (std::size_t i = 0; i < c; ++i) {
    p.scale[i] = 0.5 + rng.uniform();
    p.shift[i] = rng.uniform() - 0.5;
  }
  auto x = random_tensor<double>(rng, Shape4{2 + rng.below(2), c, 2 + rng.below(3), 2 + rng.below(3)});
  const auto g = random_tensor<double>(rng, x.shape());
  BnCache<double> cache;
  batchnorm_fwd(x, p, BnMode::train, &cache);
  const auto an = batchnorm_bwd(g, p, cache);
  auto loss = [&] { return dot(batchnorm_fwd(x, p, BnMode::train), g); };
  const auto nx = numeric_gradient(x.values(), loss);
  const auto ns = numeric_gradient(std::span(p.scale), loss);
  const auto nh = numeric_gradient(std::span(p.shift), loss);
  return relative_error(flatten({an.grad_x.values(), an.grad_scale, an.grad_shift}), flatten({nx, ns, nh}));
}

inline double gradcheck_relu(Rng& rng) {
  auto x = random_tensor<double>(rng, Shape4{1 + rng.below(2), 1 + rng.below(3), 3 + rng.below(3), 3 + rng.below(3)});
  for (auto& v : x.values())
    if (std::abs(v) < 0.05) v = v < 0 ? -0.05 : 0.05;  // keep clear of the kink
  const auto g = random_tensor<double>(rng, x.shape());
  const auto an = relu_bwd(x, g);
  const auto nx = numeric_gradient(x.values(), [&] { return dot(relu_fwd(x), g); });
  return relative_error(an.values(), nx);
}

inline double gradcheck_xent(Rng& rng) {
  const std::size_t classes = 2 + rng.below(4);
  auto x = random_tensor<double>(rng, Shape4{1 + rng.below(2), classes, 2 + rng.below(3), 2 + rng.below(3)}, -3.0, 3.0);
  std::vector<std::uint8_t> labels(x.shape().n * x.shape().plane());
  for (auto& v : labels) v = rng.coin(0.2) ? default_ignore_index : static_cast<std::uint8_t>(rng.below(classes));
  labels[0] = 0;
  const auto an = softmax_xent_bwd(x, std::span<const std::uint8_t>(labels));
  const auto nx =
      numeric_gradient(x.values(), [&] { return softmax_xent_fwd(x, std::span<const std::uint8_t>(labels)); });
  return relative_error(an.values(), nx);
}

inline double gradcheck_shrink_expand(Rng& rng) {
  const Window win = random_window(rng);
  auto x = random_tensor<double>(rng, random_divisible_shape(rng, win, 8));
  const SampleLoc loc = sample_location(rng, win);
  const auto gs = random_tensor<double>(rng, shrink_fwd(x, win, loc).shape());
  const auto as = shrink_bwd(gs, win, loc, x.shape());
  const auto ns = numeric_gradient(x.values(), [&] { return dot(shrink_fwd(x, win, loc), gs); });
  auto y = random_tensor<double>(rng, gs.shape());
  const auto ge = random_tensor<double>(rng, x.shape());
  const auto ae = expand_bwd(ge, win, loc);
  const auto ne = numeric_gradient(y.values(), [&] { return dot(expand_fwd(y, win, loc), ge); });
  return relative_error(flatten({as.values(), ae.values()}), flatten({ns, ne}));
}

inline double gradcheck_split_merge(Rng& rng) {
  const Window win = random_window(rng);
  auto x = random_tensor<double>(rng, random_divisible_shape(rng, win, 8));
  auto [y0, meta] = split_fwd(x, win);
  const auto gs = random_tensor<double>(rng, y0.shape());
  const auto as = split_bwd(gs, meta);
  const auto ns = numeric_gradient(x.values(), [&] { return dot(split_fwd(x, win).first, gs); });
  auto y = random_tensor<double>(rng, y0.shape());
  const auto gm = random_tensor<double>(rng, x.shape());
  const auto am = merge_bwd(gm, meta);
  const auto nm = numeric_gradient(y.values(), [&] { return dot(merge_fwd(y, meta), gm); });
  return relative_error(flatten({as.values(), am.values()}), flatten({ns, nm}));
}

inline double gradcheck_maxpool(Rng& rng) {
  auto x = random_tensor<double>(rng, Shape4{1 + rng.below(2), 1 + rng.below(3), 2 * (1 + rng.below(3)), 2 * (1 + rng.below(3))});
  const auto r = maxpool2x2_fwd(x);
  const auto g = random_tensor<double>(rng, r.output.shape());
  const auto an = maxpool2x2_bwd(g, std::span<const std::size_t>(r.argmax), x.shape());
  const auto nx = numeric_gradient(x.values(), [&] { return dot(maxpool2x2_fwd(x).output, g); });
  return relative_error(an.values(), nx);
}

inline double gradcheck_upsample(Rng& rng) {
  const std::size_t f = 1 + rng.below(4);
  auto x = random_tensor<double>(rng, Shape4{1, 1 + rng.below(2), 1 + rng.below(4), 1 + rng.below(4)});
  const auto y = bilinear_upsample(x, f);
  const auto g = random_tensor<double>(rng, y.shape());
  const auto an = bilinear_upsample_bwd(g, f, x.shape());
  const auto nx = numeric_gradient(x.values(), [&] { return dot(bilinear_upsample(x, f), g); });
  return relative_error(an.values(), nx);
}

// Whole-network check over every parameter and the input of a small
// training-mode network with fixed sample locations.
inline double gradcheck_network(Rng& rng, bool smp) {
  ToyConfig cfg;
  cfg.classes = 3;
  cfg.widths = {2, 3, 4};
  cfg.blocks = {1, 1};
  cfg.seed = rng.next();
  auto net = build_variant<double>(smp ? ArchVariant::ToySmp : ArchVariant::ToyBaseline, cfg, true);
  Rng bn_rng(rng.next());
  randomize_batchnorm(net.layers, bn_rng);
  ForwardOptions opts;
  for (int site = 1; site <= 2; ++site) opts.locs[site] = sample_location(rng, cfg.window);
  auto x = random_tensor<double>(rng, Shape4{2, 3, 8, 8});
  std::vector<std::uint8_t> labels(2 * 64);
  for (auto& v : labels) v = static_cast<std::uint8_t>(rng.below(cfg.classes));
  auto loss = [&] { return softmax_xent_fwd(forward(net, x, opts).output, std::span<const std::uint8_t>(labels)); };
  const auto fwd = forward(net, x, opts);
  const auto grads =
      backward(net, fwd.tape, softmax_xent_bwd(fwd.output, std::span<const std::uint8_t>(labels)));
  std::vector<double> analytic(grads.input.values().begin(), grads.input.values().end());
  std::vector<double> numeric = numeric_gradient(x.values(), loss);
  auto views = parameter_views(net);
  for (std::size_t i = 0; i < views.size(); ++i) {
    analytic.insert(analytic.end(), grads.params[i].begin(), grads.params[i].end());
    const auto n = numeric_gradient(views[i], loss);
    numeric.insert(numeric.end(), n.begin(), n.end());
  }
  return relative_error(analytic, numeric);
}

}  // namespace detail

struct GradCheckCase {
  const char* name;
  std::function<double(Rng&)> run;
};

inline std::vector<GradCheckCase> gradcheck_cases() {
  return {{"conv", detail::gradcheck_conv},
          {"batchnorm (train)", detail::gradcheck_bn},
          {"relu", detail::gradcheck_relu},
          {"softmax cross-entropy", detail::gradcheck_xent},
          {"shrink/expand", detail::gradcheck_shrink_expand},
          {"split/merge", detail::gradcheck_split_merge},
          {"max pool", detail::gradcheck_maxpool},
          {"bilinear upsample", detail::gradcheck_upsample}};
}

inline std::vector<CheckResult> verify_gradcheck(std::uint64_t seed, std::size_t instances = 20,
                                                 double tolerance = 1e-3) {
  std::vector<CheckResult> out;
  std::uint64_t salt = 20;
  for (const auto& c : gradcheck_cases()) {
    Rng rng(mix_seed(seed, salt++));
    double worst = 0;
    for (std::size_t i = 0; i < instances; ++i) worst = std::max(worst, c.run(rng));
    out.push_back({std::string("gradient ") + c.name, worst < tolerance,
                   std::to_string(instances) + " instances, worst relative error " + detail::fmt(worst)});
  }
  for (bool smp : {true, false}) {
    Rng rng(mix_seed(seed, salt++));
    const double err = detail::gradcheck_network(rng, smp);
    out.push_back({std::string("gradient whole network (") + (smp ? "toy_smp" : "toy_baseline") + ")", err < tolerance,
                   "relative error " + detail::fmt(err)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full-split oracle

/// Random-weight toy SMP network (stride-1 convolutions only) with `sites`
/// split sites and randomised eval-mode BN.
inline Network<float> oracle_test_net(std::size_t sites, std::uint64_t seed) {
  auto net = build_toy_smp<float>(toy_config_for_sites(sites, seed), false);
  Rng rng(mix_seed(seed, 30));
  randomize_batchnorm(net.layers, rng);
  return net;
}

inline CheckResult check_oracle(std::size_t sites, std::uint64_t seed, std::size_t extent, double tolerance = 1e-5) {
  const auto net = oracle_test_net(sites, seed);
  const auto x = random_uniform<float>(Shape4{1, 3, extent, extent}, mix_seed(seed, 31), -1.f, 1.f);
  const double diff = max_abs_diff(full_split_oracle(net, x), predict(net, x));
  std::size_t combos = 1;
  for (std::size_t i = 0; i < sites; ++i) combos *= 4;
  return {"full-split oracle L=" + std::to_string(sites), diff <= tolerance,
          std::to_string(combos) + " combinations, max abs diff " + detail::fmt(diff)};
}

inline std::vector<CheckResult> verify_oracle(std::uint64_t seed, std::size_t extent = 32) {
  return {check_oracle(1, seed, extent), check_oracle(2, seed, extent)};
}

// ---------------------------------------------------------------------------
// Parallel executor determinism

inline CheckResult check_parallel(std::uint64_t seed, const Network<float>& net, const Tensor<float>& x,
                                  const std::vector<std::size_t>& workers) {
  const auto ref = predict(net, x);
  for (auto w : workers)
    if (!(forward_parallel(net, x, w) == ref))
      return {"parallel determinism (" + net.model + ")", false, std::to_string(w) + " workers differ"};
  (void)seed;
  std::string list;
  for (auto w : workers) list += (list.empty() ? "" : ",") + std::to_string(w);
  return {"parallel determinism (" + net.model + ")", true, "workers {" + list + "} bitwise equal to forward"};
}

inline std::vector<CheckResult> verify_parallel(std::uint64_t seed) {
  const std::vector<std::size_t> workers{1, 2, 4, 8};
  const auto split_net = build_runtime_net<float>(ArchVariant::SplitNet, seed);
  const auto x = random_uniform<float>(Shape4{1, 3, 32, 32}, mix_seed(seed, 40), 0.f, 1.f);
  const auto toy = oracle_test_net(2, seed);
  return {check_parallel(seed, split_net, x, workers), check_parallel(seed, toy, x, workers)};
}

inline const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> s{"roundtrip", "gradcheck", "oracle", "parallel"};
  return s;
}

inline std::vector<CheckResult> run_verify_suite(const std::string& suite, std::uint64_t seed) {
  if (suite == "roundtrip") return verify_roundtrip(seed);
  if (suite == "gradcheck") return verify_gradcheck(seed);
  if (suite == "oracle") return verify_oracle(seed);
  if (suite == "parallel") return verify_parallel(seed);
  fail(ErrorKind::argument, "unknown suite '" + suite + "'");
}

}  // namespace smp
