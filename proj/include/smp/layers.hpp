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

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smp/error.hpp"
#include "smp/pooling.hpp"
#include "smp/tensor.hpp"

namespace smp {

struct Pair2 {
  std::size_t h = 1;
  std::size_t w = 1;
  friend bool operator==(const Pair2&, const Pair2&) = default;
};

template <typename T = float>
struct Conv2dParams {
  std::size_t in_ch = 1;
  std::size_t out_ch = 1;
  Pair2 kernel{3, 3};
  Pair2 stride{1, 1};
  Pair2 dilation{1, 1};
  Pair2 padding{0, 0};
  Tensor<T> weight;         // (out_ch, in_ch, kh, kw)
  std::vector<T> bias;      // empty when the layer has no bias

  bool has_bias() const noexcept { return !bias.empty(); }
};

/// Builds a parameter record with zero weights of the right shape.
template <typename T = float>
Conv2dParams<T> make_conv(std::size_t in_ch, std::size_t out_ch, Pair2 kernel, Pair2 stride = {1, 1},
                          Pair2 dilation = {1, 1}, Pair2 padding = {0, 0}, bool bias = false) {
  Conv2dParams<T> p;
  p.in_ch = in_ch;
  p.out_ch = out_ch;
  p.kernel = kernel;
  p.stride = stride;
  p.dilation = dilation;
  p.padding = padding;
  p.weight = Tensor<T>(Shape4{out_ch, in_ch, kernel.h, kernel.w});
  if (bias) p.bias.assign(out_ch, T(0));
  return p;
}

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t s, std::size_t d, std::size_t p) {
  const auto span = static_cast<long long>(d * (k - 1) + 1);
  const auto avail = static_cast<long long>(in + 2 * p);
  if (s == 0 || avail < span) return 0;
  return static_cast<std::size_t>((avail - span) / static_cast<long long>(s) + 1);
}

template <typename T>
Shape4 conv_out_shape(const Shape4& in, const Conv2dParams<T>& p) {
  if (in.c != p.in_ch)
    fail(ErrorKind::shape, "conv expects " + std::to_string(p.in_ch) + " input channels, got " + std::to_string(in.c));
  const std::size_t oh = conv_out_extent(in.h, p.kernel.h, p.stride.h, p.dilation.h, p.padding.h);
  const std::size_t ow = conv_out_extent(in.w, p.kernel.w, p.stride.w, p.dilation.w, p.padding.w);
  if (oh == 0 || ow == 0) fail(ErrorKind::shape, "conv output extent is empty for input " + in.str());
  return Shape4{in.n, p.out_ch, oh, ow};
}

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Lays out the receptive patches of one sample as a (in_ch*kh*kw) x (oh*ow) matrix.
template <typename T>
void im2col(std::span<const T> x, const Shape4& in, const Conv2dParams<T>& p, std::size_t oh, std::size_t ow,
            RowMatrix<T>& col) {
  const std::size_t kh = p.kernel.h, kw = p.kernel.w;
  col.resize(static_cast<Eigen::Index>(in.c * kh * kw), static_cast<Eigen::Index>(oh * ow));
  for (std::size_t c = 0; c < in.c; ++c)
    for (std::size_t ki = 0; ki < kh; ++ki)
      for (std::size_t kj = 0; kj < kw; ++kj) {
        T* dst = col.data() + ((c * kh + ki) * kw + kj) * oh * ow;
        for (std::size_t r = 0; r < oh; ++r) {
          const long long y = static_cast<long long>(r * p.stride.h + ki * p.dilation.h) -
                              static_cast<long long>(p.padding.h);
          for (std::size_t q = 0; q < ow; ++q) {
            const long long xx = static_cast<long long>(q * p.stride.w + kj * p.dilation.w) -
                                 static_cast<long long>(p.padding.w);
            const bool inside = y >= 0 && xx >= 0 && y < static_cast<long long>(in.h) &&
                                xx < static_cast<long long>(in.w);
            dst[r * ow + q] = inside ? x[(c * in.h + static_cast<std::size_t>(y)) * in.w + static_cast<std::size_t>(xx)]
                                     : T(0);
          }
        }
      }
}

template <typename T>
void col2im(const RowMatrix<T>& col, const Shape4& in, const Conv2dParams<T>& p, std::size_t oh, std::size_t ow,
            std::span<T> gx) {
  const std::size_t kh = p.kernel.h, kw = p.kernel.w;
  for (std::size_t c = 0; c < in.c; ++c)
    for (std::size_t ki = 0; ki < kh; ++ki)
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const T* src = col.data() + ((c * kh + ki) * kw + kj) * oh * ow;
        for (std::size_t r = 0; r < oh; ++r) {
          const long long y = static_cast<long long>(r * p.stride.h + ki * p.dilation.h) -
                              static_cast<long long>(p.padding.h);
          if (y < 0 || y >= static_cast<long long>(in.h)) continue;
          for (std::size_t q = 0; q < ow; ++q) {
            const long long xx = static_cast<long long>(q * p.stride.w + kj * p.dilation.w) -
                                 static_cast<long long>(p.padding.w);
            if (xx < 0 || xx >= static_cast<long long>(in.w)) continue;
            gx[(c * in.h + static_cast<std::size_t>(y)) * in.w + static_cast<std::size_t>(xx)] += src[r * ow + q];
          }
        }
      }
}

}  // namespace detail

/// Cross-correlation with stride, dilation and zero padding. Each sample is
/// computed independently, so results do not depend on the batch it sits in.
template <typename T>
Tensor<T> conv2d_fwd(const Tensor<T>& x, const Conv2dParams<T>& p) {
  const Shape4 os = conv_out_shape(x.shape(), p);
  const Shape4& is = x.shape();
  const auto K = static_cast<Eigen::Index>(p.in_ch * p.kernel.h * p.kernel.w);
  const auto P = static_cast<Eigen::Index>(os.h * os.w);
  Tensor<T> out(os);
  Eigen::Map<const detail::RowMatrix<T>> weight(p.weight.data(), static_cast<Eigen::Index>(p.out_ch), K);
  detail::RowMatrix<T> col;
  for (std::size_t n = 0; n < is.n; ++n) {
    detail::im2col(x.batch(n), is, p, os.h, os.w, col);
    Eigen::Map<detail::RowMatrix<T>> y(out.batch(n).data(), static_cast<Eigen::Index>(p.out_ch), P);
    y.noalias() = weight * col;
    if (p.has_bias())
      for (std::size_t o = 0; o < p.out_ch; ++o) y.row(static_cast<Eigen::Index>(o)).array() += p.bias[o];
  }
  return out;
}

template <typename T>
struct ConvGrads {
  Tensor<T> grad_x;
  Tensor<T> grad_w;
  std::vector<T> grad_b;
};

template <typename T>
ConvGrads<T> conv2d_bwd(const Tensor<T>& x, const Conv2dParams<T>& p, const Tensor<T>& grad_out) {
  const Shape4 os = conv_out_shape(x.shape(), p);
  if (grad_out.shape() != os)
    fail(ErrorKind::shape, "conv gradient has shape " + grad_out.shape().str() + ", expected " + os.str());
  const Shape4& is = x.shape();
  const auto K = static_cast<Eigen::Index>(p.in_ch * p.kernel.h * p.kernel.w);
  const auto P = static_cast<Eigen::Index>(os.h * os.w);
  const auto O = static_cast<Eigen::Index>(p.out_ch);

  ConvGrads<T> g{Tensor<T>(is), Tensor<T>(p.weight.shape()), {}};
  if (p.has_bias()) g.grad_b.assign(p.out_ch, T(0));
  Eigen::Map<const detail::RowMatrix<T>> weight(p.weight.data(), O, K);
  Eigen::Map<detail::RowMatrix<T>> gw(g.grad_w.data(), O, K);
  detail::RowMatrix<T> col, gcol;
  for (std::size_t n = 0; n < is.n; ++n) {
    Eigen::Map<const detail::RowMatrix<T>> gy(grad_out.batch(n).data(), O, P);
    detail::im2col(x.batch(n), is, p, os.h, os.w, col);
    gw.noalias() += gy * col.transpose();
    gcol.noalias() = weight.transpose() * gy;
    detail::col2im(gcol, is, p, os.h, os.w, g.grad_x.batch(n));
    if (p.has_bias())
      for (std::size_t o = 0; o < p.out_ch; ++o) g.grad_b[o] += gy.row(static_cast<Eigen::Index>(o)).sum();
  }
  return g;
}

// ---------------------------------------------------------------------------
// Batch normalization

enum class BnMode { train, eval };

template <typename T = float>
struct BatchNorm {
  std::size_t channels = 1;
  std::vector<T> scale;
  std::vector<T> shift;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T epsilon = T(1e-5);
  T momentum = T(0.1);
};

template <typename T = float>
BatchNorm<T> make_batchnorm(std::size_t channels) {
  BatchNorm<T> p;
  p.channels = channels;
  p.scale.assign(channels, T(1));
  p.shift.assign(channels, T(0));
  p.running_mean.assign(channels, T(0));
  p.running_var.assign(channels, T(1));
  return p;
}

template <typename T>
struct BnCache {
  BnMode mode = BnMode::eval;
  std::vector<T> mean;
  std::vector<T> var;      // biased batch variance
  std::vector<T> inv_std;
  Tensor<T> xhat;
};

template <typename T>
Tensor<T> batchnorm_fwd(const Tensor<T>& x, const BatchNorm<T>& p, BnMode mode, BnCache<T>* cache = nullptr) {
  const Shape4& s = x.shape();
  if (s.c != p.channels)
    fail(ErrorKind::shape, "batchnorm expects " + std::to_string(p.channels) + " channels, got " + std::to_string(s.c));
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n * plane);
  std::vector<T> mean(s.c), var(s.c), inv_std(s.c);
  for (std::size_t c = 0; c < s.c; ++c) {
    if (mode == BnMode::train) {
      double sum = 0;
      for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t i = 0; i < plane; ++i) sum += x.values()[(n * s.c + c) * plane + i];
      const double mu = sum / count;
      double sq = 0;
      for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = x.values()[(n * s.c + c) * plane + i] - mu;
          sq += d * d;
        }
      mean[c] = static_cast<T>(mu);
      var[c] = static_cast<T>(sq / count);
    } else {
      mean[c] = p.running_mean[c];
      var[c] = p.running_var[c];
    }
    inv_std[c] = T(1) / std::sqrt(var[c] + p.epsilon);
  }

  Tensor<T> out(s);
  Tensor<T> xhat = cache ? Tensor<T>(s) : Tensor<T>();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t base = (n * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T h = (x.values()[base + i] - mean[c]) * inv_std[c];
        out.values()[base + i] = p.scale[c] * h + p.shift[c];
        if (cache) xhat.values()[base + i] = h;
      }
    }
  if (cache) *cache = BnCache<T>{mode, std::move(mean), std::move(var), std::move(inv_std), std::move(xhat)};
  return out;
}

/// Folds the batch statistics of a train-mode pass into the running estimates.
template <typename T>
void batchnorm_update_running(BatchNorm<T>& p, const BnCache<T>& cache, std::size_t count) {
  if (cache.mode != BnMode::train) return;
  const T unbias = count > 1 ? static_cast<T>(count) / static_cast<T>(count - 1) : T(1);
  for (std::size_t c = 0; c < p.channels; ++c) {
    p.running_mean[c] = (T(1) - p.momentum) * p.running_mean[c] + p.momentum * cache.mean[c];
    p.running_var[c] = (T(1) - p.momentum) * p.running_var[c] + p.momentum * cache.var[c] * unbias;
  }
}

/// Train-mode forward that also updates the running statistics.
template <typename T>
Tensor<T> batchnorm_fwd_train(const Tensor<T>& x, BatchNorm<T>& p) {
  BnCache<T> cache;
  Tensor<T> y = batchnorm_fwd(x, p, BnMode::train, &cache);
  batchnorm_update_running(p, cache, x.shape().n * x.shape().plane());
  return y;
}

template <typename T>
struct BnGrads {
  Tensor<T> grad_x;
  std::vector<T> grad_scale;
  std::vector<T> grad_shift;
};

template <typename T>
BnGrads<T> batchnorm_bwd(const Tensor<T>& grad_out, const BatchNorm<T>& p, const BnCache<T>& cache) {
  const Shape4& s = grad_out.shape();
  if (cache.xhat.shape() != s) fail(ErrorKind::shape, "batchnorm gradient does not match the cached input");
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n * plane);
  BnGrads<T> g{Tensor<T>(s), std::vector<T>(s.c, T(0)), std::vector<T>(s.c, T(0))};
  for (std::size_t c = 0; c < s.c; ++c) {
    double sum_dy = 0, sum_dy_xhat = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const std::size_t base = (n * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += grad_out.values()[base + i];
        sum_dy_xhat += grad_out.values()[base + i] * cache.xhat.values()[base + i];
      }
    }
    g.grad_shift[c] = static_cast<T>(sum_dy);
    g.grad_scale[c] = static_cast<T>(sum_dy_xhat);
    const T k = p.scale[c] * cache.inv_std[c];
    for (std::size_t n = 0; n < s.n; ++n) {
      const std::size_t base = (n * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T dy = grad_out.values()[base + i];
        if (cache.mode == BnMode::train)
          g.grad_x.values()[base + i] = static_cast<T>(
              k * (dy - sum_dy / count - cache.xhat.values()[base + i] * sum_dy_xhat / count));
        else
          g.grad_x.values()[base + i] = k * dy;
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// ReLU and max pooling

template <typename T>
Tensor<T> relu_fwd(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out.values()[i] = std::max(x.values()[i], T(0));
  return out;
}

template <typename T>
Tensor<T> relu_bwd(const Tensor<T>& x, const Tensor<T>& grad_out) {
  require_same_shape(x, grad_out, "relu_bwd");
  Tensor<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g.values()[i] = x.values()[i] > T(0) ? grad_out.values()[i] : T(0);
  return g;
}

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

/// 2x2 window, stride 2. Ties go to the first element in row-major order.
template <typename T>
MaxPoolResult<T> maxpool2x2_fwd(const Tensor<T>& x) {
  const Shape4& s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) fail(ErrorKind::divisibility, "maxpool needs even extents, got " + s.str());
  MaxPoolResult<T> r{Tensor<T>(Shape4{s.n, s.c, s.h / 2, s.w / 2}), {}};
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < s.h / 2; ++i)
        for (std::size_t j = 0; j < s.w / 2; ++j, ++o) {
          std::size_t best = x.offset(n, c, 2 * i, 2 * j);
          for (std::size_t di = 0; di < 2; ++di)
            for (std::size_t dj = 0; dj < 2; ++dj) {
              const std::size_t idx = x.offset(n, c, 2 * i + di, 2 * j + dj);
              if (x.values()[idx] > x.values()[best]) best = idx;
            }
          r.output.values()[o] = x.values()[best];
          r.argmax[o] = best;
        }
  return r;
}

template <typename T>
Tensor<T> maxpool2x2_bwd(const Tensor<T>& grad_out, std::span<const std::size_t> argmax, const Shape4& in_shape) {
  if (argmax.size() != grad_out.size()) fail(ErrorKind::shape, "maxpool gradient does not match its argmax record");
  Tensor<T> g(in_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g.values()[argmax[i]] += grad_out.values()[i];
  return g;
}

// ---------------------------------------------------------------------------
// Bilinear upsampling, align-corners-false

namespace detail {

struct LerpTap {
  std::size_t i0, i1;
  double frac;
};

inline std::vector<LerpTap> lerp_taps(std::size_t in, std::size_t factor) {
  std::vector<LerpTap> taps(in * factor);
  for (std::size_t o = 0; o < taps.size(); ++o) {
    double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
    if (src < 0) src = 0;
    auto i0 = static_cast<std::size_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, src - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace detail

template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& x, std::size_t factor) {
  if (factor == 0) fail(ErrorKind::argument, "upsample factor must be at least 1");
  const Shape4& s = x.shape();
  if (factor == 1) return x;
  const auto ty = detail::lerp_taps(s.h, factor);
  const auto tx = detail::lerp_taps(s.w, factor);
  Tensor<T> out(Shape4{s.n, s.c, s.h * factor, s.w * factor});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t r = 0; r < ty.size(); ++r)
        for (std::size_t q = 0; q < tx.size(); ++q) {
          const auto& a = ty[r];
          const auto& b = tx[q];
          const double top = (1 - b.frac) * x(n, c, a.i0, b.i0) + b.frac * x(n, c, a.i0, b.i1);
          const double bot = (1 - b.frac) * x(n, c, a.i1, b.i0) + b.frac * x(n, c, a.i1, b.i1);
          out(n, c, r, q) = static_cast<T>((1 - a.frac) * top + a.frac * bot);
        }
  return out;
}

template <typename T>
Tensor<T> bilinear_upsample_bwd(const Tensor<T>& grad_out, std::size_t factor, const Shape4& in_shape) {
  if (factor == 0) fail(ErrorKind::argument, "upsample factor must be at least 1");
  const Shape4 expect{in_shape.n, in_shape.c, in_shape.h * factor, in_shape.w * factor};
  if (grad_out.shape() != expect)
    fail(ErrorKind::shape, "upsample gradient has shape " + grad_out.shape().str() + ", expected " + expect.str());
  if (factor == 1) return grad_out;
  const auto ty = detail::lerp_taps(in_shape.h, factor);
  const auto tx = detail::lerp_taps(in_shape.w, factor);
  Tensor<T> g(in_shape);
  for (std::size_t n = 0; n < in_shape.n; ++n)
    for (std::size_t c = 0; c < in_shape.c; ++c)
      for (std::size_t r = 0; r < ty.size(); ++r)
        for (std::size_t q = 0; q < tx.size(); ++q) {
          const auto& a = ty[r];
          const auto& b = tx[q];
          const double d = grad_out(n, c, r, q);
          g(n, c, a.i0, b.i0) += static_cast<T>(d * (1 - a.frac) * (1 - b.frac));
          g(n, c, a.i0, b.i1) += static_cast<T>(d * (1 - a.frac) * b.frac);
          g(n, c, a.i1, b.i0) += static_cast<T>(d * a.frac * (1 - b.frac));
          g(n, c, a.i1, b.i1) += static_cast<T>(d * a.frac * b.frac);
        }
  return g;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy over the channel axis

inline constexpr std::uint8_t default_ignore_index = 255;

namespace detail {

template <typename T>
void check_labels(const Tensor<T>& logits, std::span<const std::uint8_t> labels, std::uint8_t ignore) {
  const Shape4& s = logits.shape();
  if (labels.size() != s.n * s.plane())
    fail(ErrorKind::shape, "expected " + std::to_string(s.n * s.plane()) + " labels, got " +
                               std::to_string(labels.size()));
  for (auto v : labels)
    if (v != ignore && v >= s.c)
      fail(ErrorKind::label, "label " + std::to_string(v) + " out of range for " + std::to_string(s.c) + " classes");
}

// Calls fn(pixel base offset, label, log-sum-exp, max) per non-ignored pixel.
template <typename T, typename Fn>
std::size_t for_each_labelled(const Tensor<T>& logits, std::span<const std::uint8_t> labels, std::uint8_t ignore,
                              Fn&& fn) {
  const Shape4& s = logits.shape();
  const std::size_t plane = s.plane();
  std::size_t counted = 0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t i = 0; i < plane; ++i) {
      const auto label = labels[n * plane + i];
      if (label == ignore) continue;
      const std::size_t base = n * s.c * plane + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < s.c; ++c) mx = std::max(mx, static_cast<double>(logits.values()[base + c * plane]));
      double z = 0;
      for (std::size_t c = 0; c < s.c; ++c) z += std::exp(logits.values()[base + c * plane] - mx);
      fn(base, label, std::log(z), mx);
      ++counted;
    }
  return counted;
}

}  // namespace detail

/// Mean over non-ignored pixels of -log softmax at the true class; zero when every pixel is ignored.
template <typename T>
double softmax_xent_fwd(const Tensor<T>& logits, std::span<const std::uint8_t> labels,
                        std::uint8_t ignore_index = default_ignore_index) {
  detail::check_labels(logits, labels, ignore_index);
  const std::size_t plane = logits.shape().plane();
  double total = 0;
  const std::size_t counted =
      detail::for_each_labelled(logits, labels, ignore_index, [&](std::size_t base, std::uint8_t y, double lse, double mx) {
        total += lse + mx - logits.values()[base + y * plane];
      });
  return counted ? total / static_cast<double>(counted) : 0.0;
}

template <typename T>
Tensor<T> softmax_xent_bwd(const Tensor<T>& logits, std::span<const std::uint8_t> labels,
                           std::uint8_t ignore_index = default_ignore_index) {
  detail::check_labels(logits, labels, ignore_index);
  const Shape4& s = logits.shape();
  const std::size_t plane = s.plane();
  std::size_t counted = 0;
  for (auto v : labels) counted += v != ignore_index;
  Tensor<T> g(s);
  if (counted == 0) return g;
  const double inv = 1.0 / static_cast<double>(counted);
  detail::for_each_labelled(logits, labels, ignore_index, [&](std::size_t base, std::uint8_t y, double lse, double mx) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double p = std::exp(logits.values()[base + c * plane] - mx - lse);
      g.values()[base + c * plane] = static_cast<T>((p - (c == y ? 1.0 : 0.0)) * inv);
    }
  });
  return g;
}

// ---------------------------------------------------------------------------
// Zero padding to a window multiple

struct Extents {
  std::size_t h = 0;
  std::size_t w = 0;
  friend bool operator==(const Extents&, const Extents&) = default;
};

template <typename T>
Tensor<T> pad_bottom_right(const Tensor<T>& x, std::size_t h, std::size_t w) {
  const Shape4& s = x.shape();
  if (h < s.h || w < s.w) fail(ErrorKind::shape, "padding cannot shrink " + s.str());
  if (h == s.h && w == s.w) return x;
  Tensor<T> out(Shape4{s.n, s.c, h, w});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t r = 0; r < s.h; ++r)
        std::copy_n(&x(n, c, r, 0), s.w, &out(n, c, r, 0));
  return out;
}

template <typename T>
Tensor<T> crop_top_left(const Tensor<T>& x, std::size_t h, std::size_t w) {
  const Shape4& s = x.shape();
  if (h > s.h || w > s.w || h == 0 || w == 0) fail(ErrorKind::shape, "crop extents exceed " + s.str());
  if (h == s.h && w == s.w) return x;
  Tensor<T> out(Shape4{s.n, s.c, h, w});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t r = 0; r < h; ++r) std::copy_n(&x(n, c, r, 0), w, &out(n, c, r, 0));
  return out;
}

/// Pads bottom and right with zeros up to the next window multiple; returns the original extents.
template <typename T>
std::pair<Tensor<T>, Extents> zero_pad_to_divisible(const Tensor<T>& x, const Window& win) {
  detail::check_window(win);
  const Shape4& s = x.shape();
  const std::size_t h = (s.h + win.h - 1) / win.h * win.h;
  const std::size_t w = (s.w + win.w - 1) / win.w * win.w;
  return {pad_bottom_right(x, h, w), Extents{s.h, s.w}};
}

}  // namespace smp
