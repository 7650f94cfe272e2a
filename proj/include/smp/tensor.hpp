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
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smp/error.hpp"

namespace smp {

/// Extents of a batch-channel-row-column tensor.
struct Shape4 {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t size() const noexcept { return n * c * h * w; }
  std::size_t plane() const noexcept { return h * w; }
  std::size_t batch_stride() const noexcept { return c * h * w; }

  friend bool operator==(const Shape4&, const Shape4&) = default;

  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }
};

inline void validate(const Shape4& s) {
  if (s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0) fail(ErrorKind::shape, "zero extent in shape " + s.str());
  constexpr auto max = std::numeric_limits<std::size_t>::max();
  if (s.n > max / s.c || s.n * s.c > max / s.h || s.n * s.c * s.h > max / s.w)
    fail(ErrorKind::size, "element count overflows for shape " + s.str());
}

/// Dense 4-D tensor, column index fastest, then row, channel, batch.
template <typename T = float>
class Tensor {
 public:
  using value_type = T;

  Tensor() : data_(1, T(0)) {}

  explicit Tensor(Shape4 shape, T fill = T(0)) : shape_(shape) {
    validate(shape_);
    data_.assign(shape_.size(), fill);
  }

  Tensor(Shape4 shape, std::vector<T> values) : shape_(shape) {
    validate(shape_);
    if (values.size() != shape_.size())
      fail(ErrorKind::size, "expected " + std::to_string(shape_.size()) + " values for shape " + shape_.str() +
                                ", got " + std::to_string(values.size()));
    data_ = std::move(values);
  }

  const Shape4& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t r, std::size_t col) const noexcept {
    return ((n * shape_.c + c) * shape_.h + r) * shape_.w + col;
  }

  T& operator()(std::size_t n, std::size_t c, std::size_t r, std::size_t col) noexcept {
    return data_[offset(n, c, r, col)];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t r, std::size_t col) const noexcept {
    return data_[offset(n, c, r, col)];
  }

  T& at(std::size_t n, std::size_t c, std::size_t r, std::size_t col) {
    if (n >= shape_.n || c >= shape_.c || r >= shape_.h || col >= shape_.w)
      fail(ErrorKind::index, "element index out of range for shape " + shape_.str());
    return (*this)(n, c, r, col);
  }
  const T& at(std::size_t n, std::size_t c, std::size_t r, std::size_t col) const {
    return const_cast<Tensor*>(this)->at(n, c, r, col);
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  std::span<T> batch(std::size_t b) noexcept {
    return std::span<T>(data_).subspan(b * shape_.batch_stride(), shape_.batch_stride());
  }
  std::span<const T> batch(std::size_t b) const noexcept {
    return std::span<const T>(data_).subspan(b * shape_.batch_stride(), shape_.batch_stride());
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  Shape4 shape_;
  std::vector<T> data_;
};

template <typename T>
Tensor<T> create(Shape4 shape, std::vector<T> values) {
  return Tensor<T>(shape, std::move(values));
}

template <typename T>
Tensor<T> batch_select(const Tensor<T>& t, std::size_t b) {
  if (b >= t.shape().n)
    fail(ErrorKind::index, "batch " + std::to_string(b) + " out of range for shape " + t.shape().str());
  Shape4 s = t.shape();
  s.n = 1;
  auto src = t.batch(b);
  return Tensor<T>(s, std::vector<T>(src.begin(), src.end()));
}

/// Concatenates tensors along the batch axis in order.
template <typename T>
Tensor<T> stack_batches(std::span<const Tensor<T>> parts) {
  if (parts.empty()) fail(ErrorKind::argument, "cannot stack an empty list");
  Shape4 s = parts.front().shape();
  std::size_t total = 0;
  for (const auto& p : parts) {
    const auto& ps = p.shape();
    if (ps.c != s.c || ps.h != s.h || ps.w != s.w)
      fail(ErrorKind::shape, "cannot stack " + ps.str() + " onto " + s.str());
    total += ps.n;
  }
  s.n = total;
  std::vector<T> out;
  out.reserve(s.size());
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return Tensor<T>(s, std::move(out));
}

template <typename T>
Tensor<T> stack_batches(const std::vector<Tensor<T>>& parts) {
  return stack_batches(std::span<const Tensor<T>>(parts));
}

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& t) {
  std::vector<To> out(t.size());
  std::transform(t.values().begin(), t.values().end(), out.begin(), [](From v) { return static_cast<To>(v); });
  return Tensor<To>(t.shape(), std::move(out));
}

/// Seeded generator used across the library. Same seed, same stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound).
  std::size_t below(std::size_t bound) {
    if (bound == 0) fail(ErrorKind::argument, "empty range");
    // Lemire's multiply-shift; bias is below 2^-32 for the bounds used here.
    const auto hi = static_cast<unsigned __int128>(next()) * bound;
    return static_cast<std::size_t>(hi >> 64);
  }

  bool coin(double p = 0.5) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

/// Mixes two words into an independent stream seed (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <typename T = float>
Tensor<T> random_uniform(Shape4 shape, std::uint64_t seed, T lo, T hi) {
  if (!(lo < hi)) fail(ErrorKind::argument, "random_uniform requires lo < hi");
  Tensor<T> t(shape);
  Rng rng(seed);
  const T top = std::nextafter(hi, lo);
  for (auto& v : t.values()) {
    T x = static_cast<T>(lo + (hi - lo) * rng.uniform());
    v = std::min(x, top);
  }
  return t;
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    fail(ErrorKind::shape, std::string(op) + ": shape " + a.shape().str() + " vs " + b.shape().str());
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "max_abs_diff");
  T m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

template <typename T>
bool all_close(const Tensor<T>& a, const Tensor<T>& b, T tol) {
  return max_abs_diff(a, b) <= tol;
}

enum class BinaryOp { add, sub, mul };

template <typename T>
Tensor<T> map2(const Tensor<T>& a, const Tensor<T>& b, BinaryOp op) {
  require_same_shape(a, b, "map2");
  Tensor<T> out(a.shape());
  auto x = a.values();
  auto y = b.values();
  auto z = out.values();
  switch (op) {
    case BinaryOp::add:
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + y[i];
      break;
    case BinaryOp::sub:
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] - y[i];
      break;
    case BinaryOp::mul:
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * y[i];
      break;
  }
  return out;
}

template <typename T>
void add_inplace(Tensor<T>& acc, const Tensor<T>& x) {
  require_same_shape(acc, x, "add_inplace");
  auto a = acc.values();
  auto b = x.values();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace smp
