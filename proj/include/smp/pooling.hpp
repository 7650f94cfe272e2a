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

// Split, merge, shrink and expand pooling.
//
// Index convention used throughout the library: for an input batch b and a
// spatial position (row r, col x), split pooling with a w x h window sends the
// element to output batch b*(w*h) + k*h + l with k = x mod w, l = r mod h, at
// position (r / h, x / w). Merge is the exact inverse. Shrink keeps only the
// batch for one SampleLoc (k, l); expand scatters it back into a zero tensor.

#include <cstddef>
#include <string>
#include <type_traits>
#include <utility>

#include "smp/error.hpp"
#include "smp/tensor.hpp"

namespace smp {

struct Window {
  std::size_t w = 2;  // columns
  std::size_t h = 2;  // rows

  std::size_t area() const noexcept { return w * h; }
  friend bool operator==(const Window&, const Window&) = default;
  std::string str() const { return std::to_string(w) + "x" + std::to_string(h); }
};

struct SplitMeta {
  Window window;
  std::size_t pre_batches = 1;

  friend bool operator==(const SplitMeta&, const SplitMeta&) = default;
};

struct SampleLoc {
  std::size_t k = 0;  // column offset within the window
  std::size_t l = 0;  // row offset within the window

  friend bool operator==(const SampleLoc&, const SampleLoc&) = default;
};

/// Batch offset of a location inside one split group.
inline std::size_t split_offset(const Window& win, const SampleLoc& loc) noexcept { return loc.k * win.h + loc.l; }

inline SampleLoc loc_from_offset(const Window& win, std::size_t offset) noexcept {
  return SampleLoc{offset / win.h, offset % win.h};
}

namespace detail {

inline void check_window(const Window& win) {
  if (win.w == 0 || win.h == 0) fail(ErrorKind::argument, "window extents must be positive, got " + win.str());
}

inline void check_divisible(const Shape4& s, const Window& win) {
  check_window(win);
  if (s.w % win.w != 0 || s.h % win.h != 0)
    fail(ErrorKind::divisibility, "spatial extent " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                                      " is not divisible by window " + win.str());
}

inline void check_loc(const Window& win, const SampleLoc& loc) {
  check_window(win);
  if (loc.k >= win.w || loc.l >= win.h)
    fail(ErrorKind::location, "location (" + std::to_string(loc.k) + "," + std::to_string(loc.l) +
                                  ") outside window " + win.str());
}

inline Shape4 split_shape(const Shape4& s, const Window& win) {
  return Shape4{s.n * win.area(), s.c, s.h / win.h, s.w / win.w};
}

// Copies one split batch (input batch b, location loc) between the full-grid
// tensor `full` and the subgrid tensor `sub` at batch `sub_b`. ToSub selects
// the direction.
template <bool ToSub, typename T>
void transfer(std::conditional_t<ToSub, const Tensor<T>&, Tensor<T>&> full, std::size_t b,
              std::conditional_t<ToSub, Tensor<T>&, const Tensor<T>&> sub, std::size_t sub_b, const Window& win,
              const SampleLoc& loc) {
  const Shape4& fs = full.shape();
  const std::size_t oh = fs.h / win.h;
  const std::size_t ow = fs.w / win.w;
  for (std::size_t c = 0; c < fs.c; ++c) {
    for (std::size_t j = 0; j < oh; ++j) {
      const std::size_t r = j * win.h + loc.l;
      for (std::size_t i = 0; i < ow; ++i) {
        const std::size_t x = i * win.w + loc.k;
        if constexpr (ToSub)
          sub(sub_b, c, j, i) = full(b, c, r, x);
        else
          full(b, c, r, x) = sub(sub_b, c, j, i);
      }
    }
  }
}

}  // namespace detail

template <typename T>
std::pair<Tensor<T>, SplitMeta> split_fwd(const Tensor<T>& x, const Window& win) {
  detail::check_divisible(x.shape(), win);
  Tensor<T> out(detail::split_shape(x.shape(), win));
  for (std::size_t b = 0; b < x.shape().n; ++b)
    for (std::size_t off = 0; off < win.area(); ++off)
      detail::transfer<true, T>(x, b, out, b * win.area() + off, win, loc_from_offset(win, off));
  return {std::move(out), SplitMeta{win, x.shape().n}};
}

template <typename T>
Tensor<T> merge_fwd(const Tensor<T>& x, const SplitMeta& meta) {
  const Window& win = meta.window;
  detail::check_window(win);
  const Shape4& s = x.shape();
  if (s.n % win.area() != 0 || s.n / win.area() != meta.pre_batches)
    fail(ErrorKind::meta, "batch count " + std::to_string(s.n) + " inconsistent with window " + win.str() +
                              " and " + std::to_string(meta.pre_batches) + " pre-split batches");
  Tensor<T> out(Shape4{meta.pre_batches, s.c, s.h * win.h, s.w * win.w});
  for (std::size_t b = 0; b < meta.pre_batches; ++b)
    for (std::size_t off = 0; off < win.area(); ++off)
      detail::transfer<false, T>(out, b, x, b * win.area() + off, win, loc_from_offset(win, off));
  return out;
}

/// Gradient of split: every input element receives the gradient of its unique image.
template <typename T>
Tensor<T> split_bwd(const Tensor<T>& grad_out, const SplitMeta& meta) {
  return merge_fwd(grad_out, meta);
}

template <typename T>
Tensor<T> merge_bwd(const Tensor<T>& grad_out, const SplitMeta& meta) {
  auto [g, produced] = split_fwd(grad_out, meta.window);
  if (produced.pre_batches != meta.pre_batches)
    fail(ErrorKind::meta, "gradient batch count does not match the merge record");
  return std::move(g);
}

template <typename T>
Tensor<T> shrink_fwd(const Tensor<T>& x, const Window& win, const SampleLoc& loc) {
  detail::check_divisible(x.shape(), win);
  detail::check_loc(win, loc);
  const Shape4& s = x.shape();
  Tensor<T> out(Shape4{s.n, s.c, s.h / win.h, s.w / win.w});
  for (std::size_t b = 0; b < s.n; ++b) detail::transfer<true, T>(x, b, out, b, win, loc);
  return out;
}

template <typename T>
Tensor<T> expand_fwd(const Tensor<T>& x, const Window& win, const SampleLoc& loc) {
  detail::check_loc(win, loc);
  const Shape4& s = x.shape();
  Tensor<T> out(Shape4{s.n, s.c, s.h * win.h, s.w * win.w});
  for (std::size_t b = 0; b < s.n; ++b) detail::transfer<false, T>(out, b, x, b, win, loc);
  return out;
}

/// Scatters the gradient onto the sampled subgrid; every other position is zero.
template <typename T>
Tensor<T> shrink_bwd(const Tensor<T>& grad_out, const Window& win, const SampleLoc& loc, const Shape4& in_shape) {
  detail::check_divisible(in_shape, win);
  const Shape4 expect{in_shape.n, in_shape.c, in_shape.h / win.h, in_shape.w / win.w};
  if (grad_out.shape() != expect)
    fail(ErrorKind::shape, "shrink gradient has shape " + grad_out.shape().str() + ", expected " + expect.str());
  return expand_fwd(grad_out, win, loc);
}

/// Gathers the gradient at the sampled positions only.
template <typename T>
Tensor<T> expand_bwd(const Tensor<T>& grad_out, const Window& win, const SampleLoc& loc) {
  return shrink_fwd(grad_out, win, loc);
}

/// Draws one location uniformly over the window; one draw per shrink/expand pair per forward pass.
inline SampleLoc sample_location(Rng& rng, const Window& win) {
  detail::check_window(win);
  const std::size_t k = rng.below(win.w);
  const std::size_t l = rng.below(win.h);
  return SampleLoc{k, l};
}

}  // namespace smp
