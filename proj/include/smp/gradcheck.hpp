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

// Finite-difference helpers and the canonical inner product used by the
// adjointness checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "smp/tensor.hpp"

namespace smp {

/// Central differences of a scalar function of x, perturbing x in place
/// (each entry is restored afterwards).
template <typename Loss>
std::vector<double> numeric_gradient(std::span<double> x, Loss&& loss, double step = 1e-4) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double up = loss();
    x[i] = keep - step;
    const double down = loss();
    x[i] = keep;
    g[i] = (up - down) / (2 * step);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||); zero when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  if (scale < std::numeric_limits<double>::min()) return 0.0;
  return std::sqrt(diff) / scale;
}

/// Sum of a[i] * b[i] taken over the products in sorted order, so two inner
/// products over the same multiset of products agree bitwise.
template <typename T>
double canonical_dot(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "canonical_dot");
  std::vector<double> prod(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    prod[i] = static_cast<double>(a.values()[i]) * static_cast<double>(b.values()[i]);
  std::sort(prod.begin(), prod.end());
  double s = 0;
  for (double p : prod) s += p;
  return s;
}

/// Plain inner product in double, in index order.
template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "dot");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a.values()[i]) * static_cast<double>(b.values()[i]);
  return s;
}

}  // namespace smp
