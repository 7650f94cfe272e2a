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

// Split a feature map, run a convolution on every split batch, merge back,
// and compare against the full-split oracle.

#include <iostream>

#include "smp/smp.hpp"

int main() {
  using namespace smp;

  const auto x = random_uniform<float>(Shape4{1, 3, 8, 8}, 7, 0.f, 1.f);
  auto [batches, meta] = split_fwd(x, Window{2, 2});
  std::cout << "split " << x.shape().str() << " -> " << batches.shape().str() << "\n";
  std::cout << "merge restores input: " << (merge_fwd(batches, meta) == x ? "yes" : "no") << "\n";

  const auto loc = SampleLoc{1, 0};
  const auto sparse = expand_fwd(shrink_fwd(x, Window{2, 2}, loc), Window{2, 2}, loc);
  std::cout << "shrink/expand keeps " << sparse.size() / 4 << " of " << sparse.size() << " values\n";

  auto net = build_toy_smp<float>(ToyConfig{}, false);
  const auto image = random_uniform<float>(Shape4{1, 3, 32, 32}, 11, 0.f, 1.f);
  const auto logits = predict(net, image);
  std::cout << "toy_smp output " << logits.shape().str() << ", " << parameter_count(net) << " parameters\n";
  std::cout << "oracle max abs diff: " << max_abs_diff(full_split_oracle(net, image), logits) << "\n";
  std::cout << "parallel equals sequential: " << (forward_parallel(net, image, 4) == logits ? "yes" : "no") << "\n";
}
