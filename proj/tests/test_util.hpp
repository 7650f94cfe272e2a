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

#include <gtest/gtest.h>

#include "smp/error.hpp"

// Runs fn and returns the kind of the smp::Error it throws.
template <typename Fn>
smp::ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const smp::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an smp::Error";
  return smp::ErrorKind::argument;
}
