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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace smp {

enum class ErrorKind {
  size,
  index,
  argument,
  shape,
  divisibility,
  meta,
  location,
  graph,
  mode,
  validity,
  config,
  format,
  label,
  analysis,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::size: return "size error";
    case ErrorKind::index: return "index error";
    case ErrorKind::argument: return "argument error";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::divisibility: return "divisibility error";
    case ErrorKind::meta: return "meta error";
    case ErrorKind::location: return "location error";
    case ErrorKind::graph: return "graph error";
    case ErrorKind::mode: return "mode error";
    case ErrorKind::validity: return "validity error";
    case ErrorKind::config: return "config error";
    case ErrorKind::format: return "format error";
    case ErrorKind::label: return "label error";
    case ErrorKind::analysis: return "analysis error";
  }
  return "error";
}

/// Every library failure is reported through this one exception type; the
/// kind tells callers which contract was violated. Format errors additionally
/// carry the byte offset where parsing stopped.
class Error : public std::runtime_error {
 public:
  static constexpr std::size_t no_offset = static_cast<std::size_t>(-1);

  Error(ErrorKind kind, const std::string& what, std::size_t offset = no_offset)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), offset_(offset) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  ErrorKind kind_;
  std::size_t offset_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace smp
