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

// Plain key = value configuration files. '#' starts a comment; blank lines
// are ignored. Recognised keys:
//
//   variant       maxpool | dilated | split | toy_smp | toy_baseline
//   classes       class count (toy variants)
//   widths        comma list, stem width first
//   blocks        comma list, one count per stage
//   window        WxH, e.g. 2x2
//   seed          unsigned integer
//
// Training runs additionally accept: steps, batch, lr, weight_decay,
// train_images, val_images, image_size, crop.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "smp/error.hpp"
#include "smp/model_zoo.hpp"
#include "smp/pooling.hpp"

namespace smp {

using KeyValues = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

inline KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(ErrorKind::config, "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) fail(ErrorKind::config, "line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) fail(ErrorKind::config, "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

inline KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

inline std::uint64_t parse_uint(std::string_view s, std::string_view key) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    fail(ErrorKind::config, std::string(key) + ": expected an unsigned integer, got '" + std::string(s) + "'");
  return v;
}

inline double parse_double(std::string_view s, std::string_view key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(s), &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::config, std::string(key) + ": expected a number, got '" + std::string(s) + "'");
  }
}

inline std::vector<std::size_t> parse_list(std::string_view s, std::string_view key) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto item = detail::trim(s.substr(start, comma == std::string_view::npos ? s.size() - start : comma - start));
    out.push_back(static_cast<std::size_t>(parse_uint(item, key)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Parses "WxH" (columns x rows).
inline Window parse_window(std::string_view s) {
  const auto x = s.find('x');
  if (x == std::string_view::npos) fail(ErrorKind::config, "window: expected WxH, got '" + std::string(s) + "'");
  return Window{static_cast<std::size_t>(parse_uint(s.substr(0, x), "window")),
                static_cast<std::size_t>(parse_uint(s.substr(x + 1), "window"))};
}

/// Parses "NxCxHxW".
inline Shape4 parse_shape(std::string_view s) {
  std::size_t dims[4];
  std::size_t start = 0;
  for (int i = 0; i < 4; ++i) {
    const auto x = s.find('x', start);
    if ((i < 3) == (x == std::string_view::npos)) fail(ErrorKind::config, "expected NxCxHxW, got '" + std::string(s) + "'");
    dims[i] = static_cast<std::size_t>(parse_uint(s.substr(start, x == std::string_view::npos ? s.npos : x - start),
                                                  "input"));
    start = x + 1;
  }
  Shape4 shape{dims[0], dims[1], dims[2], dims[3]};
  validate(shape);
  return shape;
}

struct ArchConfig {
  ArchVariant variant = ArchVariant::ToySmp;
  ToyConfig toy;
};

/// Reads the architecture keys, leaving everything else to the caller.
/// Keys outside `allowed_extra` and the architecture set are config errors.
inline ArchConfig parse_arch_config(const KeyValues& kv, const std::vector<std::string>& allowed_extra = {}) {
  static const std::vector<std::string> arch_keys{"variant", "classes", "widths", "blocks", "window", "seed"};
  for (const auto& [k, v] : kv) {
    bool known = false;
    for (const auto& a : arch_keys) known = known || a == k;
    for (const auto& a : allowed_extra) known = known || a == k;
    if (!known) fail(ErrorKind::config, "unknown key '" + k + "'");
  }
  ArchConfig cfg;
  if (auto it = kv.find("variant"); it != kv.end()) cfg.variant = parse_variant(it->second);
  if (auto it = kv.find("classes"); it != kv.end()) cfg.toy.classes = parse_uint(it->second, "classes");
  if (auto it = kv.find("widths"); it != kv.end()) cfg.toy.widths = parse_list(it->second, "widths");
  if (auto it = kv.find("blocks"); it != kv.end()) cfg.toy.blocks = parse_list(it->second, "blocks");
  if (auto it = kv.find("window"); it != kv.end()) cfg.toy.window = parse_window(it->second);
  if (auto it = kv.find("seed"); it != kv.end()) cfg.toy.seed = parse_uint(it->second, "seed");
  validate(cfg.toy);
  return cfg;
}

}  // namespace smp
