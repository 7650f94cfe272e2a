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

// Flat binary checkpoint for Network<float>. Byte layout is documented in
// docs/checkpoint_format.md; all integers and floats are little-endian.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "smp/error.hpp"
#include "smp/network.hpp"

namespace smp {

inline constexpr char checkpoint_magic[4] = {'S', 'M', 'P', 'N'};
inline constexpr std::uint32_t checkpoint_version = 1;

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v), 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  void str(const std::string& s) {
    if (s.size() > 0xFFFF) fail(ErrorKind::format, "layer name too long");
    u16(static_cast<std::uint16_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(get(4))); }
  std::uint64_t u64() { return get(8); }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(get(4))); }
  std::string str() {
    const std::size_t n = u16();
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void magic() {
    need(4);
    if (std::memcmp(b_.data(), checkpoint_magic, 4) != 0) throw Error(ErrorKind::format, "bad checkpoint magic", 0);
    pos_ = 4;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }
  [[noreturn]] void bad(const std::string& what) const {
    throw Error(ErrorKind::format, what + " at byte " + std::to_string(pos_), pos_);
  }

 private:
  void need(std::size_t n) {
    if (b_.size() - pos_ < n) bad("truncated checkpoint");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

inline void write_pair(ByteWriter& w, const Pair2& p) {
  w.u32(static_cast<std::uint32_t>(p.h));
  w.u32(static_cast<std::uint32_t>(p.w));
}

inline Pair2 read_pair(ByteReader& r) {
  const std::size_t h = r.u32();
  const std::size_t w = r.u32();
  return Pair2{h, w};
}

inline void write_layers(ByteWriter& w, const std::vector<Layer<float>>& layers) {
  w.u32(static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.i32(l.id);
    w.str(l.name);
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::head_conv1x1: {
        const auto& p = l.conv();
        w.u32(static_cast<std::uint32_t>(p.in_ch));
        w.u32(static_cast<std::uint32_t>(p.out_ch));
        write_pair(w, p.kernel);
        write_pair(w, p.stride);
        write_pair(w, p.dilation);
        write_pair(w, p.padding);
        w.u8(p.has_bias() ? 1 : 0);
        break;
      }
      case LayerKind::bn:
        w.u32(static_cast<std::uint32_t>(l.bn().channels));
        w.f32(l.bn().epsilon);
        w.f32(l.bn().momentum);
        break;
      case LayerKind::split:
      case LayerKind::merge:
      case LayerKind::shrink:
      case LayerKind::expand: {
        const auto& p = l.pool();
        w.u32(static_cast<std::uint32_t>(p.window.w));
        w.u32(static_cast<std::uint32_t>(p.window.h));
        w.i32(p.site);
        w.u8(p.fixed ? 1 : 0);
        w.u32(p.fixed ? static_cast<std::uint32_t>(p.fixed->k) : 0);
        w.u32(p.fixed ? static_cast<std::uint32_t>(p.fixed->l) : 0);
        break;
      }
      case LayerKind::upsample:
        w.u32(static_cast<std::uint32_t>(std::get<Upsample>(l.payload).factor));
        break;
      case LayerKind::pad:
        w.u32(static_cast<std::uint32_t>(std::get<Pad>(l.payload).window.w));
        w.u32(static_cast<std::uint32_t>(std::get<Pad>(l.payload).window.h));
        break;
      case LayerKind::crop:
        w.i32(std::get<Crop>(l.payload).pad_id);
        break;
      case LayerKind::add_from:
        w.i32(l.add().from);
        write_layers(w, l.add().shortcut);
        break;
      case LayerKind::relu:
      case LayerKind::maxpool:
        break;
    }
  }
}

inline std::vector<Layer<float>> read_layers(ByteReader& r, int depth) {
  if (depth > 1) r.bad("shortcut nesting too deep");
  const std::uint32_t count = r.u32();
  std::vector<Layer<float>> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    Layer<float> l;
    const std::uint8_t kind = r.u8();
    if (kind > max_layer_kind) r.bad("unknown layer kind " + std::to_string(kind));
    l.kind = static_cast<LayerKind>(kind);
    l.id = r.i32();
    l.name = r.str();
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::head_conv1x1: {
        const std::size_t in = r.u32();
        const std::size_t out = r.u32();
        const Pair2 k = read_pair(r), s = read_pair(r), d = read_pair(r), p = read_pair(r);
        const bool bias = r.u8() != 0;
        if (in == 0 || out == 0 || k.h == 0 || k.w == 0 || in * out * k.h * k.w > (std::size_t{1} << 28))
          r.bad("implausible convolution shape");
        l.payload = make_conv<float>(in, out, k, s, d, p, bias);
        break;
      }
      case LayerKind::bn: {
        const std::size_t ch = r.u32();
        if (ch == 0 || ch > (std::size_t{1} << 20)) r.bad("implausible channel count");
        auto p = make_batchnorm<float>(ch);
        p.epsilon = r.f32();
        p.momentum = r.f32();
        l.payload = std::move(p);
        break;
      }
      case LayerKind::split:
      case LayerKind::merge:
      case LayerKind::shrink:
      case LayerKind::expand: {
        PoolSite p;
        p.window.w = r.u32();
        p.window.h = r.u32();
        p.site = r.i32();
        const bool fixed = r.u8() != 0;
        const std::size_t k = r.u32();
        const std::size_t lo = r.u32();
        if (fixed) p.fixed = SampleLoc{k, lo};
        l.payload = p;
        break;
      }
      case LayerKind::upsample:
        l.payload = Upsample{r.u32()};
        break;
      case LayerKind::pad: {
        Pad p;
        p.window.w = r.u32();
        p.window.h = r.u32();
        l.payload = p;
        break;
      }
      case LayerKind::crop:
        l.payload = Crop{r.i32()};
        break;
      case LayerKind::add_from: {
        AddFrom<float> a;
        a.from = r.i32();
        a.shortcut = read_layers(r, depth + 1);
        l.payload = std::move(a);
        break;
      }
      case LayerKind::relu:
      case LayerKind::maxpool:
        break;
    }
    layers.push_back(std::move(l));
  }
  return layers;
}

// Parameter payload order: conv weight, bias; bn scale, shift, running mean, running var.
template <typename LayerT, typename Fn>
void visit_payload(std::span<LayerT> layers, Fn&& fn) {
  for (auto& l : layers) {
    if (is_conv_kind(l.kind)) {
      fn(l.conv().weight.values());
      if (l.conv().has_bias()) fn(std::span(l.conv().bias));
    } else if (l.kind == LayerKind::bn) {
      fn(std::span(l.bn().scale));
      fn(std::span(l.bn().shift));
      fn(std::span(l.bn().running_mean));
      fn(std::span(l.bn().running_var));
    } else if (l.kind == LayerKind::add_from) {
      visit_payload(std::span(l.add().shortcut), fn);
    }
  }
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const Network<float>& net) {
  detail::ByteWriter w;
  w.raw(checkpoint_magic, 4);
  w.u32(checkpoint_version);
  w.str(net.model);
  w.u32(static_cast<std::uint32_t>(net.classes));
  w.u8(net.training ? 1 : 0);
  detail::write_layers(w, net.layers);
  std::uint64_t count = 0;
  detail::visit_payload(std::span(net.layers), [&](auto s) { count += s.size(); });
  w.u64(count);
  detail::visit_payload(std::span(net.layers), [&](auto s) {
    for (float v : s) w.f32(v);
  });
  return std::move(w.bytes());
}

inline Network<float> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.magic();
  if (r.u32() != checkpoint_version) r.bad("unsupported checkpoint version");
  Network<float> net;
  net.model = r.str();
  net.classes = r.u32();
  net.training = r.u8() != 0;
  net.layers = detail::read_layers(r, 0);
  std::uint64_t expect = 0;
  detail::visit_payload(std::span(net.layers), [&](auto s) { expect += s.size(); });
  if (r.u64() != expect) r.bad("parameter count does not match the layer table");
  detail::visit_payload(std::span(net.layers), [&](std::span<float> s) {
    for (auto& v : s) v = r.f32();
  });
  if (!r.done()) r.bad("trailing bytes");
  return net;
}

inline void save_checkpoint(const Network<float>& net, const std::string& path) {
  const auto bytes = encode_checkpoint(net);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::format, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::format, "failed writing " + path);
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::format, "cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline Network<float> load_checkpoint(const std::string& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace smp
