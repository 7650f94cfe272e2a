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

// Binary PPM (P6) and PGM (P5) with maxval 255. Writers emit the canonical
// header "P6\n<w> <h>\n255\n"; files in that form round-trip byte for byte.

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "smp/error.hpp"
#include "smp/serialize.hpp"

namespace smp {

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB, row-major
};

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

namespace detail {

struct PnmHeader {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t payload = 0;  // offset of the first pixel byte
};

inline PnmHeader parse_pnm_header(std::span<const std::uint8_t> b, char kind) {
  std::size_t pos = 0;
  auto bad = [&](const std::string& what) -> void {
    throw Error(ErrorKind::format, what + " at byte " + std::to_string(pos), pos);
  };
  if (b.size() < 2 || b[0] != 'P' || b[1] != static_cast<std::uint8_t>(kind))
    bad(std::string("expected magic P") + kind);
  pos = 2;
  auto skip_space = [&] {
    for (;;) {
      while (pos < b.size() && std::isspace(b[pos])) ++pos;
      if (pos < b.size() && b[pos] == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
        continue;
      }
      return;
    }
  };
  auto number = [&]() -> std::size_t {
    skip_space();
    if (pos >= b.size() || !std::isdigit(b[pos])) bad("expected a decimal number");
    std::size_t v = 0;
    while (pos < b.size() && std::isdigit(b[pos])) {
      v = v * 10 + static_cast<std::size_t>(b[pos] - '0');
      if (v > (std::size_t{1} << 24)) bad("header value too large");
      ++pos;
    }
    return v;
  };
  if (pos >= b.size() || !std::isspace(b[pos])) bad("expected whitespace after magic");
  PnmHeader h;
  h.width = number();
  h.height = number();
  const std::size_t maxval = number();
  if (h.width == 0 || h.height == 0) bad("zero image extent");
  if (maxval != 255) bad("only maxval 255 is supported");
  if (pos >= b.size() || !std::isspace(b[pos])) bad("expected one whitespace byte before the payload");
  h.payload = pos + 1;
  return h;
}

inline std::vector<std::uint8_t> pnm_bytes(char kind, std::size_t w, std::size_t h,
                                           std::span<const std::uint8_t> pixels) {
  const std::string header = std::string("P") + kind + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

inline void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::format, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::format, "failed writing " + path);
}

template <typename Image>
Image decode_pnm(std::span<const std::uint8_t> bytes, char kind, std::size_t channels) {
  const auto h = parse_pnm_header(bytes, kind);
  const std::size_t need = h.width * h.height * channels;
  if (bytes.size() - h.payload < need)
    throw Error(ErrorKind::format,
                "truncated payload: expected " + std::to_string(need) + " bytes at byte " + std::to_string(h.payload),
                bytes.size());
  if (bytes.size() - h.payload > need)
    throw Error(ErrorKind::format, "trailing data at byte " + std::to_string(h.payload + need), h.payload + need);
  Image img;
  img.width = h.width;
  img.height = h.height;
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.payload), bytes.end());
  return img;
}

}  // namespace detail

inline RgbImage decode_ppm(std::span<const std::uint8_t> bytes) {
  return detail::decode_pnm<RgbImage>(bytes, '6', 3);
}
inline GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  return detail::decode_pnm<GrayImage>(bytes, '5', 1);
}

inline std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
  if (img.pixels.size() != img.width * img.height * 3) fail(ErrorKind::size, "RGB buffer does not match extents");
  return detail::pnm_bytes('6', img.width, img.height, img.pixels);
}
inline std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  if (img.pixels.size() != img.width * img.height) fail(ErrorKind::size, "gray buffer does not match extents");
  return detail::pnm_bytes('5', img.width, img.height, img.pixels);
}

inline RgbImage ppm_read(const std::string& path) { return decode_ppm(read_file_bytes(path)); }
inline GrayImage pgm_read(const std::string& path) { return decode_pgm(read_file_bytes(path)); }
inline void ppm_write(const std::string& path, const RgbImage& img) { detail::write_bytes(path, encode_ppm(img)); }
inline void pgm_write(const std::string& path, const GrayImage& img) { detail::write_bytes(path, encode_pgm(img)); }

}  // namespace smp
