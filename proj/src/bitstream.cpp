// Copyright (c) the cchc project authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cchc/bitstream.hpp"

#include <cmath>
#include <cstring>

#include "cchc/errors.hpp"

namespace cchc {

namespace {

void put_u16(std::vector<uint8_t>* out, uint16_t v) {
  out->push_back(static_cast<uint8_t>(v & 0xFF));
  out->push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>* out, uint32_t v) {
  for (int k = 0; k < 4; ++k) out->push_back(static_cast<uint8_t>((v >> (8 * k)) & 0xFF));
}

void put_i16(std::vector<uint8_t>* out, int16_t v) {
  put_u16(out, static_cast<uint16_t>(v));
}

// Cursor with bounds checking; every read failure reports its byte offset.
struct Reader {
  const std::vector<uint8_t>& bytes;
  size_t pos = 0;

  void need(size_t count, const char* what) const {
    if (pos + count > bytes.size())
      throw ParseError(std::string("bitstream: truncated ") + what, pos);
  }
  uint8_t u8(const char* what) {
    need(1, what);
    return bytes[pos++];
  }
  uint16_t u16(const char* what) {
    need(2, what);
    const uint16_t v = static_cast<uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
    pos += 2;
    return v;
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<uint32_t>(bytes[pos + k]) << (8 * k);
    pos += 4;
    return v;
  }
  int16_t i16(const char* what) { return static_cast<int16_t>(u16(what)); }
};

}  // namespace

bool try_quantize_values(const std::vector<double>& values, int exponent,
                         std::vector<int16_t>* out) {
  const double step = std::ldexp(1.0, exponent);
  out->resize(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    const double q = std::round(values[i] / step);
    if (q < -32768.0 || q > 32767.0) return false;
    (*out)[i] = static_cast<int16_t>(q);
  }
  return true;
}

std::vector<double> dequantize_values(const std::vector<int16_t>& values, int exponent) {
  const double step = std::ldexp(1.0, exponent);
  std::vector<double> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) out[i] = values[i] * step;
  return out;
}

std::vector<uint8_t> write_bitstream(const BitstreamData& data) {
  const Header& h = data.header;
  if (data.weights.size() * 2 != h.section_lengths[0])
    throw ArgumentError("write_bitstream: weight section length mismatch");
  for (int i = 0; i < kLevels; ++i)
    if (data.streams[static_cast<size_t>(i)].size() !=
        h.section_lengths[static_cast<size_t>(i) + 1])
      throw ArgumentError("write_bitstream: stream section length mismatch");

  std::vector<uint8_t> out;
  size_t total = kHeaderBytes;
  for (uint32_t len : h.section_lengths) total += len;
  out.reserve(total);

  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kFormatVersion);
  put_u16(&out, h.height);
  put_u16(&out, h.width);
  out.push_back(static_cast<uint8_t>(kLevels));
  for (const auto& [vmin, vmax] : h.level_bounds) {
    put_i16(&out, vmin);
    put_i16(&out, vmax);
  }
  out.push_back(static_cast<uint8_t>(kWeightTensorCount));
  for (int8_t e : h.step_exponents) out.push_back(static_cast<uint8_t>(e));
  for (uint32_t len : h.section_lengths) put_u32(&out, len);

  for (int16_t w : data.weights) put_i16(&out, w);
  for (const auto& stream : data.streams) out.insert(out.end(), stream.begin(), stream.end());
  return out;
}

BitstreamData read_bitstream(const std::vector<uint8_t>& bytes) {
  Reader r{bytes};
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw ParseError("bitstream: bad magic", 0);
  r.pos = 4;

  const uint8_t version = r.u8("version");
  if (version != kFormatVersion)
    throw ParseError("bitstream: unsupported version " + std::to_string(version), 4);

  BitstreamData data;
  Header& h = data.header;
  h.height = r.u16("height");
  h.width = r.u16("width");
  if (h.height < 1 || h.width < 1)
    throw ParseError("bitstream: zero image dimension", r.pos - 4);

  const uint8_t levels = r.u8("level count");
  if (levels != kLevels)
    throw ParseError("bitstream: expected 7 levels, got " + std::to_string(levels),
                     r.pos - 1);
  for (auto& [vmin, vmax] : h.level_bounds) {
    vmin = r.i16("level bounds");
    vmax = r.i16("level bounds");
    if (vmin > vmax) throw ParseError("bitstream: level vmin > vmax", r.pos - 4);
  }

  const uint8_t exponents = r.u8("exponent count");
  if (exponents != kWeightTensorCount)
    throw ParseError("bitstream: expected 15 step exponents, got " +
                         std::to_string(exponents),
                     r.pos - 1);
  for (auto& e : h.step_exponents) e = static_cast<int8_t>(r.u8("step exponents"));

  for (auto& len : h.section_lengths) len = r.u32("section lengths");
  if (h.section_lengths[0] != 2 * 1925)
    throw ParseError("bitstream: weight section must hold 1925 values", r.pos - 32);

  size_t declared = r.pos;
  for (uint32_t len : h.section_lengths) declared += len;
  if (declared != bytes.size())
    throw ParseError("bitstream: declared lengths do not match file size (want " +
                         std::to_string(declared) + " bytes)",
                     bytes.size());

  data.weights.resize(1925);
  for (auto& w : data.weights) w = r.i16("weights payload");
  for (int i = 0; i < kLevels; ++i) {
    const uint32_t len = h.section_lengths[static_cast<size_t>(i) + 1];
    r.need(len, "latent stream");
    auto& stream = data.streams[static_cast<size_t>(i)];
    stream.assign(bytes.begin() + static_cast<int64_t>(r.pos),
                  bytes.begin() + static_cast<int64_t>(r.pos + len));
    r.pos += len;
  }
  return data;
}

}  // namespace cchc
