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

#ifndef CCHC_BITSTREAM_HPP_
#define CCHC_BITSTREAM_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "cchc/pyramid.hpp"

namespace cchc {

// Container layout (all integers little-endian), documented byte-exactly in
// docs/bitstream.md:
//   magic "CCHC" | version u8 | height u16 | width u16 | level count u8 (=7)
//   | 7 x (vmin i16, vmax i16) | exponent count u8 (=15) | 15 x i8
//   | 8 x u32 section lengths (weights, then stream 0..6)
//   | weights payload | stream payloads.

constexpr char kMagic[4] = {'C', 'C', 'H', 'C'};
constexpr uint8_t kFormatVersion = 1;
constexpr int kWeightTensorCount = 15;
constexpr int kHeaderBytes = 4 + 1 + 2 + 2 + 1 + kLevels * 4 + 1 + kWeightTensorCount +
                             (1 + kLevels) * 4;  // 86

struct Header {
  uint16_t height = 0;
  uint16_t width = 0;
  std::array<std::pair<int16_t, int16_t>, kLevels> level_bounds{};  // (vmin, vmax)
  std::array<int8_t, kWeightTensorCount> step_exponents{};
  std::array<uint32_t, 1 + kLevels> section_lengths{};  // weights, stream 0..6
};

struct BitstreamData {
  Header header;
  std::vector<int16_t> weights;  // 1925 values, fixed tensor order
  std::array<std::vector<uint8_t>, kLevels> streams;
};

// Weight quantization: integers scaled by a power-of-two step,
// dequantized value = integer * 2^exponent.
// Returns false when some value would overflow i16 at this step.
bool try_quantize_values(const std::vector<double>& values, int exponent,
                         std::vector<int16_t>* out);
std::vector<double> dequantize_values(const std::vector<int16_t>& values, int exponent);

// Serialization; write validates section lengths against payload sizes, read
// raises ParseError (with byte offset) on bad magic/version/counts/truncation
// and never reads past the declared lengths.
std::vector<uint8_t> write_bitstream(const BitstreamData& data);
BitstreamData read_bitstream(const std::vector<uint8_t>& bytes);

}  // namespace cchc

#endif  // CCHC_BITSTREAM_HPP_
