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

#ifndef CCHC_RANGE_CODER_HPP_
#define CCHC_RANGE_CODER_HPP_

#include <cstdint>
#include <vector>

namespace cchc {

// 32-bit range coder, byte-wise renormalization, carry propagation into the
// already-emitted buffer; 16-bit frequency precision.  Integer-only state so
// encoder and decoder are bit-exact across platforms.

constexpr uint32_t kCdfBits = 16;
constexpr uint32_t kCdfTotal = 1u << kCdfBits;  // 65536

// Alphabet [vmin, vmax] with cumulative frequencies cum[0..n], cum[0] = 0,
// cum[n] = 65536, strictly increasing (every symbol has mass >= 1).
struct QuantizedCdf {
  int vmin = 0;
  int vmax = 0;
  std::vector<uint32_t> cum;

  int alphabet_size() const { return vmax - vmin + 1; }
};

// Laplace(mu, scale) masses on unit bins, tails folded into the end buckets,
// quantized to a 65536 total by largest-remainder rounding with every bucket
// kept >= 1.
QuantizedCdf build_cdf(double mu, double scale, int vmin, int vmax);

class RangeEncoder {
 public:
  RangeEncoder();

  void encode(uint32_t cum, uint32_t freq);
  void encode_symbol(const QuantizedCdf& cdf, int value);

  // Flushes the final 4 state bytes and returns the stream.
  std::vector<uint8_t> finish();

 private:
  void shift_out();

  std::vector<uint8_t> out_;
  uint32_t low_;
  uint32_t range_;
};

class RangeDecoder {
 public:
  RangeDecoder(const uint8_t* data, size_t size);

  int decode_symbol(const QuantizedCdf& cdf);

 private:
  uint8_t next_byte();

  const uint8_t* data_;
  size_t size_;
  size_t pos_;
  uint32_t code_;
  uint32_t range_;
};

}  // namespace cchc

#endif  // CCHC_RANGE_CODER_HPP_
