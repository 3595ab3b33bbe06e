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

#include "cchc/range_coder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cchc/errors.hpp"
#include "cchc/laplace.hpp"

namespace cchc {

QuantizedCdf build_cdf(double mu, double scale, int vmin, int vmax) {
  if (vmin > vmax) throw ArgumentError("build_cdf: vmin > vmax");
  if (!(scale > 0.0)) throw ArgumentError("build_cdf: scale must be positive");

  const int n = vmax - vmin + 1;
  QuantizedCdf cdf;
  cdf.vmin = vmin;
  cdf.vmax = vmax;
  cdf.cum.assign(static_cast<size_t>(n) + 1, 0);
  if (n == 1) {
    cdf.cum[1] = kCdfTotal;
    return cdf;
  }

  // Continuous masses; the end buckets absorb their entire tails so the
  // alphabet covers the whole real line.
  std::vector<double> mass(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int v = vmin + i;
    double m;
    if (i == 0) {
      m = laplace_cdf(v + 0.5 - mu, scale);
    } else if (i == n - 1) {
      m = 1.0 - laplace_cdf(v - 0.5 - mu, scale);
    } else {
      m = laplace_bin_mass(v, mu, scale);
    }
    mass[static_cast<size_t>(i)] = m > 0.0 ? m : 0.0;
  }
  double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  if (total <= 0.0) {
    std::fill(mass.begin(), mass.end(), 1.0);
    total = n;
  }

  // Quantize to a 2^16 total: every bucket gets 1 (the probability floor),
  // the remaining units go out proportionally, floors first, then one unit to
  // each of the largest remainders (ties to the lower index).
  const double budget = static_cast<double>(kCdfTotal - static_cast<uint32_t>(n));
  std::vector<uint32_t> freq(static_cast<size_t>(n), 1);
  std::vector<double> remainder(static_cast<size_t>(n));
  uint32_t assigned = static_cast<uint32_t>(n);
  for (int i = 0; i < n; ++i) {
    const double share = mass[static_cast<size_t>(i)] / total * budget;
    const double fl = std::floor(share);
    freq[static_cast<size_t>(i)] += static_cast<uint32_t>(fl);
    assigned += static_cast<uint32_t>(fl);
    remainder[static_cast<size_t>(i)] = share - fl;
  }
  uint32_t leftover = kCdfTotal - assigned;
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return remainder[static_cast<size_t>(a)] > remainder[static_cast<size_t>(b)];
  });
  for (uint32_t k = 0; k < leftover; ++k)
    freq[static_cast<size_t>(order[k % static_cast<uint32_t>(n)])] += 1;

  for (int i = 0; i < n; ++i)
    cdf.cum[static_cast<size_t>(i) + 1] = cdf.cum[static_cast<size_t>(i)] +
                                          freq[static_cast<size_t>(i)];
  return cdf;
}

RangeEncoder::RangeEncoder() : low_(0), range_(~0u) {}

void RangeEncoder::shift_out() {
  while (range_ < (1u << 24)) {
    out_.push_back(static_cast<uint8_t>(low_ >> 24));
    low_ <<= 8;
    range_ <<= 8;
  }
}

void RangeEncoder::encode(uint32_t cum, uint32_t freq) {
  shift_out();
  const uint32_t base = range_ >> kCdfBits;  // range / 65536
  const uint32_t add = base * cum;
  const uint32_t save = low_;
  low_ += add;
  if (low_ < save) {
    // Carry out of the 32-bit window: propagate into the emitted bytes.
    for (size_t i = out_.size(); i-- > 0;) {
      if (++out_[i] != 0) break;
    }
  }
  range_ = base * freq;
}

void RangeEncoder::encode_symbol(const QuantizedCdf& cdf, int value) {
  if (value < cdf.vmin || value > cdf.vmax)
    throw CodingError("range encoder: symbol outside the alphabet");
  const size_t i = static_cast<size_t>(value - cdf.vmin);
  encode(cdf.cum[i], cdf.cum[i + 1] - cdf.cum[i]);
}

std::vector<uint8_t> RangeEncoder::finish() {
  // The full 32-bit low always disambiguates the final interval.
  for (int k = 0; k < 4; ++k) {
    out_.push_back(static_cast<uint8_t>(low_ >> 24));
    low_ <<= 8;
  }
  return std::move(out_);
}

RangeDecoder::RangeDecoder(const uint8_t* data, size_t size)
    : data_(data), size_(size), pos_(0), code_(0), range_(~0u) {
  for (int k = 0; k < 4; ++k) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::next_byte() {
  if (pos_ >= size_) throw CodingError("range decoder: truncated stream");
  return data_[pos_++];
}

int RangeDecoder::decode_symbol(const QuantizedCdf& cdf) {
  while (range_ < (1u << 24)) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
  const uint32_t base = range_ >> kCdfBits;
  uint32_t f = code_ / base;
  if (f >= kCdfTotal) f = kCdfTotal - 1;

  // Largest index with cum[index] <= f.
  const auto it = std::upper_bound(cdf.cum.begin(), cdf.cum.end(), f);
  const size_t i = static_cast<size_t>(it - cdf.cum.begin()) - 1;

  code_ -= base * cdf.cum[i];
  range_ = base * (cdf.cum[i + 1] - cdf.cum[i]);
  return cdf.vmin + static_cast<int>(i);
}

}  // namespace cchc
