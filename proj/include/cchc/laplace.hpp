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

#ifndef CCHC_LAPLACE_HPP_
#define CCHC_LAPLACE_HPP_

#include <cmath>

namespace cchc {

// The rate model and the entropy coder must agree on probabilities, so every
// Laplace evaluation in the project goes through these three functions.

// Probabilities below 2^-16 are floored: that is the resolution of the
// quantized CDFs fed to the range coder, and it caps any code length at
// 16 bits per symbol.
constexpr double kProbFloor = 0x1.0p-16;
constexpr double kMaxRateBits = 16.0;

// CDF of Laplace(mean 0, scale b) at t.
inline double laplace_cdf(double t, double b) {
  return t <= 0.0 ? 0.5 * std::exp(t / b) : 1.0 - 0.5 * std::exp(-t / b);
}

// Mass of the unit-width bin [v-0.5, v+0.5] under Laplace(mu, b).  Naively
// differencing two CDF values cancels catastrophically in the tails; each
// branch below stays accurate on its side of the mean.
inline double laplace_bin_mass(double v, double mu, double b) {
  const double up = v - mu + 0.5;
  const double um = v - mu - 0.5;
  if (up <= 0.0) return 0.5 * std::exp(up / b) * (1.0 - std::exp(-1.0 / b));
  if (um >= 0.0) return 0.5 * std::exp(-um / b) * (1.0 - std::exp(-1.0 / b));
  return 1.0 - 0.5 * std::exp(-up / b) - 0.5 * std::exp(um / b);
}

// Code length in bits of the integer bin around v, floored at 2^-16.
inline double rate_bits(double v, double mu, double b) {
  double p = laplace_bin_mass(v, mu, b);
  p = p < kProbFloor ? kProbFloor : (p > 1.0 ? 1.0 : p);
  return -std::log2(p);
}

}  // namespace cchc

#endif  // CCHC_LAPLACE_HPP_
