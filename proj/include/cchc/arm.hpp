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

#ifndef CCHC_ARM_HPP_
#define CCHC_ARM_HPP_

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "cchc/model.hpp"
#include "cchc/tensor.hpp"

namespace cchc {

constexpr int kContextSize = 24;

// Raw scale output is passed through exp(clamp(s, -8, 8)) so scale > 0 always.
constexpr double kScaleClampLo = -8.0;
constexpr double kScaleClampHi = 8.0;

// The 24 causal offsets (dy, dx) nearest the origin: sorted by squared
// Euclidean distance, ties by dy descending then dx ascending.  Every offset
// points strictly before (y, x) in raster order.
std::vector<std::pair<int, int>> build_template();

// context[k] = grid[y+dy_k, x+dx_k], zero outside the grid.
void extract_context(const int32_t* grid, int height, int width, int y, int x,
                     const std::vector<std::pair<int, int>>& offsets,
                     double out[kContextSize]);

// Graph version over a whole level: contexts [N,24] -> (mu [N], scale [N]).
struct ArmHeads {
  ag::Tensor mu;
  ag::Tensor scale;
};
ArmHeads arm_apply(ag::Tape& tape, const ag::Tensor& contexts, const ArmParams& params);

// Full per-level rate term for training: gathers causal contexts from the
// quantized grid, runs the context MLP, and returns per-latent code lengths
// [N] in bits.  Gradients flow into both the grid and the ARM parameters.
ag::Tensor latent_rate_bits(ag::Tape& tape, const ag::Tensor& quantized_level,
                            const ArmParams& params,
                            const std::vector<std::pair<int, int>>& offsets);

// Plain-double context MLP for the coding loop (encoder and decoder both run
// it on decoded integer contexts with dequantized weights; exact agreement is
// what keeps the range coder lossless).
class ArmEvaluator {
 public:
  ArmEvaluator(const std::vector<double>& w1, const std::vector<double>& b1,
               const std::vector<double>& w2, const std::vector<double>& b2,
               const std::vector<double>& w3, const std::vector<double>& b3);

  void eval(const double context[kContextSize], double* mu, double* scale) const;

 private:
  std::array<double, 24 * 24> w1_;
  std::array<double, 24> b1_;
  std::array<double, 24 * 24> w2_;
  std::array<double, 24> b2_;
  std::array<double, 24 * 2> w3_;
  std::array<double, 2> b3_;
};

}  // namespace cchc

#endif  // CCHC_ARM_HPP_
