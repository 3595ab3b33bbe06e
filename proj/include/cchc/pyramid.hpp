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

#ifndef CCHC_PYRAMID_HPP_
#define CCHC_PYRAMID_HPP_

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "cchc/rng.hpp"
#include "cchc/tensor.hpp"

namespace cchc {

// Seven single-channel grids at dyadic resolutions, full size down to 1/64;
// the coded representation of one image.
constexpr int kLevels = 7;

// Coding alphabet bound: after hard quantization, latents are clipped to
// [-2^11, 2^11 - 1] and the per-level (min, max) go into the header.
constexpr int kLatentMin = -2048;
constexpr int kLatentMax = 2047;

// (rows, cols) per level: e_{i+1} = ceil(e_i / 2) on both axes.
std::array<std::pair<int, int>, kLevels> level_extents(int height, int width);

struct LatentPyramid {
  int height = 0;
  int width = 0;
  std::vector<ag::Tensor> levels;  // each [1, rows_i, cols_i]
};

// Levels initialized i.i.d. uniform in [-0.3, 0.3], drawn level 0 first.
LatentPyramid init_pyramid(int height, int width, Rng& rng);

int64_t value_count(const LatentPyramid& pyramid);

// Training-time quantization proxies applied level by level, in level order:
// kNoise adds fresh Uniform(-0.5, 0.5); kSte rounds forward with identity
// gradient; kHard rounds with no gradient path.
std::vector<ag::Tensor> quantize_pyramid(ag::Tape& tape, const LatentPyramid& pyramid,
                                         ag::QuantMode mode, Rng& rng);

// One decoded level as integers, row-major.
using LatentGrid = std::vector<int32_t>;

// Final quantization for coding: round to nearest (ties away from zero), then
// clip to [kLatentMin, kLatentMax].
std::vector<LatentGrid> hard_quantize_clip(const LatentPyramid& pyramid);

}  // namespace cchc

#endif  // CCHC_PYRAMID_HPP_
