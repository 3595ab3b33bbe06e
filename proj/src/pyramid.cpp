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

#include "cchc/pyramid.hpp"

#include <cmath>

#include "cchc/errors.hpp"

namespace cchc {

std::array<std::pair<int, int>, kLevels> level_extents(int height, int width) {
  if (height < 1 || width < 1)
    throw ArgumentError("level_extents: dimensions must be positive");
  std::array<std::pair<int, int>, kLevels> extents;
  int h = height, w = width;
  for (int i = 0; i < kLevels; ++i) {
    extents[static_cast<size_t>(i)] = {h, w};
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  return extents;
}

LatentPyramid init_pyramid(int height, int width, Rng& rng) {
  const auto extents = level_extents(height, width);
  LatentPyramid pyramid;
  pyramid.height = height;
  pyramid.width = width;
  pyramid.levels.reserve(kLevels);
  for (const auto& [h, w] : extents)
    pyramid.levels.push_back(
        ag::Tensor::uniform({1, h, w}, -0.3, 0.3, rng, /*requires_grad=*/true));
  return pyramid;
}

int64_t value_count(const LatentPyramid& pyramid) {
  int64_t total = 0;
  for (const auto& level : pyramid.levels) total += level.numel();
  return total;
}

std::vector<ag::Tensor> quantize_pyramid(ag::Tape& tape, const LatentPyramid& pyramid,
                                         ag::QuantMode mode, Rng& rng) {
  std::vector<ag::Tensor> out;
  out.reserve(pyramid.levels.size());
  for (const auto& level : pyramid.levels) {
    switch (mode) {
      case ag::QuantMode::kNoise:
        out.push_back(ag::quantize_noise(tape, level, rng));
        break;
      case ag::QuantMode::kSte:
        out.push_back(ag::quantize_ste(tape, level));
        break;
      case ag::QuantMode::kHard:
        out.push_back(ag::quantize_hard(level));
        break;
    }
  }
  return out;
}

std::vector<LatentGrid> hard_quantize_clip(const LatentPyramid& pyramid) {
  std::vector<LatentGrid> grids;
  grids.reserve(pyramid.levels.size());
  for (const auto& level : pyramid.levels) {
    LatentGrid grid(static_cast<size_t>(level.numel()));
    const auto& values = level.data();
    for (size_t i = 0; i < grid.size(); ++i) {
      const double r = std::round(values[i]);  // ties away from zero
      const double c = r < kLatentMin ? kLatentMin : (r > kLatentMax ? kLatentMax : r);
      grid[i] = static_cast<int32_t>(c);
    }
    grids.push_back(std::move(grid));
  }
  return grids;
}

}  // namespace cchc
