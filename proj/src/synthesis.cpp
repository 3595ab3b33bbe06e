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

#include "cchc/synthesis.hpp"

#include "cchc/errors.hpp"
#include "cchc/pyramid.hpp"

namespace cchc {

ag::Tensor upsample_to_full(ag::Tape& tape, const std::vector<ag::Tensor>& levels,
                            const ag::Tensor& up_kernel, int height, int width) {
  if (static_cast<int>(levels.size()) != kLevels)
    throw ArgumentError("upsample_to_full: expected 7 levels");
  const auto extents = level_extents(height, width);
  for (int i = 0; i < kLevels; ++i) {
    const auto& level = levels[static_cast<size_t>(i)];
    const auto& [h, w] = extents[static_cast<size_t>(i)];
    if (level.dim(1) != h || level.dim(2) != w)
      throw ArgumentError("upsample_to_full: level extents do not match image size");
  }

  std::vector<ag::Tensor> full;
  full.reserve(kLevels);
  for (int i = 0; i < kLevels; ++i) {
    ag::Tensor t = levels[static_cast<size_t>(i)];
    for (int j = i; j > 0; --j) {
      const auto& [th, tw] = extents[static_cast<size_t>(j - 1)];
      t = ag::upsample2x(tape, t, up_kernel);
      t = ag::crop2d(tape, t, th, tw);
    }
    full.push_back(t);
  }
  return ag::concat_channels(tape, full);
}

ag::Tensor synthesize(ag::Tape& tape, const ag::Tensor& full_latents,
                      const SynthesisParams& params) {
  if (full_latents.shape().size() != 3 || full_latents.dim(0) != kLevels)
    throw ArgumentError("synthesize: input must be [7,H,W]");
  const int h = full_latents.dim(1), w = full_latents.dim(2);

  ag::Tensor pixels = ag::chw_to_nc(tape, full_latents);                  // [N,7]
  ag::Tensor h1 = ag::relu(tape, ag::linear(tape, pixels, params.w1, params.b1));
  ag::Tensor h2 = ag::relu(tape, ag::linear(tape, h1, params.w2, params.b2));
  ag::Tensor img = ag::nc_to_chw(tape, h2, h, w);                         // [3,H,W]

  ag::Tensor c1 = ag::relu(tape, ag::conv3x3(tape, img, params.conv1, params.cb1));
  img = ag::add(tape, img, c1);
  ag::Tensor c2 = ag::conv3x3(tape, img, params.conv2, params.cb2);
  img = ag::add(tape, img, c2);

  return ag::clamp01_ste(tape, img);
}

int count_synthesis_macs() { return kSynthesisMacsPerPixel; }

}  // namespace cchc
