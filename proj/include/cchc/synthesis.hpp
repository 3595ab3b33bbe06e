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

#ifndef CCHC_SYNTHESIS_HPP_
#define CCHC_SYNTHESIS_HPP_

#include <vector>

#include "cchc/model.hpp"
#include "cchc/tensor.hpp"

namespace cchc {

// Level i is upsampled 2x exactly i times; after each stage the output is
// center-cropped to the extents of the next-finer level, so level i reaches
// exactly (height, width).  Output stacks levels 0..6 as channels.
ag::Tensor upsample_to_full(ag::Tape& tape, const std::vector<ag::Tensor>& levels,
                            const ag::Tensor& up_kernel, int height, int width);

// The 4-layer synthesis: per-pixel 7->40 MLP + ReLU, per-pixel 40->3 MLP +
// ReLU, residual 3x3 conv with ReLU on the conv path, residual 3x3 conv with
// no activation, then clamp to [0,1] (straight-through gradient).
ag::Tensor synthesize(ag::Tape& tape, const ag::Tensor& full_latents,
                      const SynthesisParams& params);

// 562: the per-pixel multiply-accumulates of the four synthesis layers,
// excluding upsampling (reported separately by the profiler).
int count_synthesis_macs();

}  // namespace cchc

#endif  // CCHC_SYNTHESIS_HPP_
