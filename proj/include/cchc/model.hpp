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

#ifndef CCHC_MODEL_HPP_
#define CCHC_MODEL_HPP_

#include <array>
#include <string>
#include <vector>

#include "cchc/rng.hpp"
#include "cchc/tensor.hpp"

namespace cchc {

// The per-image decoder parameters: an 8x8 upsampling kernel shared by all
// cascade stages, the 4-layer synthesis network, and the context model MLP.

struct SynthesisParams {
  ag::Tensor up_kernel;  // [8,8]
  ag::Tensor w1, b1;     // [7,40], [40]   per-pixel MLP + ReLU
  ag::Tensor w2, b2;     // [40,3], [3]    per-pixel MLP + ReLU
  ag::Tensor conv1, cb1; // [3,3,3,3], [3] residual conv, ReLU on conv path
  ag::Tensor conv2, cb2; // [3,3,3,3], [3] residual conv, no activation
};

struct ArmParams {
  ag::Tensor w1, b1;  // [24,24], [24]
  ag::Tensor w2, b2;  // [24,24], [24]
  ag::Tensor w3, b3;  // [24,2], [2]  outputs (mu, raw scale)
};

struct CodecModel {
  SynthesisParams synth;
  ArmParams arm;
};

// Parameter counts (scalars).
constexpr int kSynthesisParamCount = 675;  // includes the 64 upsampler taps
constexpr int kArmParamCount = 1250;
constexpr int kTotalParamCount = 1925;
constexpr int kModelTensorCount = 15;

// MAC accounting constants: per-pixel synthesis 7*40 + 40*3 + 2*(3*3*9),
// per-latent context model 24*24 + 24*24 + 24*2.
constexpr int kSynthesisMacsPerPixel = 562;
constexpr int kArmMacsPerEval = 1200;

// Half-pel interpolation taps whose outer product initializes up_kernel.
extern const std::array<double, 8> kUpsampleInitTaps;

// Weights uniform in +/-sqrt(1/fan_in), biases zero, up_kernel from the taps
// above; the draw order is fixed so a seed pins the whole model.
CodecModel init_model(Rng& rng);

// The 15 tensors in bitstream serialization order.
struct NamedTensor {
  std::string name;
  ag::Tensor tensor;
};
std::vector<NamedTensor> tensor_list(const CodecModel& model);

}  // namespace cchc

#endif  // CCHC_MODEL_HPP_
