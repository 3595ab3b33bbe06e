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

#include "cchc/model.hpp"

#include <cmath>

namespace cchc {

const std::array<double, 8> kUpsampleInitTaps = {
    -0.0154, 0.0738, -0.1152, 0.5568, 0.5568, -0.1152, 0.0738, -0.0154};

namespace {

ag::Tensor fan_in_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / fan_in);
  return ag::Tensor::uniform(std::move(shape), -bound, bound, rng,
                             /*requires_grad=*/true);
}

ag::Tensor zero_bias(int n) { return ag::Tensor::zeros({n}, /*requires_grad=*/true); }

}  // namespace

CodecModel init_model(Rng& rng) {
  CodecModel m;

  std::vector<double> taps(64);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      taps[static_cast<size_t>(i * 8 + j)] =
          kUpsampleInitTaps[static_cast<size_t>(i)] *
          kUpsampleInitTaps[static_cast<size_t>(j)];
  m.synth.up_kernel = ag::Tensor::from_data({8, 8}, std::move(taps),
                                            /*requires_grad=*/true);

  m.synth.w1 = fan_in_uniform({7, 40}, 7, rng);
  m.synth.b1 = zero_bias(40);
  m.synth.w2 = fan_in_uniform({40, 3}, 40, rng);
  m.synth.b2 = zero_bias(3);
  m.synth.conv1 = fan_in_uniform({3, 3, 3, 3}, 27, rng);
  m.synth.cb1 = zero_bias(3);
  m.synth.conv2 = fan_in_uniform({3, 3, 3, 3}, 27, rng);
  m.synth.cb2 = zero_bias(3);

  m.arm.w1 = fan_in_uniform({24, 24}, 24, rng);
  m.arm.b1 = zero_bias(24);
  m.arm.w2 = fan_in_uniform({24, 24}, 24, rng);
  m.arm.b2 = zero_bias(24);
  m.arm.w3 = fan_in_uniform({24, 2}, 24, rng);
  m.arm.b3 = zero_bias(2);

  return m;
}

std::vector<NamedTensor> tensor_list(const CodecModel& model) {
  return {
      {"up_kernel", model.synth.up_kernel},
      {"w1", model.synth.w1},
      {"b1", model.synth.b1},
      {"w2", model.synth.w2},
      {"b2", model.synth.b2},
      {"conv1", model.synth.conv1},
      {"cb1", model.synth.cb1},
      {"conv2", model.synth.conv2},
      {"cb2", model.synth.cb2},
      {"arm_w1", model.arm.w1},
      {"arm_b1", model.arm.b1},
      {"arm_w2", model.arm.w2},
      {"arm_b2", model.arm.b2},
      {"arm_w3", model.arm.w3},
      {"arm_b3", model.arm.b3},
  };
}

}  // namespace cchc
