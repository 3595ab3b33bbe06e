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

#ifndef CCHC_CODEC_HPP_
#define CCHC_CODEC_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "cchc/bitstream.hpp"
#include "cchc/image.hpp"
#include "cchc/model.hpp"
#include "cchc/pyramid.hpp"

namespace cchc {

// Plain-double decoder parameters in serialization order; the decode path
// never touches the autodiff graph.
struct ModelD {
  std::vector<double> up_kernel;          // 64
  std::vector<double> w1, b1, w2, b2;     // 280, 40, 120, 3
  std::vector<double> conv1, cb1;         // 81, 3
  std::vector<double> conv2, cb2;         // 81, 3
  std::vector<double> arm_w1, arm_b1;     // 576, 24
  std::vector<double> arm_w2, arm_b2;     // 576, 24
  std::vector<double> arm_w3, arm_b3;     // 48, 2

  static ModelD from_quantized(const std::vector<int16_t>& weights,
                               const std::array<int8_t, kWeightTensorCount>& exponents);
};

// Per-tensor scalar counts in serialization order.
extern const std::array<int, kWeightTensorCount> kTensorSizes;

// The single decode path: upsample the integer latents with the shared 8x8
// kernel, run the 4 synthesis layers, clamp to [0,1].  The encoder calls this
// same function on its own quantized latents, which is what makes the
// integrity check ("decode equals the encoder's final reconstruction")
// meaningful rather than circular at the bit level: the bitstream must
// reproduce the latents and weights exactly for the outputs to match.
Image decode_core(int height, int width, const ModelD& model,
                  const std::vector<LatentGrid>& latents);

// Range coding of the 7 level streams.  Encoder and decoder walk each level
// in raster order, evaluating the context model on already-decoded integers.
std::array<std::vector<uint8_t>, kLevels> encode_latent_streams(
    const std::vector<LatentGrid>& latents, const ModelD& model,
    const std::array<std::pair<int16_t, int16_t>, kLevels>& bounds, int height,
    int width);
std::vector<LatentGrid> decode_latent_streams(const BitstreamData& data,
                                              const ModelD& model,
                                              bool parallel_levels);

// Sum of rate_bits over every latent under the context model -- the
// estimator checked against actual coded bytes.
double estimate_rate_bits(const std::vector<LatentGrid>& latents, const ModelD& model,
                          int height, int width);

struct DecodeOutput {
  Image image;
  std::vector<LatentGrid> latents;
  BitstreamData parsed;
  double seconds = 0.0;
};
DecodeOutput decode_bitstream_bytes(const std::vector<uint8_t>& bytes,
                                    bool parallel_levels = false);

// Architecture-arithmetic complexity report for an image size.
struct ProfileStats {
  int synthesis_macs_per_pixel;   // 562
  int arm_macs_per_eval;          // 1200
  double latents_per_pixel;       // <= 4/3
  double arm_macs_per_pixel;      // 1200 * latents_per_pixel
  double upsample_macs_per_pixel; // 16 taps per produced sample, all stages
  double total_macs_per_pixel;
  int64_t weight_payload_bytes;   // 1925 * 2
  int64_t header_bytes;
};
ProfileStats profile_stats(int height, int width);

}  // namespace cchc

#endif  // CCHC_CODEC_HPP_
