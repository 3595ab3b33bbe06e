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

#ifndef CCHC_TRAINER_HPP_
#define CCHC_TRAINER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "cchc/codec.hpp"
#include "cchc/image.hpp"
#include "cchc/model.hpp"
#include "cchc/pyramid.hpp"

namespace cchc {

struct TrainConfig {
  double lambda = 1e-3;        // rate multiplier on bits-per-pixel
  int iterations = 10000;
  double lr_init = 1e-2;       // cosine decay lr_init -> lr_end
  double lr_end = 1e-5;
  double noise_fraction = 0.8; // uniform-noise proxy phase, then rounding
  uint64_t seed = 0;
  int weight_exp_lo = -14;     // per-tensor step search range (powers of two)
  int weight_exp_hi = -8;
  double alpha = 0.01;         // perceptual weight in the distortion
};

// Operating-point presets spanning the useful rate range.
extern const std::vector<double> kLambdaPresets;

// key=value text file mirroring TrainConfig; unknown keys are rejected.
TrainConfig load_config(const std::string& path);
void apply_config_line(TrainConfig* config, const std::string& line, int line_number);

struct LossParts {
  double total = 0.0;
  double distortion = 0.0;
  double rate_bits = 0.0;  // total bits over all latents
};

// Builds one full forward graph (quantize, upsample, synthesize, distortion,
// rate) on the tape; callers run tape.backward on it for one training step.
LossParts training_loss(ag::Tape& tape, ag::Tensor* loss_out, const Image& image,
                        const LatentPyramid& pyramid, const CodecModel& model,
                        double lambda, double alpha, ag::QuantMode mode, Rng& rng);

struct TrainOutcome {
  LatentPyramid pyramid;
  CodecModel model;
  std::vector<double> loss_history;  // one J per iteration
  int restarts = 0;
};

// The gradient-descent overfit: Adam on latents + all decoder parameters,
// noise proxy for the first noise_fraction of iterations, straight-through
// rounding for the rest.  Non-finite loss restarts with the learning rate
// halved, up to 3 times, then TrainError.
TrainOutcome train_image(const Image& image, const TrainConfig& config);

struct EncodeResult {
  std::vector<uint8_t> bitstream;
  Image decoded;                    // decoded from the emitted bitstream
  double bpp = 0.0;
  double psnr_db = 0.0;
  double ms_ssim = 0.0;
  double estimated_rate_bits = 0.0; // context-model estimate on hard latents
  double actual_latent_bits = 0.0;  // 8 * sum of coded stream bytes
  int restarts = 0;
};

// Full encode: train, hard-quantize, search weight steps, range-encode, emit
// the bitstream, then decode it back and verify the decode is bit-identical
// to the encoder's own quantized reconstruction.
EncodeResult encode_image(const Image& image, const TrainConfig& config);

struct RdPointSummary {
  double lambda = 0.0;
  int64_t bytes = 0;
  double bpp = 0.0;
  double psnr_db = 0.0;
  double ms_ssim = 0.0;
};

// One encode per lambda (jobs > 1 runs them on worker threads); results in
// ascending-lambda order.
std::vector<RdPointSummary> sweep(const Image& image, const std::vector<double>& lambdas,
                                  const TrainConfig& config, int jobs = 1);

}  // namespace cchc

#endif  // CCHC_TRAINER_HPP_
