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

#ifndef CCHC_METRICS_HPP_
#define CCHC_METRICS_HPP_

#include "cchc/image.hpp"
#include "cchc/tensor.hpp"

namespace cchc {

// MS-SSIM configuration: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1.0, scale weights below, 2x average pooling between scales.
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 1e-4;   // (K1*L)^2
constexpr double kSsimC2 = 9e-4;   // (K2*L)^2
extern const std::array<double, 5> kMsssimWeights;

// Scales that fit: scale k needs min(H, W) >= 11 * 2^(k-1); at least 1.
// Fewer than 5 scales renormalizes the used weights to sum to 1.
int msssim_scale_count(int height, int width);

// Mean of squared differences over all 3*H*W values (images in [0,1]).
double mse(const Image& a, const Image& b);

// 10*log10(1/mse); +infinity for identical images.
double psnr_db(double mse_value);

// Multi-scale SSIM in [-1, 1]; 1 means identical.
double ms_ssim(const Image& a, const Image& b);

// D = mse + alpha*(1 - ms_ssim); alpha defaults to 0.01 in the trainer.
double distortion(const Image& a, const Image& b, double alpha);

// Graph versions for the training loss; x and ref are [3,H,W] tensors, ref
// typically constant.  Coarser scales average the contrast-structure map
// (negative values rectified); the coarsest scale averages the full SSIM map.
ag::Tensor mse_graph(ag::Tape& tape, const ag::Tensor& x, const ag::Tensor& ref);
ag::Tensor ms_ssim_graph(ag::Tape& tape, const ag::Tensor& x, const ag::Tensor& ref);
ag::Tensor distortion_graph(ag::Tape& tape, const ag::Tensor& x, const ag::Tensor& ref,
                            double alpha);

}  // namespace cchc

#endif  // CCHC_METRICS_HPP_
