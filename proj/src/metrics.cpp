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

#include "cchc/metrics.hpp"

#include <cmath>
#include <limits>

#include "cchc/errors.hpp"

namespace cchc {

const std::array<double, 5> kMsssimWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

namespace {

std::vector<double> gaussian_window() {
  std::vector<double> g(kSsimWindow);
  const double c = (kSsimWindow - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - c;
    g[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += g[static_cast<size_t>(i)];
  }
  for (auto& v : g) v /= sum;
  return g;
}

ag::Tensor image_tensor(const Image& img) {
  return ag::Tensor::from_data({3, img.height, img.width}, img.data);
}

void check_pair(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width)
    throw ArgumentError("metrics: image dimensions differ");
  if (a.height < 1 || a.width < 1) throw ArgumentError("metrics: empty image");
}

}  // namespace

int msssim_scale_count(int height, int width) {
  const int side = height < width ? height : width;
  if (side < kSsimWindow)
    throw ArgumentError("ms_ssim: image smaller than the 11x11 window");
  int scales = 1;
  while (scales < 5 && side >= kSsimWindow * (1 << scales)) ++scales;
  return scales;
}

double mse(const Image& a, const Image& b) {
  check_pair(a, b);
  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

double psnr_db(double mse_value) {
  if (mse_value <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse_value);
}

double ms_ssim(const Image& a, const Image& b) {
  check_pair(a, b);
  ag::Tape tape;  // nothing records: inputs carry no gradients
  return ms_ssim_graph(tape, image_tensor(a), image_tensor(b)).data()[0];
}

double distortion(const Image& a, const Image& b, double alpha) {
  if (alpha < 0.0) throw ArgumentError("distortion: alpha must be nonnegative");
  return mse(a, b) + alpha * (1.0 - ms_ssim(a, b));
}

ag::Tensor mse_graph(ag::Tape& tape, const ag::Tensor& x, const ag::Tensor& ref) {
  ag::Tensor d = ag::sub(tape, x, ref);
  return ag::mean(tape, ag::mul(tape, d, d));
}

ag::Tensor ms_ssim_graph(ag::Tape& tape, const ag::Tensor& x, const ag::Tensor& ref) {
  if (x.shape() != ref.shape() || x.shape().size() != 3)
    throw ArgumentError("ms_ssim: inputs must be matching [C,H,W] tensors");
  const int scales = msssim_scale_count(x.dim(1), x.dim(2));
  double weight_sum = 0.0;
  for (int s = 0; s < scales; ++s) weight_sum += kMsssimWeights[static_cast<size_t>(s)];

  const std::vector<double> window = gaussian_window();
  ag::Tensor a = x, b = ref, result;
  for (int s = 0; s < scales; ++s) {
    if (s > 0) {
      a = ag::avgpool2(tape, a);
      b = ag::avgpool2(tape, b);
    }
    ag::Tensor mu_a = ag::filter_sep_valid(tape, a, window);
    ag::Tensor mu_b = ag::filter_sep_valid(tape, b, window);
    ag::Tensor var_a = ag::sub(tape, ag::filter_sep_valid(tape, ag::mul(tape, a, a), window),
                               ag::mul(tape, mu_a, mu_a));
    ag::Tensor var_b = ag::sub(tape, ag::filter_sep_valid(tape, ag::mul(tape, b, b), window),
                               ag::mul(tape, mu_b, mu_b));
    ag::Tensor cov = ag::sub(tape, ag::filter_sep_valid(tape, ag::mul(tape, a, b), window),
                             ag::mul(tape, mu_a, mu_b));

    // contrast-structure term, rectified before averaging so the fractional
    // powers below stay real
    ag::Tensor cs = ag::divide(
        tape, ag::add_scalar(tape, ag::mul_scalar(tape, cov, 2.0), kSsimC2),
        ag::add_scalar(tape, ag::add(tape, var_a, var_b), kSsimC2));

    ag::Tensor term;
    if (s == scales - 1) {
      ag::Tensor lum = ag::divide(
          tape,
          ag::add_scalar(tape, ag::mul_scalar(tape, ag::mul(tape, mu_a, mu_b), 2.0),
                         kSsimC1),
          ag::add_scalar(
              tape, ag::add(tape, ag::mul(tape, mu_a, mu_a), ag::mul(tape, mu_b, mu_b)),
              kSsimC1));
      term = ag::mean(tape, ag::relu(tape, ag::mul(tape, lum, cs)));
    } else {
      term = ag::mean(tape, ag::relu(tape, cs));
    }
    ag::Tensor factor =
        ag::pow_scalar(tape, term, kMsssimWeights[static_cast<size_t>(s)] / weight_sum);
    result = (s == 0) ? factor : ag::mul(tape, result, factor);
  }
  return result;
}

ag::Tensor distortion_graph(ag::Tape& tape, const ag::Tensor& x, const ag::Tensor& ref,
                            double alpha) {
  ag::Tensor m = mse_graph(tape, x, ref);
  ag::Tensor s = ms_ssim_graph(tape, x, ref);
  // alpha * (1 - s)
  ag::Tensor perceptual =
      ag::mul_scalar(tape, ag::add_scalar(tape, ag::mul_scalar(tape, s, -1.0), 1.0), alpha);
  return ag::add(tape, m, perceptual);
}

}  // namespace cchc
