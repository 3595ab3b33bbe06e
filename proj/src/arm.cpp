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

#include "cchc/arm.hpp"

#include <algorithm>
#include <cmath>

#include "cchc/errors.hpp"

namespace cchc {

std::vector<std::pair<int, int>> build_template() {
  struct Candidate {
    int d2, dy, dx;
  };
  std::vector<Candidate> candidates;
  // Window comfortably larger than the 24 nearest causal positions.
  for (int dy = -5; dy <= 0; ++dy) {
    for (int dx = -5; dx <= 5; ++dx) {
      const bool causal = dy < 0 || (dy == 0 && dx < 0);
      if (!causal) continue;
      candidates.push_back({dy * dy + dx * dx, dy, dx});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.d2 != b.d2) return a.d2 < b.d2;
              if (a.dy != b.dy) return a.dy > b.dy;
              return a.dx < b.dx;
            });
  std::vector<std::pair<int, int>> offsets;
  offsets.reserve(kContextSize);
  for (int i = 0; i < kContextSize; ++i)
    offsets.emplace_back(candidates[static_cast<size_t>(i)].dy,
                         candidates[static_cast<size_t>(i)].dx);
  return offsets;
}

void extract_context(const int32_t* grid, int height, int width, int y, int x,
                     const std::vector<std::pair<int, int>>& offsets,
                     double out[kContextSize]) {
  for (int k = 0; k < kContextSize; ++k) {
    const int sy = y + offsets[static_cast<size_t>(k)].first;
    const int sx = x + offsets[static_cast<size_t>(k)].second;
    out[k] = (sy >= 0 && sy < height && sx >= 0 && sx < width)
                 ? static_cast<double>(grid[static_cast<int64_t>(sy) * width + sx])
                 : 0.0;
  }
}

ArmHeads arm_apply(ag::Tape& tape, const ag::Tensor& contexts, const ArmParams& params) {
  if (contexts.shape().size() != 2 || contexts.dim(1) != kContextSize)
    throw ArgumentError("arm_apply: contexts must be [N,24]");
  ag::Tensor h1 = ag::relu(tape, ag::linear(tape, contexts, params.w1, params.b1));
  ag::Tensor h2 = ag::relu(tape, ag::linear(tape, h1, params.w2, params.b2));
  ag::Tensor out = ag::linear(tape, h2, params.w3, params.b3);  // [N,2]
  ArmHeads heads;
  heads.mu = ag::slice_col(tape, out, 0);
  heads.scale = ag::exp_clamp(tape, ag::slice_col(tape, out, 1), kScaleClampLo,
                              kScaleClampHi);
  return heads;
}

ag::Tensor latent_rate_bits(ag::Tape& tape, const ag::Tensor& quantized_level,
                            const ArmParams& params,
                            const std::vector<std::pair<int, int>>& offsets) {
  ag::Tensor contexts = ag::gather_offsets(tape, quantized_level, offsets);  // [N,24]
  ArmHeads heads = arm_apply(tape, contexts, params);
  ag::Tensor values = ag::flatten(tape, quantized_level);  // [N]
  return ag::laplace_rate_bits(tape, values, heads.mu, heads.scale);
}

ArmEvaluator::ArmEvaluator(const std::vector<double>& w1, const std::vector<double>& b1,
                           const std::vector<double>& w2, const std::vector<double>& b2,
                           const std::vector<double>& w3, const std::vector<double>& b3) {
  if (w1.size() != w1_.size() || b1.size() != b1_.size() || w2.size() != w2_.size() ||
      b2.size() != b2_.size() || w3.size() != w3_.size() || b3.size() != b3_.size())
    throw ArgumentError("ArmEvaluator: parameter size mismatch");
  std::copy(w1.begin(), w1.end(), w1_.begin());
  std::copy(b1.begin(), b1.end(), b1_.begin());
  std::copy(w2.begin(), w2.end(), w2_.begin());
  std::copy(b2.begin(), b2.end(), b2_.begin());
  std::copy(w3.begin(), w3.end(), w3_.begin());
  std::copy(b3.begin(), b3.end(), b3_.begin());
}

void ArmEvaluator::eval(const double context[kContextSize], double* mu,
                        double* scale) const {
  double h1[24], h2[24];
  for (int j = 0; j < 24; ++j) h1[j] = b1_[static_cast<size_t>(j)];
  for (int i = 0; i < 24; ++i) {
    const double x = context[i];
    if (x == 0.0) continue;
    const double* row = w1_.data() + i * 24;
    for (int j = 0; j < 24; ++j) h1[j] += x * row[j];
  }
  for (int j = 0; j < 24; ++j) h1[j] = h1[j] > 0.0 ? h1[j] : 0.0;

  for (int j = 0; j < 24; ++j) h2[j] = b2_[static_cast<size_t>(j)];
  for (int i = 0; i < 24; ++i) {
    const double x = h1[i];
    if (x == 0.0) continue;
    const double* row = w2_.data() + i * 24;
    for (int j = 0; j < 24; ++j) h2[j] += x * row[j];
  }
  for (int j = 0; j < 24; ++j) h2[j] = h2[j] > 0.0 ? h2[j] : 0.0;

  double o0 = b3_[0], o1 = b3_[1];
  for (int i = 0; i < 24; ++i) {
    o0 += h2[i] * w3_[static_cast<size_t>(i * 2)];
    o1 += h2[i] * w3_[static_cast<size_t>(i * 2 + 1)];
  }
  *mu = o0;
  const double s = o1 < kScaleClampLo ? kScaleClampLo
                                      : (o1 > kScaleClampHi ? kScaleClampHi : o1);
  *scale = std::exp(s);
}

}  // namespace cchc
