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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "cchc/arm.hpp"
#include "cchc/laplace.hpp"
#include "cchc/model.hpp"
#include "cchc/rng.hpp"
#include "doctest.h"
#include "support/testutil.hpp"

using namespace cchc;

namespace {

// Independent enumeration of the 24 nearest causal offsets.
std::vector<std::pair<int, int>> brute_force_template() {
  std::vector<std::pair<int, int>> all;
  for (int dy = -5; dy <= 0; ++dy)
    for (int dx = -5; dx <= 5; ++dx)
      if (dy < 0 || dx < 0) all.emplace_back(dy, dx);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    const int da = a.first * a.first + a.second * a.second;
    const int db = b.first * b.first + b.second * b.second;
    if (da != db) return da < db;
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  all.resize(24);
  return all;
}

ArmParams zero_arm() {
  ArmParams p;
  p.w1 = ag::Tensor::zeros({24, 24});
  p.b1 = ag::Tensor::zeros({24});
  p.w2 = ag::Tensor::zeros({24, 24});
  p.b2 = ag::Tensor::zeros({24});
  p.w3 = ag::Tensor::zeros({24, 2});
  p.b3 = ag::Tensor::zeros({2});
  return p;
}

ArmEvaluator evaluator_of(const ArmParams& p) {
  return ArmEvaluator(p.w1.data(), p.b1.data(), p.w2.data(), p.b2.data(), p.w3.data(),
                      p.b3.data());
}

}  // namespace

TEST_CASE("context template matches brute-force enumeration") {
  const auto t = build_template();
  REQUIRE(t.size() == 24);
  CHECK(t[0] == std::pair<int, int>{0, -1});
  // Distance-1 pair comes before the distance-sqrt(2) diagonals.
  CHECK(t[1] == std::pair<int, int>{-1, 0});
  CHECK((t[2] == std::pair<int, int>{-1, -1} || t[2] == std::pair<int, int>{-1, 1}));
  CHECK(t == brute_force_template());

  for (const auto& [dy, dx] : t) CHECK((dy < 0 || (dy == 0 && dx < 0)));
  auto dedup = t;
  std::sort(dedup.begin(), dedup.end());
  CHECK(std::unique(dedup.begin(), dedup.end()) == dedup.end());
}

TEST_CASE("context extraction is causal and zero-padded") {
  const auto offsets = build_template();
  Rng rng(5);
  const int h = 16, w = 16;
  std::vector<int32_t> grid(static_cast<size_t>(h) * w);
  for (auto& v : grid) v = static_cast<int32_t>(rng.next_below(2001)) - 1000;

  double ctx[kContextSize];
  extract_context(grid.data(), h, w, 0, 0, offsets, ctx);
  for (double v : ctx) CHECK(v == 0.0);

  int violations = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      extract_context(grid.data(), h, w, y, x, offsets, ctx);
      for (size_t k = 0; k < offsets.size(); ++k) {
        const int yy = y + offsets[k].first, xx = x + offsets[k].second;
        const bool in = yy >= 0 && yy < h && xx >= 0 && xx < w;
        const double expected =
            in ? static_cast<double>(grid[static_cast<size_t>(yy) * w + xx]) : 0.0;
        if (ctx[k] != expected) ++violations;
        // Strictly earlier in raster order whenever in bounds.
        if (in && !(yy < y || (yy == y && xx < x))) ++violations;
      }
    }
  CHECK(violations == 0);

  std::vector<int32_t> constant(static_cast<size_t>(h) * w, 37);
  extract_context(constant.data(), h, w, 8, 8, offsets, ctx);
  for (double v : ctx) CHECK(v == 37.0);
}

TEST_CASE("zero parameters predict mean 0 and scale 1") {
  const ArmEvaluator ev = evaluator_of(zero_arm());
  double ctx[kContextSize];
  for (int i = 0; i < kContextSize; ++i) ctx[i] = 3.7 * i - 11.0;
  double mu = -1.0, scale = -1.0;
  ev.eval(ctx, &mu, &scale);
  CHECK(mu == 0.0);
  CHECK(scale == 1.0);
}

TEST_CASE("predicted scale is always finite and positive") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    CodecModel model = init_model(rng);
    // Inflate weights to push the raw scale head far outside the clamp.
    for (double& v : model.arm.w3.data()) v *= 400.0;
    const ArmEvaluator ev = evaluator_of(model.arm);
    double ctx[kContextSize];
    for (int i = 0; i < kContextSize; ++i) ctx[i] = rng.next_uniform(-300.0, 300.0);
    double mu = 0.0, scale = 0.0;
    ev.eval(ctx, &mu, &scale);
    CHECK(std::isfinite(mu));
    CHECK(std::isfinite(scale));
    CHECK(scale > 0.0);
    CHECK(scale >= std::exp(-8.0));
    CHECK(scale <= std::exp(8.0));
  }
}

TEST_CASE("graph prediction matches the scalar evaluator to rounding error") {
  // The graph path and the standalone evaluator may differ in the final ulp
  // (the compiler fuses the batched kernels differently); coder bit-exactness
  // only requires the evaluator to agree with itself across encode and
  // decode, which is tested in the codec suite.
  Rng rng(11);
  CodecModel model = init_model(rng);
  const ArmEvaluator ev = evaluator_of(model.arm);
  const auto offsets = build_template();

  const int h = 9, w = 13;
  ag::Tensor grid = ag::Tensor::zeros({1, h, w});
  for (double& v : grid.data())
    v = std::round(rng.next_uniform(-20.0, 20.0));  // integers, many zeros

  ag::Tape tape;
  ArmHeads heads = arm_apply(tape, ag::gather_offsets(tape, grid, offsets), model.arm);

  std::vector<int32_t> igrid(grid.data().size());
  for (size_t i = 0; i < igrid.size(); ++i)
    igrid[i] = static_cast<int32_t>(grid.data()[i]);

  double ctx[kContextSize];
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double mu = 0.0, scale = 0.0;
      extract_context(igrid.data(), h, w, y, x, offsets, ctx);
      ev.eval(ctx, &mu, &scale);
      const size_t n = static_cast<size_t>(y) * w + x;
      CHECK(heads.mu.data()[n] == doctest::Approx(mu).epsilon(1e-12));
      CHECK(heads.scale.data()[n] == doctest::Approx(scale).epsilon(1e-12));
    }
}

TEST_CASE("level rate graph matches the scalar rate to rounding error") {
  Rng rng(13);
  CodecModel model = init_model(rng);
  const ArmEvaluator ev = evaluator_of(model.arm);
  const auto offsets = build_template();

  const int h = 7, w = 11;
  ag::Tensor grid = ag::Tensor::zeros({1, h, w});
  for (double& v : grid.data()) v = std::round(rng.next_uniform(-8.0, 8.0));

  ag::Tape tape;
  ag::Tensor bits = latent_rate_bits(tape, grid, model.arm, offsets);
  REQUIRE(bits.numel() == static_cast<int64_t>(h) * w);

  std::vector<int32_t> igrid(grid.data().size());
  for (size_t i = 0; i < igrid.size(); ++i)
    igrid[i] = static_cast<int32_t>(grid.data()[i]);

  double ctx[kContextSize];
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double mu = 0.0, scale = 0.0;
      extract_context(igrid.data(), h, w, y, x, offsets, ctx);
      ev.eval(ctx, &mu, &scale);
      const size_t n = static_cast<size_t>(y) * w + x;
      CHECK(bits.data()[n] ==
            doctest::Approx(rate_bits(grid.data()[n], mu, scale)).epsilon(1e-9));
    }
}

TEST_CASE("rate is between 0 and 16 bits and hits the floor far out") {
  for (double scale : {0.05, 0.5, 1.0, 4.0}) {
    for (int v = -50; v <= 50; ++v) {
      const double bits = rate_bits(v, 0.3, scale);
      CHECK(bits >= 0.0);
      CHECK(bits <= 16.0);
    }
  }
  // 10 standard deviations out, tiny scale: floor engaged.
  CHECK(rate_bits(100, 0.0, 0.25) == 16.0);
}

TEST_CASE("average coded rate approaches the discrete entropy") {
  const double b = 2.0;
  // Analytic entropy of the integer-binned Laplace (tails truncated where the
  // mass is negligible).
  double entropy = 0.0;
  for (int v = -400; v <= 400; ++v) {
    const double p = laplace_bin_mass(v, 0.0, b);
    if (p > 0.0) entropy -= p * std::log2(p);
  }

  Rng rng(17);
  const int n = 100000;
  double total_bits = 0.0;
  for (int i = 0; i < n; ++i) {
    // Inverse-CDF sample of Laplace(0, b), rounded to the integer bin.
    const double u = rng.next_unit() - 0.5;
    const double x = (u >= 0.0 ? -1.0 : 1.0) * b *
                     std::log(std::max(1.0 - 2.0 * std::abs(u), 1e-300));
    total_bits += rate_bits(std::round(x), 0.0, b);
  }
  const double mean_bits = total_bits / n;
  CHECK(std::abs(mean_bits - entropy) / entropy < 0.01);
}
