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

#include "cchc/codec.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

#include "cchc/arm.hpp"
#include "cchc/errors.hpp"
#include "cchc/laplace.hpp"
#include "cchc/range_coder.hpp"
#include "cchc/tensor.hpp"

namespace cchc {

const std::array<int, kWeightTensorCount> kTensorSizes = {
    64, 280, 40, 120, 3, 81, 3, 81, 3, 576, 24, 576, 24, 48, 2};

ModelD ModelD::from_quantized(const std::vector<int16_t>& weights,
                              const std::array<int8_t, kWeightTensorCount>& exponents) {
  if (weights.size() != static_cast<size_t>(kTotalParamCount))
    throw ArgumentError("ModelD: expected 1925 weight values");

  ModelD m;
  std::vector<double>* fields[kWeightTensorCount] = {
      &m.up_kernel, &m.w1, &m.b1, &m.w2, &m.b2, &m.conv1, &m.cb1, &m.conv2, &m.cb2,
      &m.arm_w1, &m.arm_b1, &m.arm_w2, &m.arm_b2, &m.arm_w3, &m.arm_b3};
  size_t pos = 0;
  for (int t = 0; t < kWeightTensorCount; ++t) {
    const size_t n = static_cast<size_t>(kTensorSizes[static_cast<size_t>(t)]);
    std::vector<int16_t> slice(weights.begin() + static_cast<int64_t>(pos),
                               weights.begin() + static_cast<int64_t>(pos + n));
    *fields[t] = dequantize_values(slice, exponents[static_cast<size_t>(t)]);
    pos += n;
  }
  return m;
}

namespace {

// Upsamples one level's integer grid to full resolution through the cascade,
// center-cropping after each 2x stage.
std::vector<double> upsample_level(const LatentGrid& grid, int level,
                                   const std::array<std::pair<int, int>, kLevels>& extents,
                                   const std::vector<double>& kernel) {
  auto [h, w] = extents[static_cast<size_t>(level)];
  std::vector<double> cur(grid.begin(), grid.end());
  for (int j = level; j > 0; --j) {
    const auto& [th, tw] = extents[static_cast<size_t>(j - 1)];
    std::vector<double> up(static_cast<size_t>(4) * h * w);
    ag::kernels::upsample2x_fwd(cur.data(), h, w, kernel.data(), up.data());
    const int uh = 2 * h, uw = 2 * w;
    const int y0 = (uh - th) / 2, x0 = (uw - tw) / 2;
    std::vector<double> cropped(static_cast<size_t>(th) * tw);
    for (int y = 0; y < th; ++y)
      std::copy_n(up.data() + static_cast<int64_t>(y + y0) * uw + x0, tw,
                  cropped.data() + static_cast<int64_t>(y) * tw);
    cur = std::move(cropped);
    h = th;
    w = tw;
  }
  return cur;
}

void check_latents(int height, int width,
                   const std::array<std::pair<int, int>, kLevels>& extents,
                   const std::vector<LatentGrid>& latents) {
  if (static_cast<int>(latents.size()) != kLevels)
    throw ArgumentError("decode: expected 7 latent levels");
  for (int i = 0; i < kLevels; ++i) {
    const auto& [h, w] = extents[static_cast<size_t>(i)];
    if (latents[static_cast<size_t>(i)].size() != static_cast<size_t>(h) * w)
      throw ArgumentError("decode: latent level size mismatch");
  }
  (void)height;
  (void)width;
}

}  // namespace

Image decode_core(int height, int width, const ModelD& model,
                  const std::vector<LatentGrid>& latents) {
  const auto extents = level_extents(height, width);
  check_latents(height, width, extents, latents);
  const int64_t plane = static_cast<int64_t>(height) * width;

  // Full-resolution latent stack, pixels as rows: [N, 7].
  std::vector<double> pixels(static_cast<size_t>(plane) * kLevels);
  for (int i = 0; i < kLevels; ++i) {
    const std::vector<double> channel =
        upsample_level(latents[static_cast<size_t>(i)], i, extents, model.up_kernel);
    for (int64_t n = 0; n < plane; ++n)
      pixels[static_cast<size_t>(n * kLevels + i)] = channel[static_cast<size_t>(n)];
  }

  std::vector<double> h1(static_cast<size_t>(plane) * 40);
  ag::kernels::linear_fwd(pixels.data(), static_cast<int>(plane), 7, model.w1.data(), 40,
                          model.b1.data(), h1.data());
  for (auto& v : h1) v = v > 0.0 ? v : 0.0;

  std::vector<double> h2(static_cast<size_t>(plane) * 3);
  ag::kernels::linear_fwd(h1.data(), static_cast<int>(plane), 40, model.w2.data(), 3,
                          model.b2.data(), h2.data());
  for (auto& v : h2) v = v > 0.0 ? v : 0.0;

  // [N,3] -> planar [3,H,W]
  std::vector<double> img(static_cast<size_t>(plane) * 3);
  for (int64_t n = 0; n < plane; ++n)
    for (int c = 0; c < 3; ++c)
      img[static_cast<size_t>(c * plane + n)] = h2[static_cast<size_t>(n * 3 + c)];

  std::vector<double> conv_out(static_cast<size_t>(plane) * 3);
  ag::kernels::conv3x3_fwd(img.data(), 3, height, width, model.conv1.data(), 3,
                           model.cb1.data(), conv_out.data());
  for (size_t i = 0; i < img.size(); ++i)
    img[i] += conv_out[i] > 0.0 ? conv_out[i] : 0.0;

  ag::kernels::conv3x3_fwd(img.data(), 3, height, width, model.conv2.data(), 3,
                           model.cb2.data(), conv_out.data());
  for (size_t i = 0; i < img.size(); ++i) img[i] += conv_out[i];

  Image out(height, width);
  for (size_t i = 0; i < img.size(); ++i)
    out.data[i] = img[i] < 0.0 ? 0.0 : (img[i] > 1.0 ? 1.0 : img[i]);
  return out;
}

std::array<std::vector<uint8_t>, kLevels> encode_latent_streams(
    const std::vector<LatentGrid>& latents, const ModelD& model,
    const std::array<std::pair<int16_t, int16_t>, kLevels>& bounds, int height,
    int width) {
  const auto extents = level_extents(height, width);
  check_latents(height, width, extents, latents);
  const ArmEvaluator arm(model.arm_w1, model.arm_b1, model.arm_w2, model.arm_b2,
                         model.arm_w3, model.arm_b3);
  const auto offsets = build_template();

  std::array<std::vector<uint8_t>, kLevels> streams;
  for (int i = 0; i < kLevels; ++i) {
    const auto& [h, w] = extents[static_cast<size_t>(i)];
    const LatentGrid& grid = latents[static_cast<size_t>(i)];
    const auto& [vmin, vmax] = bounds[static_cast<size_t>(i)];
    RangeEncoder enc;
    double ctx[kContextSize], mu, scale;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        extract_context(grid.data(), h, w, y, x, offsets, ctx);
        arm.eval(ctx, &mu, &scale);
        enc.encode_symbol(build_cdf(mu, scale, vmin, vmax),
                          grid[static_cast<size_t>(y) * static_cast<size_t>(w) +
                               static_cast<size_t>(x)]);
      }
    }
    streams[static_cast<size_t>(i)] = enc.finish();
  }
  return streams;
}

std::vector<LatentGrid> decode_latent_streams(const BitstreamData& data,
                                              const ModelD& model, bool parallel_levels) {
  const int height = data.header.height, width = data.header.width;
  const auto extents = level_extents(height, width);
  const ArmEvaluator arm(model.arm_w1, model.arm_b1, model.arm_w2, model.arm_b2,
                         model.arm_w3, model.arm_b3);
  const auto offsets = build_template();

  std::vector<LatentGrid> latents(kLevels);
  auto decode_level = [&](int i) {
    const auto& [h, w] = extents[static_cast<size_t>(i)];
    const auto& [vmin, vmax] = data.header.level_bounds[static_cast<size_t>(i)];
    LatentGrid grid(static_cast<size_t>(h) * w, 0);
    RangeDecoder dec(data.streams[static_cast<size_t>(i)].data(),
                     data.streams[static_cast<size_t>(i)].size());
    double ctx[kContextSize], mu, scale;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        // Context reads only positions already decoded in raster order.
        extract_context(grid.data(), h, w, y, x, offsets, ctx);
        arm.eval(ctx, &mu, &scale);
        grid[static_cast<size_t>(y) * static_cast<size_t>(w) + static_cast<size_t>(x)] =
            dec.decode_symbol(build_cdf(mu, scale, vmin, vmax));
      }
    }
    latents[static_cast<size_t>(i)] = std::move(grid);
  };

  if (!parallel_levels) {
    for (int i = 0; i < kLevels; ++i) decode_level(i);
    return latents;
  }

  std::array<std::exception_ptr, kLevels> errors{};
  std::vector<std::thread> workers;
  workers.reserve(kLevels);
  for (int i = 0; i < kLevels; ++i)
    workers.emplace_back([&, i]() {
      try {
        decode_level(i);
      } catch (...) {
        errors[static_cast<size_t>(i)] = std::current_exception();
      }
    });
  for (auto& t : workers) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return latents;
}

double estimate_rate_bits(const std::vector<LatentGrid>& latents, const ModelD& model,
                          int height, int width) {
  const auto extents = level_extents(height, width);
  check_latents(height, width, extents, latents);
  const ArmEvaluator arm(model.arm_w1, model.arm_b1, model.arm_w2, model.arm_b2,
                         model.arm_w3, model.arm_b3);
  const auto offsets = build_template();

  double bits = 0.0;
  double ctx[kContextSize], mu, scale;
  for (int i = 0; i < kLevels; ++i) {
    const auto& [h, w] = extents[static_cast<size_t>(i)];
    const LatentGrid& grid = latents[static_cast<size_t>(i)];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        extract_context(grid.data(), h, w, y, x, offsets, ctx);
        arm.eval(ctx, &mu, &scale);
        bits += rate_bits(grid[static_cast<size_t>(y) * static_cast<size_t>(w) +
                               static_cast<size_t>(x)],
                          mu, scale);
      }
    }
  }
  return bits;
}

DecodeOutput decode_bitstream_bytes(const std::vector<uint8_t>& bytes,
                                    bool parallel_levels) {
  const auto start = std::chrono::steady_clock::now();
  DecodeOutput out;
  out.parsed = read_bitstream(bytes);
  const ModelD model =
      ModelD::from_quantized(out.parsed.weights, out.parsed.header.step_exponents);
  out.latents = decode_latent_streams(out.parsed, model, parallel_levels);
  out.image = decode_core(out.parsed.header.height, out.parsed.header.width, model,
                          out.latents);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count();
  return out;
}

ProfileStats profile_stats(int height, int width) {
  const auto extents = level_extents(height, width);
  const double pixels = static_cast<double>(height) * width;

  double latent_count = 0.0;
  for (const auto& [h, w] : extents) latent_count += static_cast<double>(h) * w;

  // Each 2x stage produces a (2h, 2w) grid at 16 taps per output sample;
  // level i runs stages i, i-1, ..., 1.
  double upsample_macs = 0.0;
  for (int i = 1; i < kLevels; ++i)
    for (int j = 1; j <= i; ++j) {
      const auto& [h, w] = extents[static_cast<size_t>(j)];
      upsample_macs += 16.0 * 4.0 * h * w;
    }

  ProfileStats stats;
  stats.synthesis_macs_per_pixel = kSynthesisMacsPerPixel;
  stats.arm_macs_per_eval = kArmMacsPerEval;
  stats.latents_per_pixel = latent_count / pixels;
  stats.arm_macs_per_pixel = kArmMacsPerEval * stats.latents_per_pixel;
  stats.upsample_macs_per_pixel = upsample_macs / pixels;
  stats.total_macs_per_pixel = stats.synthesis_macs_per_pixel +
                               stats.arm_macs_per_pixel + stats.upsample_macs_per_pixel;
  stats.weight_payload_bytes = 2 * kTotalParamCount;
  stats.header_bytes = kHeaderBytes;
  return stats;
}

}  // namespace cchc
