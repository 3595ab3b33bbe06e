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
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "cchc/errors.hpp"
#include "cchc/metrics.hpp"
#include "cchc/trainer.hpp"
#include "doctest.h"
#include "support/testutil.hpp"

using namespace cchc;

namespace {

std::string write_temp_config(const std::string& body) {
  const std::string path = "/tmp/cchc_trainer_test.cfg";
  std::ofstream out(path, std::ios::trunc);
  out << body;
  return path;
}

TrainConfig quick_config(int iterations, uint64_t seed) {
  TrainConfig c;
  c.lambda = 1e-3;
  c.iterations = iterations;
  c.lr_init = 1e-2;
  c.lr_end = 1e-4;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("config files parse keys, comments, and blanks") {
  const std::string path = write_temp_config(
      "# training settings\n"
      "lambda = 0.002\n"
      "\n"
      "iterations=500\n"
      "lr_init = 0.02\n"
      "lr_end = 0.0001\n"
      "noise_fraction = 0.75\n"
      "seed = 42\n"
      "weight_exp_lo = -13\n"
      "weight_exp_hi = -9\n"
      "alpha = 0.02\n");
  const TrainConfig c = load_config(path);
  CHECK(c.lambda == 0.002);
  CHECK(c.iterations == 500);
  CHECK(c.lr_init == 0.02);
  CHECK(c.lr_end == 0.0001);
  CHECK(c.noise_fraction == 0.75);
  CHECK(c.seed == 42);
  CHECK(c.weight_exp_lo == -13);
  CHECK(c.weight_exp_hi == -9);
  CHECK(c.alpha == 0.02);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_config("/nonexistent/dir/train.cfg"), IoError);
}

TEST_CASE("config rejects unknown keys and malformed values") {
  TrainConfig c;
  CHECK_THROWS_AS(apply_config_line(&c, "learning_rate = 0.1", 3), ParseError);
  CHECK_THROWS_AS(apply_config_line(&c, "lambda = fast", 1), ParseError);
  CHECK_THROWS_AS(apply_config_line(&c, "iterations = 12.5", 2), ParseError);
  CHECK_THROWS_AS(apply_config_line(&c, "just some words", 9), ParseError);

  try {
    apply_config_line(&c, "bogus = 1", 17);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("17") != std::string::npos);
  }

  // Valid syntax, invalid semantics: caught at train time.
  TrainConfig bad = quick_config(100, 0);
  bad.noise_fraction = 1.5;
  Rng rng(61);
  const Image img = test::make_natural_image(24, 24, rng);
  CHECK_THROWS_AS(train_image(img, bad), ArgumentError);
  bad = quick_config(0, 0);
  CHECK_THROWS_AS(train_image(img, bad), ArgumentError);
  bad = quick_config(100, 0);
  bad.lr_end = 1.0;  // above lr_init
  CHECK_THROWS_AS(train_image(img, bad), ArgumentError);
}

TEST_CASE("lambda presets span the documented range") {
  CHECK(kLambdaPresets == std::vector<double>{1e-4, 2e-4, 4e-4, 1e-3, 2e-3, 4e-3});
}

TEST_CASE("zero lambda makes the loss pure distortion") {
  Rng rng(63);
  const Image img = test::make_natural_image(32, 32, rng);
  Rng init_rng(1);
  LatentPyramid pyramid = init_pyramid(32, 32, init_rng);
  CodecModel model = init_model(init_rng);

  ag::Tape tape;
  ag::Tensor loss;
  Rng noise_rng(2);
  const LossParts parts =
      training_loss(tape, &loss, img, pyramid, model, 0.0, 0.01, ag::QuantMode::kNoise,
                    noise_rng);
  CHECK(parts.total == parts.distortion);
  CHECK(parts.rate_bits > 0.0);
  CHECK(loss.data()[0] == parts.total);

  // And with a positive lambda the decomposition is exact per pixel count.
  ag::Tape tape2;
  Rng noise_rng2(2);
  const LossParts with_rate =
      training_loss(tape2, &loss, img, pyramid, model, 2e-3, 0.01,
                    ag::QuantMode::kNoise, noise_rng2);
  CHECK(with_rate.total ==
        doctest::Approx(with_rate.distortion + 2e-3 * with_rate.rate_bits / (32.0 * 32.0))
            .epsilon(1e-12));
  CHECK(with_rate.distortion == doctest::Approx(parts.distortion).epsilon(1e-12));
}

TEST_CASE("a short training run reduces the loss") {
  Rng rng(65);
  const Image img = test::make_natural_image(32, 32, rng);
  TrainConfig config = quick_config(150, 7);
  const TrainOutcome out = train_image(img, config);

  REQUIRE(out.loss_history.size() == 150);
  CHECK(out.restarts == 0);
  const double first =
      std::accumulate(out.loss_history.begin(), out.loss_history.begin() + 10, 0.0) / 10.0;
  const double last =
      std::accumulate(out.loss_history.end() - 10, out.loss_history.end(), 0.0) / 10.0;
  CHECK(last < first);
  for (double j : out.loss_history) CHECK(std::isfinite(j));
}

TEST_CASE("training is bit-deterministic in the seed") {
  Rng rng(67);
  const Image img = test::make_natural_image(24, 24, rng);
  const TrainConfig config = quick_config(40, 11);

  const TrainOutcome a = train_image(img, config);
  const TrainOutcome b = train_image(img, config);
  REQUIRE(a.loss_history.size() == b.loss_history.size());
  for (size_t i = 0; i < a.loss_history.size(); ++i)
    CHECK(a.loss_history[i] == b.loss_history[i]);
  for (int level = 0; level < kLevels; ++level)
    CHECK(a.pyramid.levels[static_cast<size_t>(level)].data() ==
          b.pyramid.levels[static_cast<size_t>(level)].data());

  TrainConfig other = config;
  other.seed = 12;
  const TrainOutcome c = train_image(img, other);
  bool any_difference = false;
  for (size_t i = 0; i < a.loss_history.size(); ++i)
    any_difference = any_difference || a.loss_history[i] != c.loss_history[i];
  CHECK(any_difference);
}

TEST_CASE("non-finite losses exhaust restarts and raise TrainError") {
  Rng rng(69);
  Image img = test::make_natural_image(24, 24, rng);
  img.data[100] = std::numeric_limits<double>::quiet_NaN();
  const TrainConfig config = quick_config(20, 5);
  CHECK_THROWS_AS(train_image(img, config), TrainError);
}

TEST_CASE("train rejects an empty image") {
  CHECK_THROWS_AS(train_image(Image(), quick_config(10, 0)), ArgumentError);
}

TEST_CASE("encode emits a bitstream the decoder reproduces bit-exactly") {
  Rng rng(71);
  const Image img = test::make_natural_image(48, 48, rng);
  const TrainConfig config = quick_config(220, 3);
  const EncodeResult result = encode_image(img, config);

  REQUIRE(!result.bitstream.empty());
  const DecodeOutput decoded = decode_bitstream_bytes(result.bitstream);
  CHECK(decoded.image.height == 48);
  CHECK(decoded.image.width == 48);
  REQUIRE(decoded.image.data.size() == result.decoded.data.size());
  for (size_t i = 0; i < decoded.image.data.size(); ++i)
    REQUIRE(decoded.image.data[i] == result.decoded.data[i]);

  // Reported numbers are recomputable from the outputs.
  CHECK(result.bpp ==
        doctest::Approx(8.0 * static_cast<double>(result.bitstream.size()) / (48.0 * 48.0))
            .epsilon(1e-12));
  CHECK(result.psnr_db == doctest::Approx(psnr_db(mse(img, result.decoded))).epsilon(1e-12));
  CHECK(result.ms_ssim == doctest::Approx(ms_ssim(img, result.decoded)).epsilon(1e-12));
  CHECK(result.estimated_rate_bits > 0.0);
  CHECK(result.actual_latent_bits > 0.0);

  // The header carries step exponents inside the searched range (the search
  // may fall back to coarser steps only on overflow, never below -14).
  const BitstreamData parsed = read_bitstream(result.bitstream);
  for (int8_t e : parsed.header.step_exponents) {
    CHECK(e >= -14);
    CHECK(e <= 0);
  }
  CHECK(parsed.header.height == 48);

  // Encoding again with the same config gives the same bytes.
  const EncodeResult again = encode_image(img, config);
  REQUIRE(again.bitstream.size() == result.bitstream.size());
  for (size_t i = 0; i < result.bitstream.size(); ++i)
    REQUIRE(again.bitstream[i] == result.bitstream[i]);
}

TEST_CASE("encode rejects oversized dimensions") {
  Image img(1, 70000);
  CHECK_THROWS_AS(encode_image(img, quick_config(10, 0)), ArgumentError);
}

TEST_CASE("sweep matches individual encodes and sorts by lambda") {
  Rng rng(73);
  const Image img = test::make_natural_image(32, 32, rng);
  TrainConfig config = quick_config(60, 9);

  const std::vector<double> lambdas = {4e-3, 2e-4};  // deliberately unsorted
  const std::vector<RdPointSummary> points = sweep(img, lambdas, config, 2);
  REQUIRE(points.size() == 2);
  CHECK(points[0].lambda == 2e-4);
  CHECK(points[1].lambda == 4e-3);

  for (const RdPointSummary& p : points) {
    TrainConfig single = config;
    single.lambda = p.lambda;
    const EncodeResult one = encode_image(img, single);
    CHECK(p.bytes == static_cast<int64_t>(one.bitstream.size()));
    CHECK(p.bpp == doctest::Approx(one.bpp).epsilon(1e-12));
    CHECK(p.psnr_db == doctest::Approx(one.psnr_db).epsilon(1e-12));
    CHECK(p.ms_ssim == doctest::Approx(one.ms_ssim).epsilon(1e-12));
  }

  CHECK_THROWS_AS(sweep(img, {}, config, 1), ArgumentError);
  CHECK_THROWS_AS(sweep(img, {1e-3}, config, 0), ArgumentError);
}
