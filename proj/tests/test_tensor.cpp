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

#include "cchc/laplace.hpp"
#include "cchc/tensor.hpp"
#include "doctest.h"
#include "support/fd_suite.hpp"
#include "support/testutil.hpp"

using namespace cchc;

TEST_CASE("linear matches hand-computed outputs") {
  ag::Tape tape;
  ag::Tensor x = ag::Tensor::from_data({1, 2}, {1.0, 2.0});
  ag::Tensor w_id = ag::Tensor::from_data({2, 2}, {1.0, 0.0, 0.0, 1.0});
  ag::Tensor b0 = ag::Tensor::from_data({2}, {0.0, 0.0});
  ag::Tensor y = ag::linear(tape, x, w_id, b0);
  CHECK(y.data()[0] == 1.0);
  CHECK(y.data()[1] == 2.0);

  ag::Tensor x2 = ag::Tensor::from_data({1, 2}, {1.0, 1.0});
  ag::Tensor w2 = ag::Tensor::from_data({2, 1}, {2.0, 3.0});
  ag::Tensor b2 = ag::Tensor::from_data({1}, {1.0});
  ag::Tensor y2 = ag::linear(tape, x2, w2, b2);
  CHECK(y2.data()[0] == 6.0);
}

TEST_CASE("linear 7-to-40 layer gradients match finite differences") {
  Rng rng(11);
  ag::Tensor x = ag::Tensor::uniform({3, 7}, -1.0, 1.0, rng, true);
  ag::Tensor w = ag::Tensor::uniform({7, 40}, -1.0, 1.0, rng, true);
  ag::Tensor b = ag::Tensor::uniform({40}, -1.0, 1.0, rng, true);
  const double err = test::max_grad_rel_error({x, w, b}, [&](ag::Tape& t) {
    return ag::sum(t, ag::linear(t, x, w, b));
  });
  CHECK(err < 1e-4);
}

TEST_CASE("conv3x3 identity kernel and border padding") {
  ag::Tape tape;
  Rng rng(3);
  ag::Tensor x = ag::Tensor::uniform({1, 4, 5}, -1.0, 1.0, rng);
  std::vector<double> delta(9, 0.0);
  delta[4] = 1.0;  // center tap
  ag::Tensor k = ag::Tensor::from_data({1, 1, 3, 3}, delta);
  ag::Tensor b = ag::Tensor::from_data({1}, {0.0});
  ag::Tensor y = ag::conv3x3(tape, x, k, b);
  for (size_t i = 0; i < x.data().size(); ++i) CHECK(y.data()[i] == x.data()[i]);

  // On a 1x1 input only the center tap is in bounds, so an all-ones kernel
  // returns the input value.
  ag::Tensor one = ag::Tensor::from_data({1, 1, 1}, {0.625});
  ag::Tensor ones = ag::Tensor::full({1, 1, 3, 3}, 1.0);
  ag::Tensor y1 = ag::conv3x3(tape, one, ones, b);
  CHECK(y1.data()[0] == 0.625);
}

TEST_CASE("conv3x3 gradients match finite differences") {
  Rng rng(5);
  ag::Tensor x = ag::Tensor::uniform({3, 8, 8}, -1.0, 1.0, rng, true);
  ag::Tensor k = ag::Tensor::uniform({3, 3, 3, 3}, -1.0, 1.0, rng, true);
  ag::Tensor b = ag::Tensor::uniform({3}, -1.0, 1.0, rng, true);
  const double err = test::max_grad_rel_error({x, k, b}, [&](ag::Tape& t) {
    return ag::sum(t, ag::conv3x3(t, x, k, b));
  });
  CHECK(err < 1e-4);
}

TEST_CASE("upsample2x doubles extents and is exact on zeros") {
  ag::Tape tape;
  Rng rng(7);
  ag::Tensor z = ag::Tensor::zeros({1, 3, 5});
  ag::Tensor k = ag::Tensor::uniform({8, 8}, -1.0, 1.0, rng);
  ag::Tensor y = ag::upsample2x(tape, z, k);
  CHECK(y.shape() == std::vector<int>{1, 6, 10});
  for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("upsample2x single pixel lays down polyphase taps") {
  // With one input pixel the output is the kernel split into its four
  // stride-2 phases, placed on the pixel's footprint and cropped.  Sum over
  // the output therefore equals the sum of the in-bounds taps.
  ag::Tape tape;
  Rng rng(9);
  ag::Tensor x = ag::Tensor::from_data({1, 1, 1}, {1.0});
  ag::Tensor k = ag::Tensor::uniform({8, 8}, -1.0, 1.0, rng);
  ag::Tensor y = ag::upsample2x(tape, x, k);
  CHECK(y.shape() == std::vector<int>{1, 2, 2});

  // Output sample (oy, ox) reads tap (oy+3, ox+3) for the single pixel
  // (p = q = 0): the 2x2 center of the kernel.
  for (int oy = 0; oy < 2; ++oy)
    for (int ox = 0; ox < 2; ++ox)
      CHECK(y.data()[static_cast<size_t>(oy * 2 + ox)] ==
            doctest::Approx(k.data()[static_cast<size_t>((oy + 3) * 8 + (ox + 3))])
                .epsilon(1e-12));
}

TEST_CASE("upsample2x kernel gradients match finite differences") {
  Rng rng(13);
  ag::Tensor x = ag::Tensor::uniform({1, 4, 4}, -1.0, 1.0, rng, true);
  ag::Tensor k = ag::Tensor::uniform({8, 8}, -1.0, 1.0, rng, true);
  const double err = test::max_grad_rel_error({x, k}, [&](ag::Tape& t) {
    return ag::sum(t, ag::upsample2x(t, x, k));
  });
  CHECK(err < 1e-4);
}

TEST_CASE("every differentiable op passes the finite-difference sweep") {
  const test::FdReport report = test::fd_suite(/*seed=*/1234, /*per_op=*/5);
  CHECK(report.instances >= 100);
  INFO("worst op: ", report.worst_op);
  CHECK(report.worst < 1e-3);
}

TEST_CASE("backward accumulates when a tensor feeds two paths") {
  Rng rng(17);
  ag::Tensor x = ag::Tensor::uniform({6}, 0.1, 1.0, rng, true);

  // Combined graph: f(x) + g(x).
  ag::Tape tape;
  ag::Tensor loss = ag::add(tape, ag::sum(tape, ag::mul(tape, x, x)),
                            ag::sum(tape, ag::mul_scalar(tape, x, 3.0)));
  x.zero_grad();
  tape.backward(loss);
  std::vector<double> combined = x.grad();

  // Separate graphs, gradients added by hand.
  ag::Tape t1;
  ag::Tensor l1 = ag::sum(t1, ag::mul(t1, x, x));
  x.zero_grad();
  t1.backward(l1);
  std::vector<double> g1 = x.grad();
  ag::Tape t2;
  ag::Tensor l2 = ag::sum(t2, ag::mul_scalar(t2, x, 3.0));
  x.zero_grad();
  t2.backward(l2);
  std::vector<double> g2 = x.grad();

  for (size_t i = 0; i < combined.size(); ++i)
    CHECK(combined[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-12));
}

TEST_CASE("forward passes are bit-identical across rebuilds") {
  Rng rng(19);
  ag::Tensor x = ag::Tensor::uniform({2, 6, 6}, -1.0, 1.0, rng);
  ag::Tensor k = ag::Tensor::uniform({2, 2, 3, 3}, -1.0, 1.0, rng);
  ag::Tensor b = ag::Tensor::uniform({2}, -1.0, 1.0, rng);
  ag::Tape t1, t2;
  ag::Tensor y1 = ag::conv3x3(t1, x, k, b);
  ag::Tensor y2 = ag::conv3x3(t2, x, k, b);
  CHECK(y1.data() == y2.data());
}

TEST_CASE("rounding ops pass gradients straight through") {
  Rng rng(23);
  ag::Tensor x = ag::Tensor::uniform({8}, -3.0, 3.0, rng, true);

  ag::Tape tape;
  ag::Tensor y = ag::quantize_ste(tape, x);
  for (size_t i = 0; i < y.data().size(); ++i) {
    CHECK(y.data()[i] == std::round(x.data()[i]));
  }
  x.zero_grad();
  tape.backward(ag::sum(tape, y));
  for (double g : x.grad()) CHECK(g == 1.0);

  ag::Tape t2;
  Rng noise(29);
  ag::Tensor yn = ag::quantize_noise(t2, x, noise);
  for (size_t i = 0; i < yn.data().size(); ++i) {
    CHECK(yn.data()[i] >= x.data()[i] - 0.5);
    CHECK(yn.data()[i] < x.data()[i] + 0.5);
  }
  x.zero_grad();
  t2.backward(ag::sum(t2, yn));
  for (double g : x.grad()) CHECK(g == 1.0);

  ag::Tape t3;
  ag::Tensor yc = ag::clamp01_ste(t3, x);
  for (size_t i = 0; i < yc.data().size(); ++i) {
    CHECK(yc.data()[i] == std::clamp(x.data()[i], 0.0, 1.0));
  }
  x.zero_grad();
  t3.backward(ag::sum(t3, yc));
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("hard rounding ties go away from zero") {
  ag::Tensor x = ag::Tensor::from_data({6}, {0.5, -0.5, 1.5, -1.5, 2.4, -2.4});
  ag::Tensor y = ag::quantize_hard(x);
  CHECK(y.data()[0] == 1.0);
  CHECK(y.data()[1] == -1.0);
  CHECK(y.data()[2] == 2.0);
  CHECK(y.data()[3] == -2.0);
  CHECK(y.data()[4] == 2.0);
  CHECK(y.data()[5] == -2.0);
}

TEST_CASE("bin rate is floored at 16 bits with zero gradient") {
  ag::Tensor v = ag::Tensor::from_data({1}, {200.0}, true);
  ag::Tensor mu = ag::Tensor::from_data({1}, {0.0}, true);
  ag::Tensor b = ag::Tensor::from_data({1}, {0.3}, true);
  ag::Tape tape;
  ag::Tensor bits = ag::laplace_rate_bits(tape, v, mu, b);
  CHECK(bits.data()[0] == 16.0);
  v.zero_grad();
  mu.zero_grad();
  b.zero_grad();
  tape.backward(ag::sum(tape, bits));
  CHECK(v.grad()[0] == 0.0);
  CHECK(mu.grad()[0] == 0.0);
  CHECK(b.grad()[0] == 0.0);
}

TEST_CASE("zero-centered unit-scale bin cost matches the closed form") {
  // mass(0; 0, 1) = 1 - exp(-1/2), so the cost is -log2 of that.
  const double expected = -std::log2(1.0 - std::exp(-0.5));
  CHECK(rate_bits(0, 0.0, 1.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(rate_bits(0, 0.0, 1.0) == doctest::Approx(1.3456).epsilon(1e-3));

  ag::Tape tape;
  ag::Tensor v = ag::Tensor::from_data({1}, {0.0});
  ag::Tensor mu = ag::Tensor::from_data({1}, {0.0});
  ag::Tensor b = ag::Tensor::from_data({1}, {1.0});
  ag::Tensor bits = ag::laplace_rate_bits(tape, v, mu, b);
  CHECK(bits.data()[0] == rate_bits(0, 0.0, 1.0));
}

TEST_CASE("graph rate term agrees with the scalar rate everywhere") {
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const double val = std::round(rng.next_uniform(-40.0, 40.0));
    const double mu = rng.next_uniform(-2.0, 2.0);
    const double b = std::exp(rng.next_uniform(-6.0, 3.0));
    ag::Tape tape;
    ag::Tensor vt = ag::Tensor::from_data({1}, {val});
    ag::Tensor mt = ag::Tensor::from_data({1}, {mu});
    ag::Tensor bt = ag::Tensor::from_data({1}, {b});
    ag::Tensor bits = ag::laplace_rate_bits(tape, vt, mt, bt);
    CHECK(bits.data()[0] == rate_bits(static_cast<int>(val), mu, b));
  }
}
