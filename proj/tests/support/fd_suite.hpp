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

#ifndef CCHC_TESTS_SUPPORT_FD_SUITE_HPP_
#define CCHC_TESTS_SUPPORT_FD_SUITE_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "support/testutil.hpp"

namespace cchc::test {

// Finite-difference sweep over every differentiable op.  Each op gets
// `per_op` random instances; inputs are nudged away from the few genuine
// non-smooth points (ReLU at 0, clamp edges, Laplace bin boundaries) where a
// central difference does not estimate the one-sided derivative.

namespace fd_detail {

inline ag::Tensor rand_tensor(std::vector<int> shape, double lo, double hi, Rng& rng) {
  return ag::Tensor::uniform(std::move(shape), lo, hi, rng, /*requires_grad=*/true);
}

// Keeps every entry at distance >= margin from the given special points.
inline void nudge_away(ag::Tensor& t, const std::vector<double>& points, double margin) {
  for (double& v : t.data())
    for (double p : points)
      if (std::abs(v - p) < margin) v = p + (v >= p ? margin : -margin);
}

// Scalarizes an output with fixed random weights so upstream gradients are
// non-uniform.
inline ag::Tensor weighted_sum(ag::Tape& tape, const ag::Tensor& t, Rng& rng) {
  std::vector<double> w(static_cast<size_t>(t.numel()));
  for (double& v : w) v = 2.0 * rng.next_unit() - 1.0;
  ag::Tensor weights = ag::Tensor::from_data(t.shape(), std::move(w));
  return ag::sum(tape, ag::mul(tape, t, weights));
}

struct OpCheck {
  std::string name;
  double worst = 0.0;
};

}  // namespace fd_detail

struct FdReport {
  double worst = 0.0;
  std::string worst_op;
  int instances = 0;
};

inline FdReport fd_suite(uint64_t seed, int per_op) {
  using fd_detail::nudge_away;
  using fd_detail::rand_tensor;
  Rng rng(seed);
  FdReport report;

  auto run = [&](const std::string& name, std::vector<ag::Tensor> inputs,
                 const std::function<ag::Tensor(ag::Tape&)>& build) {
    const double err = max_grad_rel_error(std::move(inputs), build);
    ++report.instances;
    if (err > report.worst) {
      report.worst = err;
      report.worst_op = name;
    }
  };

  for (int it = 0; it < per_op; ++it) {
    {
      ag::Tensor x = rand_tensor({3, 7}, -1.0, 1.0, rng);
      ag::Tensor w = rand_tensor({7, 5}, -1.0, 1.0, rng);
      ag::Tensor b = rand_tensor({5}, -1.0, 1.0, rng);
      Rng wr(rng.next_below(1u << 30));
      run("linear", {x, w, b}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::linear(t, x, w, b), r);
      });
    }
    {
      ag::Tensor x = rand_tensor({2, 5, 4}, -1.0, 1.0, rng);
      ag::Tensor k = rand_tensor({2, 2, 3, 3}, -1.0, 1.0, rng);
      ag::Tensor b = rand_tensor({2}, -1.0, 1.0, rng);
      Rng wr(rng.next_below(1u << 30));
      run("conv3x3", {x, k, b}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::conv3x3(t, x, k, b), r);
      });
    }
    {
      ag::Tensor x = rand_tensor({1, 4, 4}, -1.0, 1.0, rng);
      ag::Tensor k = rand_tensor({8, 8}, -1.0, 1.0, rng);
      Rng wr(rng.next_below(1u << 30));
      run("upsample2x", {x, k}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::upsample2x(t, x, k), r);
      });
    }
    {
      ag::Tensor x = rand_tensor({1, 6, 7}, -1.0, 1.0, rng);
      Rng wr(rng.next_below(1u << 30));
      run("crop2d", {x}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::crop2d(t, x, 4, 4), r);
      });
    }
    {
      ag::Tensor x = rand_tensor({3, 4}, -1.0, 1.0, rng);
      nudge_away(x, {0.0}, 0.01);
      Rng wr(rng.next_below(1u << 30));
      run("relu", {x}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::relu(t, x), r);
      });
    }
    {
      ag::Tensor a = rand_tensor({4, 3}, -1.0, 1.0, rng);
      ag::Tensor b = rand_tensor({4, 3}, -1.0, 1.0, rng);
      Rng wr(rng.next_below(1u << 30));
      run("add", {a, b}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::add(t, a, b), r);
      });
      Rng wr2(rng.next_below(1u << 30));
      run("sub", {a, b}, [=](ag::Tape& t) mutable {
        Rng r = wr2;
        return fd_detail::weighted_sum(t, ag::sub(t, a, b), r);
      });
      Rng wr3(rng.next_below(1u << 30));
      run("mul", {a, b}, [=](ag::Tape& t) mutable {
        Rng r = wr3;
        return fd_detail::weighted_sum(t, ag::mul(t, a, b), r);
      });
    }
    {
      ag::Tensor a = rand_tensor({5}, -1.0, 1.0, rng);
      ag::Tensor b = rand_tensor({5}, 0.4, 1.5, rng);
      Rng wr(rng.next_below(1u << 30));
      run("divide", {a, b}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::divide(t, a, b), r);
      });
    }
    {
      ag::Tensor a = rand_tensor({6}, -1.0, 1.0, rng);
      Rng wr(rng.next_below(1u << 30));
      run("add_scalar", {a}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::add_scalar(t, a, 0.7), r);
      });
      Rng wr2(rng.next_below(1u << 30));
      run("mul_scalar", {a}, [=](ag::Tape& t) mutable {
        Rng r = wr2;
        return fd_detail::weighted_sum(t, ag::mul_scalar(t, a, -1.3), r);
      });
    }
    {
      ag::Tensor a = rand_tensor({6}, 0.2, 1.2, rng);
      Rng wr(rng.next_below(1u << 30));
      run("pow_scalar", {a}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::pow_scalar(t, a, 2.5), r);
      });
    }
    {
      ag::Tensor a = rand_tensor({4, 5}, -1.0, 1.0, rng);
      run("sum", {a}, [=](ag::Tape& t) { return ag::sum(t, a); });
      run("mean", {a}, [=](ag::Tape& t) { return ag::mean(t, a); });
    }
    {
      ag::Tensor a = rand_tensor({6}, -3.0, 3.0, rng);
      Rng wr(rng.next_below(1u << 30));
      run("exp_clamp", {a}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::exp_clamp(t, a, -8.0, 8.0), r);
      });
    }
    {
      // Bin boundaries sit where value - mu = +/- 0.5; stay off them.
      ag::Tensor v = rand_tensor({8}, -1.6, 1.6, rng);
      ag::Tensor mu = rand_tensor({8}, -0.3, 0.3, rng);
      ag::Tensor b = rand_tensor({8}, 0.5, 2.0, rng);
      for (size_t i = 0; i < v.data().size(); ++i) {
        const double d = v.data()[i] - mu.data()[i];
        if (std::abs(std::abs(d) - 0.5) < 0.02)
          v.data()[i] += d >= 0 ? 0.04 : -0.04;
      }
      Rng wr(rng.next_below(1u << 30));
      run("laplace_rate_bits", {v, mu, b}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::laplace_rate_bits(t, v, mu, b), r);
      });
    }
    {
      ag::Tensor a = rand_tensor({3, 4, 5}, -1.0, 1.0, rng);
      Rng wr(rng.next_below(1u << 30));
      run("chw_to_nc", {a}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::chw_to_nc(t, a), r);
      });
    }
    {
      ag::Tensor a = rand_tensor({20, 3}, -1.0, 1.0, rng);
      Rng wr(rng.next_below(1u << 30));
      run("nc_to_chw", {a}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::nc_to_chw(t, a, 4, 5), r);
      });
    }
    {
      ag::Tensor p0 = rand_tensor({1, 4, 5}, -1.0, 1.0, rng);
      ag::Tensor p1 = rand_tensor({1, 4, 5}, -1.0, 1.0, rng);
      ag::Tensor p2 = rand_tensor({1, 4, 5}, -1.0, 1.0, rng);
      Rng wr(rng.next_below(1u << 30));
      run("concat_channels", {p0, p1, p2}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::concat_channels(t, {p0, p1, p2}), r);
      });
    }
    {
      ag::Tensor a = rand_tensor({6, 3}, -1.0, 1.0, rng);
      Rng wr(rng.next_below(1u << 30));
      run("slice_col", {a}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::slice_col(t, a, 1), r);
      });
    }
    {
      ag::Tensor a = rand_tensor({2, 3, 4}, -1.0, 1.0, rng);
      Rng wr(rng.next_below(1u << 30));
      run("flatten", {a}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::flatten(t, a), r);
      });
    }
    {
      ag::Tensor grid = rand_tensor({1, 5, 6}, -1.0, 1.0, rng);
      const std::vector<std::pair<int, int>> offsets = {
          {0, -1}, {-1, 0}, {-1, -1}, {-2, 1}};
      Rng wr(rng.next_below(1u << 30));
      run("gather_offsets", {grid}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::gather_offsets(t, grid, offsets), r);
      });
    }
    {
      ag::Tensor a = rand_tensor({2, 8, 8}, -1.0, 1.0, rng);
      const std::vector<double> k1d = {0.1, 0.2, 0.4, 0.2, 0.1};
      Rng wr(rng.next_below(1u << 30));
      run("filter_sep_valid", {a}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::filter_sep_valid(t, a, k1d), r);
      });
    }
    {
      ag::Tensor a = rand_tensor({2, 6, 6}, -1.0, 1.0, rng);
      Rng wr(rng.next_below(1u << 30));
      run("avgpool2", {a}, [=](ag::Tape& t) mutable {
        Rng r = wr;
        return fd_detail::weighted_sum(t, ag::avgpool2(t, a), r);
      });
    }
  }
  return report;
}

}  // namespace cchc::test

#endif  // CCHC_TESTS_SUPPORT_FD_SUITE_HPP_
