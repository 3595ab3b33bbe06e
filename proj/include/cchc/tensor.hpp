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

#ifndef CCHC_TENSOR_HPP_
#define CCHC_TENSOR_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "cchc/rng.hpp"

namespace cchc::ag {

// Dense row-major value grid with an optional gradient buffer of equal length.
struct TensorNode {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  // Backward accumulates into grad; a fresh buffer starts at zero.
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

// Shared handle; ops hand these around by value.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor uniform(std::vector<int> shape, double lo, double hi, Rng& rng,
                        bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return node_->numel(); }
  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& grad() { node_->ensure_grad(); return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }
  void zero_grad() { if (node_) node_->grad.assign(node_->data.size(), 0.0); }
  TensorNode* node() const { return node_.get(); }
  std::shared_ptr<TensorNode> node_ptr() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

// Define-by-run tape, rebuilt every iteration. Replaying in reverse visits
// each recorded op exactly once; every backward step accumulates (adds) into
// input gradients and never overwrites them.
class Tape {
 public:
  void record(std::function<void()> backward_step) {
    steps_.push_back(std::move(backward_step));
  }
  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse.
  void backward(const Tensor& loss);
  void clear() { steps_.clear(); }
  size_t size() const { return steps_.size(); }

 private:
  std::vector<std::function<void()>> steps_;
};

enum class QuantMode { kNoise, kSte, kHard };

// -- Operator set ------------------------------------------------------------
// All ops record onto the tape only when some input requires a gradient.

// out[n,j] = sum_i in[n,i]*w[i,j] + b[j].   in:[N,Ci] w:[Ci,Co] b:[Co]
Tensor linear(Tape& tape, const Tensor& in, const Tensor& w, const Tensor& b);

// 3x3 convolution, zero padding 1, spatial size preserved.
// in:[C,H,W] k:[Co,C,3,3] b:[Co] -> [Co,H,W]
Tensor conv3x3(Tape& tape, const Tensor& in, const Tensor& k, const Tensor& b);

// Stride-2 transposed convolution with an 8x8 kernel; the full output
// (2h+6, 2w+6) is center-cropped to exactly (2h, 2w).  in:[1,h,w] k:[8,8]
Tensor upsample2x(Tape& tape, const Tensor& in, const Tensor& k);

// Center crop to (th, tw); offset (h-th)/2 per axis.
Tensor crop2d(Tape& tape, const Tensor& in, int th, int tw);

Tensor relu(Tape& tape, const Tensor& in);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor divide(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add_scalar(Tape& tape, const Tensor& a, double c);
Tensor mul_scalar(Tape& tape, const Tensor& a, double c);
// pow with constant exponent; base expected nonnegative.
Tensor pow_scalar(Tape& tape, const Tensor& a, double e);
Tensor sum(Tape& tape, const Tensor& a);   // -> [1]
Tensor mean(Tape& tape, const Tensor& a);  // -> [1]

// Forward clamps to [0,1]; backward passes gradients straight through so a
// saturated output does not kill training.
Tensor clamp01_ste(Tape& tape, const Tensor& in);

// value + fresh Uniform(-0.5,0.5) noise per element; identity gradient.
Tensor quantize_noise(Tape& tape, const Tensor& in, Rng& rng);
// round-to-nearest forward (ties away from zero), identity gradient.
Tensor quantize_ste(Tape& tape, const Tensor& in);
// plain rounding, no gradient path.
Tensor quantize_hard(const Tensor& in);

// exp(clamp(x, lo, hi)); gradient zero where the clamp is active.
Tensor exp_clamp(Tape& tape, const Tensor& in, double lo, double hi);

// Code length of integer-bin Laplace mass around each value:
// bits = -log2(max(CdfL(v+.5) - CdfL(v-.5), 2^-16)) with mean mu, scale b.
Tensor laplace_rate_bits(Tape& tape, const Tensor& value, const Tensor& mu,
                         const Tensor& scale);

// [C,H,W] -> [H*W, C] (pixels as rows) and back.
Tensor chw_to_nc(Tape& tape, const Tensor& in);
Tensor nc_to_chw(Tape& tape, const Tensor& in, int h, int w);

// Stack single-channel [1,H,W] tensors into [C,H,W].
Tensor concat_channels(Tape& tape, const std::vector<Tensor>& parts);

Tensor slice_col(Tape& tape, const Tensor& in, int col);  // [N,C] -> [N]
Tensor flatten(Tape& tape, const Tensor& in);             // -> [N]

// Gathers per-row neighborhoods: out[n,k] = grid[y+dy_k, x+dx_k] or 0 when out
// of bounds, n = y*w + x.  offsets must be strictly causal for codec use.
Tensor gather_offsets(Tape& tape, const Tensor& grid,
                      const std::vector<std::pair<int, int>>& offsets);

// Separable valid-mode filtering with a fixed (non-trained) 1D kernel applied
// along both axes.  [C,H,W] -> [C,H-t+1,W-t+1]
Tensor filter_sep_valid(Tape& tape, const Tensor& in, const std::vector<double>& k1d);

// 2x2 average pooling, stride 2, trailing odd row/col dropped.
Tensor avgpool2(Tape& tape, const Tensor& in);

// -- Shared raw kernels (also used by the tape-free decode path) -------------
namespace kernels {
void linear_fwd(const double* in, int n, int ci, const double* w, int co,
                const double* b, double* out);
void conv3x3_fwd(const double* in, int c, int h, int w, const double* k, int co,
                 const double* b, double* out);
void upsample2x_fwd(const double* in, int h, int w, const double* k8x8, double* out);
}  // namespace kernels

}  // namespace cchc::ag

#endif  // CCHC_TENSOR_HPP_
