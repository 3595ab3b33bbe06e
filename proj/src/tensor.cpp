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

#include "cchc/tensor.hpp"

#include <cmath>
#include <cstring>

#include "cchc/errors.hpp"
#include "cchc/laplace.hpp"

namespace cchc::ag {

namespace {

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::shared_ptr<TensorNode> make_node(std::vector<int> shape, bool requires_grad) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data.assign(static_cast<size_t>(shape_numel(node->shape)), 0.0);
  node->requires_grad = requires_grad;
  return node;
}

void check(bool cond, const char* msg) {
  if (!cond) throw ArgumentError(msg);
}

// Round half away from zero, the convention used for all latent quantization.
inline double round_away(double v) { return std::round(v); }

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return Tensor(make_node(std::move(shape), requires_grad));
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  Tensor t(make_node(std::move(shape), requires_grad));
  for (auto& v : t.data()) v = value;
  return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data,
                         bool requires_grad) {
  check(shape_numel(shape) == static_cast<int64_t>(data.size()),
        "from_data: shape does not match data length");
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(node);
}

Tensor Tensor::uniform(std::vector<int> shape, double lo, double hi, Rng& rng,
                       bool requires_grad) {
  Tensor t(make_node(std::move(shape), requires_grad));
  for (auto& v : t.data()) v = rng.next_uniform(lo, hi);
  return t;
}

void Tape::backward(const Tensor& loss) {
  check(loss.numel() == 1, "backward: loss must be a scalar");
  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

// ---------------------------------------------------------------------------

namespace kernels {

void linear_fwd(const double* in, int n, int ci, const double* w, int co,
                const double* b, double* out) {
  for (int r = 0; r < n; ++r) {
    const double* x = in + static_cast<int64_t>(r) * ci;
    double* y = out + static_cast<int64_t>(r) * co;
    for (int j = 0; j < co; ++j) y[j] = b[j];
    for (int i = 0; i < ci; ++i) {
      const double xi = x[i];
      const double* wr = w + static_cast<int64_t>(i) * co;
      for (int j = 0; j < co; ++j) y[j] += xi * wr[j];
    }
  }
}

// Shifted-row accumulation; each (o,c,dy,dx) tap is one contiguous pass.
void conv3x3_fwd(const double* in, int c, int h, int w, const double* k, int co,
                 const double* b, double* out) {
  const int64_t plane = static_cast<int64_t>(h) * w;
  for (int o = 0; o < co; ++o) {
    double* op = out + o * plane;
    for (int64_t i = 0; i < plane; ++i) op[i] = b[o];
    for (int ci = 0; ci < c; ++ci) {
      const double* ip = in + ci * plane;
      const double* kt = k + (static_cast<int64_t>(o) * c + ci) * 9;
      for (int dy = 0; dy < 3; ++dy) {
        const int sy = dy - 1;
        for (int dx = 0; dx < 3; ++dx) {
          const int sx = dx - 1;
          const double kv = kt[dy * 3 + dx];
          if (kv == 0.0) continue;
          const int x0 = sx < 0 ? -sx : 0;
          const int x1 = sx > 0 ? w - sx : w;
          for (int y = 0; y < h; ++y) {
            const int iy = y + sy;
            if (iy < 0 || iy >= h) continue;
            double* orow = op + static_cast<int64_t>(y) * w;
            const double* irow = ip + static_cast<int64_t>(iy) * w + sx;
            for (int x = x0; x < x1; ++x) orow[x] += kv * irow[x];
          }
        }
      }
    }
  }
}

void upsample2x_fwd(const double* in, int h, int w, const double* k, double* out) {
  const int oh = 2 * h, ow = 2 * w;
  for (int oy = 0; oy < oh; ++oy) {
    double* orow = out + static_cast<int64_t>(oy) * ow;
    const int phi = (oy + 3) >> 1;
    for (int ox = 0; ox < ow; ++ox) {
      const int qhi = (ox + 3) >> 1;
      double acc = 0.0;
      for (int p = phi; p > phi - 4; --p) {
        if (p < 0 || p >= h) continue;
        const int i = oy + 3 - 2 * p;
        if (i < 0 || i > 7) continue;
        const double* irow = in + static_cast<int64_t>(p) * w;
        const double* krow = k + i * 8;
        for (int q = qhi; q > qhi - 4; --q) {
          if (q < 0 || q >= w) continue;
          const int j = ox + 3 - 2 * q;
          if (j < 0 || j > 7) continue;
          acc += irow[q] * krow[j];
        }
      }
      orow[ox] = acc;
    }
  }
}

}  // namespace kernels

// ---------------------------------------------------------------------------

Tensor linear(Tape& tape, const Tensor& in, const Tensor& w, const Tensor& b) {
  check(in.shape().size() == 2 && w.shape().size() == 2 && b.shape().size() == 1,
        "linear: rank mismatch");
  const int n = in.dim(0), ci = in.dim(1), co = w.dim(1);
  check(w.dim(0) == ci && b.dim(0) == co, "linear: dimension mismatch");

  Tensor out = Tensor::zeros({n, co}, in.requires_grad() || w.requires_grad() ||
                                          b.requires_grad());
  kernels::linear_fwd(in.data().data(), n, ci, w.data().data(), co,
                      b.data().data(), out.data().data());

  if (out.requires_grad()) {
    auto in_n = in.node_ptr(), w_n = w.node_ptr(), b_n = b.node_ptr(),
         out_n = out.node_ptr();
    tape.record([in_n, w_n, b_n, out_n, n, ci, co]() {
      out_n->ensure_grad();
      const double* gy = out_n->grad.data();
      if (in_n->requires_grad) {
        in_n->ensure_grad();
        double* gx = in_n->grad.data();
        const double* wd = w_n->data.data();
        for (int r = 0; r < n; ++r) {
          const double* gyr = gy + static_cast<int64_t>(r) * co;
          double* gxr = gx + static_cast<int64_t>(r) * ci;
          for (int i = 0; i < ci; ++i) {
            const double* wr = wd + static_cast<int64_t>(i) * co;
            double acc = 0.0;
            for (int j = 0; j < co; ++j) acc += gyr[j] * wr[j];
            gxr[i] += acc;
          }
        }
      }
      if (w_n->requires_grad) {
        w_n->ensure_grad();
        double* gw = w_n->grad.data();
        const double* xd = in_n->data.data();
        for (int r = 0; r < n; ++r) {
          const double* xr = xd + static_cast<int64_t>(r) * ci;
          const double* gyr = gy + static_cast<int64_t>(r) * co;
          for (int i = 0; i < ci; ++i) {
            const double xi = xr[i];
            double* gwr = gw + static_cast<int64_t>(i) * co;
            for (int j = 0; j < co; ++j) gwr[j] += xi * gyr[j];
          }
        }
      }
      if (b_n->requires_grad) {
        b_n->ensure_grad();
        double* gb = b_n->grad.data();
        for (int r = 0; r < n; ++r) {
          const double* gyr = gy + static_cast<int64_t>(r) * co;
          for (int j = 0; j < co; ++j) gb[j] += gyr[j];
        }
      }
    });
  }
  return out;
}

Tensor conv3x3(Tape& tape, const Tensor& in, const Tensor& k, const Tensor& b) {
  check(in.shape().size() == 3 && k.shape().size() == 4, "conv3x3: rank mismatch");
  const int c = in.dim(0), h = in.dim(1), w = in.dim(2), co = k.dim(0);
  check(k.dim(1) == c && k.dim(2) == 3 && k.dim(3) == 3 && b.dim(0) == co,
        "conv3x3: channel mismatch");

  Tensor out = Tensor::zeros({co, h, w}, in.requires_grad() || k.requires_grad() ||
                                             b.requires_grad());
  kernels::conv3x3_fwd(in.data().data(), c, h, w, k.data().data(), co,
                       b.data().data(), out.data().data());

  if (out.requires_grad()) {
    auto in_n = in.node_ptr(), k_n = k.node_ptr(), b_n = b.node_ptr(),
         out_n = out.node_ptr();
    tape.record([in_n, k_n, b_n, out_n, c, h, w, co]() {
      out_n->ensure_grad();
      const double* gy = out_n->grad.data();
      const int64_t plane = static_cast<int64_t>(h) * w;
      if (in_n->requires_grad) {
        in_n->ensure_grad();
        double* gx = in_n->grad.data();
        const double* kd = k_n->data.data();
        for (int o = 0; o < co; ++o) {
          const double* gyp = gy + o * plane;
          for (int ci = 0; ci < c; ++ci) {
            double* gxp = gx + ci * plane;
            const double* kt = kd + (static_cast<int64_t>(o) * c + ci) * 9;
            for (int dy = 0; dy < 3; ++dy) {
              const int sy = dy - 1;
              for (int dx = 0; dx < 3; ++dx) {
                const int sx = dx - 1;
                const double kv = kt[dy * 3 + dx];
                if (kv == 0.0) continue;
                const int x0 = sx < 0 ? -sx : 0;
                const int x1 = sx > 0 ? w - sx : w;
                for (int y = 0; y < h; ++y) {
                  const int iy = y + sy;
                  if (iy < 0 || iy >= h) continue;
                  const double* gyr = gyp + static_cast<int64_t>(y) * w;
                  double* gxr = gxp + static_cast<int64_t>(iy) * w + sx;
                  for (int x = x0; x < x1; ++x) gxr[x] += kv * gyr[x];
                }
              }
            }
          }
        }
      }
      if (k_n->requires_grad) {
        k_n->ensure_grad();
        double* gk = k_n->grad.data();
        const double* xd = in_n->data.data();
        for (int o = 0; o < co; ++o) {
          const double* gyp = gy + o * plane;
          for (int ci = 0; ci < c; ++ci) {
            const double* xp = xd + ci * plane;
            double* gkt = gk + (static_cast<int64_t>(o) * c + ci) * 9;
            for (int dy = 0; dy < 3; ++dy) {
              const int sy = dy - 1;
              for (int dx = 0; dx < 3; ++dx) {
                const int sx = dx - 1;
                const int x0 = sx < 0 ? -sx : 0;
                const int x1 = sx > 0 ? w - sx : w;
                double acc = 0.0;
                for (int y = 0; y < h; ++y) {
                  const int iy = y + sy;
                  if (iy < 0 || iy >= h) continue;
                  const double* gyr = gyp + static_cast<int64_t>(y) * w;
                  const double* xr = xp + static_cast<int64_t>(iy) * w + sx;
                  for (int x = x0; x < x1; ++x) acc += gyr[x] * xr[x];
                }
                gkt[dy * 3 + dx] += acc;
              }
            }
          }
        }
      }
      if (b_n->requires_grad) {
        b_n->ensure_grad();
        double* gb = b_n->grad.data();
        for (int o = 0; o < co; ++o) {
          const double* gyp = gy + o * plane;
          double acc = 0.0;
          for (int64_t i = 0; i < plane; ++i) acc += gyp[i];
          gb[o] += acc;
        }
      }
    });
  }
  return out;
}

Tensor upsample2x(Tape& tape, const Tensor& in, const Tensor& k) {
  check(in.shape().size() == 3 && in.dim(0) == 1, "upsample2x: input must be [1,h,w]");
  check(k.shape().size() == 2 && k.dim(0) == 8 && k.dim(1) == 8,
        "upsample2x: kernel must be 8x8");
  const int h = in.dim(1), w = in.dim(2);

  Tensor out = Tensor::zeros({1, 2 * h, 2 * w}, in.requires_grad() || k.requires_grad());
  kernels::upsample2x_fwd(in.data().data(), h, w, k.data().data(), out.data().data());

  if (out.requires_grad()) {
    auto in_n = in.node_ptr(), k_n = k.node_ptr(), out_n = out.node_ptr();
    tape.record([in_n, k_n, out_n, h, w]() {
      out_n->ensure_grad();
      const double* gy = out_n->grad.data();
      const int oh = 2 * h, ow = 2 * w;
      if (in_n->requires_grad) {
        in_n->ensure_grad();
        double* gx = in_n->grad.data();
        const double* kd = k_n->data.data();
        for (int p = 0; p < h; ++p) {
          for (int q = 0; q < w; ++q) {
            double acc = 0.0;
            for (int i = 0; i < 8; ++i) {
              const int oy = 2 * p + i - 3;
              if (oy < 0 || oy >= oh) continue;
              const double* gyr = gy + static_cast<int64_t>(oy) * ow;
              const double* krow = kd + i * 8;
              for (int j = 0; j < 8; ++j) {
                const int ox = 2 * q + j - 3;
                if (ox < 0 || ox >= ow) continue;
                acc += krow[j] * gyr[ox];
              }
            }
            gx[static_cast<int64_t>(p) * w + q] += acc;
          }
        }
      }
      if (k_n->requires_grad) {
        k_n->ensure_grad();
        double* gk = k_n->grad.data();
        const double* xd = in_n->data.data();
        for (int i = 0; i < 8; ++i) {
          for (int j = 0; j < 8; ++j) {
            double acc = 0.0;
            for (int p = 0; p < h; ++p) {
              const int oy = 2 * p + i - 3;
              if (oy < 0 || oy >= oh) continue;
              const double* gyr = gy + static_cast<int64_t>(oy) * ow;
              const double* xr = xd + static_cast<int64_t>(p) * w;
              for (int q = 0; q < w; ++q) {
                const int ox = 2 * q + j - 3;
                if (ox < 0 || ox >= ow) continue;
                acc += xr[q] * gyr[ox];
              }
            }
            gk[i * 8 + j] += acc;
          }
        }
      }
    });
  }
  return out;
}

Tensor crop2d(Tape& tape, const Tensor& in, int th, int tw) {
  check(in.shape().size() == 3 && in.dim(0) == 1, "crop2d: input must be [1,h,w]");
  const int h = in.dim(1), w = in.dim(2);
  check(th >= 1 && tw >= 1 && th <= h && tw <= w, "crop2d: target exceeds input");
  const int y0 = (h - th) / 2, x0 = (w - tw) / 2;

  Tensor out = Tensor::zeros({1, th, tw}, in.requires_grad());
  for (int y = 0; y < th; ++y)
    std::memcpy(out.data().data() + static_cast<int64_t>(y) * tw,
                in.data().data() + static_cast<int64_t>(y + y0) * w + x0,
                sizeof(double) * static_cast<size_t>(tw));

  if (out.requires_grad()) {
    auto in_n = in.node_ptr(), out_n = out.node_ptr();
    tape.record([in_n, out_n, th, tw, w, y0, x0]() {
      out_n->ensure_grad();
      in_n->ensure_grad();
      const double* gy = out_n->grad.data();
      double* gx = in_n->grad.data();
      for (int y = 0; y < th; ++y) {
        const double* gyr = gy + static_cast<int64_t>(y) * tw;
        double* gxr = gx + static_cast<int64_t>(y + y0) * w + x0;
        for (int x = 0; x < tw; ++x) gxr[x] += gyr[x];
      }
    });
  }
  return out;
}

namespace {

// Elementwise op plumbing shared by relu/add/mul/...
Tensor unary_out(const Tensor& a) {
  return Tensor::zeros(a.shape(), a.requires_grad());
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  check(a.shape() == b.shape(), who);
}

}  // namespace

Tensor relu(Tape& tape, const Tensor& in) {
  Tensor out = unary_out(in);
  const int64_t n = in.numel();
  const double* x = in.data().data();
  double* y = out.data().data();
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  if (out.requires_grad()) {
    auto in_n = in.node_ptr(), out_n = out.node_ptr();
    tape.record([in_n, out_n, n]() {
      out_n->ensure_grad();
      in_n->ensure_grad();
      const double* gy = out_n->grad.data();
      const double* x = in_n->data.data();
      double* gx = in_n->grad.data();
      for (int64_t i = 0; i < n; ++i)
        if (x[i] > 0.0) gx[i] += gy[i];
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add: shape mismatch");
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad() || b.requires_grad());
  const int64_t n = a.numel();
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* y = out.data().data();
  for (int64_t i = 0; i < n; ++i) y[i] = ad[i] + bd[i];
  if (out.requires_grad()) {
    auto a_n = a.node_ptr(), b_n = b.node_ptr(), out_n = out.node_ptr();
    tape.record([a_n, b_n, out_n, n]() {
      out_n->ensure_grad();
      const double* gy = out_n->grad.data();
      if (a_n->requires_grad) {
        a_n->ensure_grad();
        double* ga = a_n->grad.data();
        for (int64_t i = 0; i < n; ++i) ga[i] += gy[i];
      }
      if (b_n->requires_grad) {
        b_n->ensure_grad();
        double* gb = b_n->grad.data();
        for (int64_t i = 0; i < n; ++i) gb[i] += gy[i];
      }
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub: shape mismatch");
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad() || b.requires_grad());
  const int64_t n = a.numel();
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* y = out.data().data();
  for (int64_t i = 0; i < n; ++i) y[i] = ad[i] - bd[i];
  if (out.requires_grad()) {
    auto a_n = a.node_ptr(), b_n = b.node_ptr(), out_n = out.node_ptr();
    tape.record([a_n, b_n, out_n, n]() {
      out_n->ensure_grad();
      const double* gy = out_n->grad.data();
      if (a_n->requires_grad) {
        a_n->ensure_grad();
        double* ga = a_n->grad.data();
        for (int64_t i = 0; i < n; ++i) ga[i] += gy[i];
      }
      if (b_n->requires_grad) {
        b_n->ensure_grad();
        double* gb = b_n->grad.data();
        for (int64_t i = 0; i < n; ++i) gb[i] -= gy[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul: shape mismatch");
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad() || b.requires_grad());
  const int64_t n = a.numel();
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* y = out.data().data();
  for (int64_t i = 0; i < n; ++i) y[i] = ad[i] * bd[i];
  if (out.requires_grad()) {
    auto a_n = a.node_ptr(), b_n = b.node_ptr(), out_n = out.node_ptr();
    tape.record([a_n, b_n, out_n, n]() {
      out_n->ensure_grad();
      const double* gy = out_n->grad.data();
      if (a_n->requires_grad) {
        a_n->ensure_grad();
        double* ga = a_n->grad.data();
        const double* bd = b_n->data.data();
        for (int64_t i = 0; i < n; ++i) ga[i] += gy[i] * bd[i];
      }
      if (b_n->requires_grad) {
        b_n->ensure_grad();
        double* gb = b_n->grad.data();
        const double* ad = a_n->data.data();
        for (int64_t i = 0; i < n; ++i) gb[i] += gy[i] * ad[i];
      }
    });
  }
  return out;
}

Tensor divide(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "divide: shape mismatch");
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad() || b.requires_grad());
  const int64_t n = a.numel();
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* y = out.data().data();
  for (int64_t i = 0; i < n; ++i) y[i] = ad[i] / bd[i];
  if (out.requires_grad()) {
    auto a_n = a.node_ptr(), b_n = b.node_ptr(), out_n = out.node_ptr();
    tape.record([a_n, b_n, out_n, n]() {
      out_n->ensure_grad();
      const double* gy = out_n->grad.data();
      const double* ad = a_n->data.data();
      const double* bd = b_n->data.data();
      if (a_n->requires_grad) {
        a_n->ensure_grad();
        double* ga = a_n->grad.data();
        for (int64_t i = 0; i < n; ++i) ga[i] += gy[i] / bd[i];
      }
      if (b_n->requires_grad) {
        b_n->ensure_grad();
        double* gb = b_n->grad.data();
        for (int64_t i = 0; i < n; ++i)
          gb[i] -= gy[i] * ad[i] / (bd[i] * bd[i]);
      }
    });
  }
  return out;
}

Tensor add_scalar(Tape& tape, const Tensor& a, double c) {
  Tensor out = unary_out(a);
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[static_cast<size_t>(i)] = a.data()[static_cast<size_t>(i)] + c;
  if (out.requires_grad()) {
    auto a_n = a.node_ptr(), out_n = out.node_ptr();
    tape.record([a_n, out_n, n]() {
      out_n->ensure_grad();
      a_n->ensure_grad();
      for (int64_t i = 0; i < n; ++i) a_n->grad[static_cast<size_t>(i)] += out_n->grad[static_cast<size_t>(i)];
    });
  }
  return out;
}

Tensor mul_scalar(Tape& tape, const Tensor& a, double c) {
  Tensor out = unary_out(a);
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[static_cast<size_t>(i)] = a.data()[static_cast<size_t>(i)] * c;
  if (out.requires_grad()) {
    auto a_n = a.node_ptr(), out_n = out.node_ptr();
    tape.record([a_n, out_n, n, c]() {
      out_n->ensure_grad();
      a_n->ensure_grad();
      for (int64_t i = 0; i < n; ++i) a_n->grad[static_cast<size_t>(i)] += c * out_n->grad[static_cast<size_t>(i)];
    });
  }
  return out;
}

Tensor pow_scalar(Tape& tape, const Tensor& a, double e) {
  Tensor out = unary_out(a);
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i)
    out.data()[static_cast<size_t>(i)] = std::pow(a.data()[static_cast<size_t>(i)], e);
  if (out.requires_grad()) {
    auto a_n = a.node_ptr(), out_n = out.node_ptr();
    tape.record([a_n, out_n, n, e]() {
      out_n->ensure_grad();
      a_n->ensure_grad();
      for (int64_t i = 0; i < n; ++i) {
        const size_t s = static_cast<size_t>(i);
        const double base = std::max(a_n->data[s], 1e-12);
        a_n->grad[s] += out_n->grad[s] * e * std::pow(base, e - 1.0);
      }
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& a) {
  Tensor out = Tensor::zeros({1}, a.requires_grad());
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  out.data()[0] = acc;
  if (out.requires_grad()) {
    auto a_n = a.node_ptr(), out_n = out.node_ptr();
    tape.record([a_n, out_n]() {
      out_n->ensure_grad();
      a_n->ensure_grad();
      const double g = out_n->grad[0];
      for (auto& v : a_n->grad) v += g;
    });
  }
  return out;
}

Tensor mean(Tape& tape, const Tensor& a) {
  Tensor out = Tensor::zeros({1}, a.requires_grad());
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  // Divide (not multiply by a reciprocal): the mean of a constant map is then
  // exact, e.g. a map of ones averages to 1.0 bit-exactly.
  const double n = static_cast<double>(a.numel());
  out.data()[0] = acc / n;
  if (out.requires_grad()) {
    auto a_n = a.node_ptr(), out_n = out.node_ptr();
    tape.record([a_n, out_n, n]() {
      out_n->ensure_grad();
      a_n->ensure_grad();
      const double g = out_n->grad[0] / n;
      for (auto& v : a_n->grad) v += g;
    });
  }
  return out;
}

Tensor clamp01_ste(Tape& tape, const Tensor& in) {
  Tensor out = unary_out(in);
  const int64_t n = in.numel();
  const double* x = in.data().data();
  double* y = out.data().data();
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] < 0.0 ? 0.0 : (x[i] > 1.0 ? 1.0 : x[i]);
  if (out.requires_grad()) {
    auto in_n = in.node_ptr(), out_n = out.node_ptr();
    tape.record([in_n, out_n, n]() {
      out_n->ensure_grad();
      in_n->ensure_grad();
      for (int64_t i = 0; i < n; ++i) in_n->grad[static_cast<size_t>(i)] += out_n->grad[static_cast<size_t>(i)];
    });
  }
  return out;
}

Tensor quantize_noise(Tape& tape, const Tensor& in, Rng& rng) {
  Tensor out = unary_out(in);
  const int64_t n = in.numel();
  const double* x = in.data().data();
  double* y = out.data().data();
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] + (rng.next_unit() - 0.5);
  if (out.requires_grad()) {
    auto in_n = in.node_ptr(), out_n = out.node_ptr();
    tape.record([in_n, out_n, n]() {
      out_n->ensure_grad();
      in_n->ensure_grad();
      for (int64_t i = 0; i < n; ++i) in_n->grad[static_cast<size_t>(i)] += out_n->grad[static_cast<size_t>(i)];
    });
  }
  return out;
}

Tensor quantize_ste(Tape& tape, const Tensor& in) {
  Tensor out = unary_out(in);
  const int64_t n = in.numel();
  const double* x = in.data().data();
  double* y = out.data().data();
  for (int64_t i = 0; i < n; ++i) y[i] = round_away(x[i]);
  if (out.requires_grad()) {
    auto in_n = in.node_ptr(), out_n = out.node_ptr();
    tape.record([in_n, out_n, n]() {
      out_n->ensure_grad();
      in_n->ensure_grad();
      for (int64_t i = 0; i < n; ++i) in_n->grad[static_cast<size_t>(i)] += out_n->grad[static_cast<size_t>(i)];
    });
  }
  return out;
}

Tensor quantize_hard(const Tensor& in) {
  Tensor out = Tensor::zeros(in.shape(), false);
  const int64_t n = in.numel();
  for (int64_t i = 0; i < n; ++i)
    out.data()[static_cast<size_t>(i)] = round_away(in.data()[static_cast<size_t>(i)]);
  return out;
}

Tensor exp_clamp(Tape& tape, const Tensor& in, double lo, double hi) {
  Tensor out = unary_out(in);
  const int64_t n = in.numel();
  const double* x = in.data().data();
  double* y = out.data().data();
  for (int64_t i = 0; i < n; ++i)
    y[i] = std::exp(x[i] < lo ? lo : (x[i] > hi ? hi : x[i]));
  if (out.requires_grad()) {
    auto in_n = in.node_ptr(), out_n = out.node_ptr();
    tape.record([in_n, out_n, n, lo, hi]() {
      out_n->ensure_grad();
      in_n->ensure_grad();
      const double* x = in_n->data.data();
      const double* y = out_n->data.data();
      const double* gy = out_n->grad.data();
      double* gx = in_n->grad.data();
      for (int64_t i = 0; i < n; ++i)
        if (x[i] > lo && x[i] < hi) gx[i] += gy[i] * y[i];
    });
  }
  return out;
}

namespace {

struct LaplaceBin {
  double p;        // unfloored bin mass
  double dp_dv;    // d p / d value
  double dp_db;    // d p / d scale
};

// Bin mass (shared closed form, see laplace.hpp) plus its derivatives:
// dp/dv = pdf(v-mu+0.5) - pdf(v-mu-0.5), dp/db from differentiating the CDF.
LaplaceBin laplace_bin(double v, double mu, double b) {
  const double up = v - mu + 0.5;
  const double um = v - mu - 0.5;
  LaplaceBin r;
  r.p = laplace_bin_mass(v, mu, b);
  const double pdf_up = std::exp(-std::abs(up) / b) / (2.0 * b);
  const double pdf_um = std::exp(-std::abs(um) / b) / (2.0 * b);
  r.dp_dv = pdf_up - pdf_um;
  r.dp_db = (-up * pdf_up + um * pdf_um) / b;
  return r;
}

}  // namespace

Tensor laplace_rate_bits(Tape& tape, const Tensor& value, const Tensor& mu,
                         const Tensor& scale) {
  check_same_shape(value, mu, "laplace_rate_bits: shape mismatch");
  check_same_shape(value, scale, "laplace_rate_bits: shape mismatch");
  Tensor out = Tensor::zeros(value.shape(), value.requires_grad() ||
                                                mu.requires_grad() ||
                                                scale.requires_grad());
  const int64_t n = value.numel();
  const double* v = value.data().data();
  const double* m = mu.data().data();
  const double* s = scale.data().data();
  double* y = out.data().data();
  for (int64_t i = 0; i < n; ++i) {
    if (!(s[i] > 0.0)) throw ArgumentError("laplace_rate_bits: scale must be positive");
    y[i] = rate_bits(v[i], m[i], s[i]);
  }
  if (out.requires_grad()) {
    auto v_n = value.node_ptr(), m_n = mu.node_ptr(), s_n = scale.node_ptr(),
         out_n = out.node_ptr();
    tape.record([v_n, m_n, s_n, out_n, n]() {
      out_n->ensure_grad();
      const double* gy = out_n->grad.data();
      const double* v = v_n->data.data();
      const double* m = m_n->data.data();
      const double* s = s_n->data.data();
      if (v_n->requires_grad) v_n->ensure_grad();
      if (m_n->requires_grad) m_n->ensure_grad();
      if (s_n->requires_grad) s_n->ensure_grad();
      constexpr double kInvLn2 = 1.4426950408889634;
      for (int64_t i = 0; i < n; ++i) {
        const LaplaceBin bin = laplace_bin(v[i], m[i], s[i]);
        if (bin.p <= kProbFloor || bin.p >= 1.0) continue;  // flat region
        const double dbits_dp = -kInvLn2 / bin.p;
        const double g = gy[i] * dbits_dp;
        if (v_n->requires_grad) v_n->grad[static_cast<size_t>(i)] += g * bin.dp_dv;
        if (m_n->requires_grad) m_n->grad[static_cast<size_t>(i)] -= g * bin.dp_dv;
        if (s_n->requires_grad) s_n->grad[static_cast<size_t>(i)] += g * bin.dp_db;
      }
    });
  }
  return out;
}

Tensor chw_to_nc(Tape& tape, const Tensor& in) {
  check(in.shape().size() == 3, "chw_to_nc: rank mismatch");
  const int c = in.dim(0);
  const int64_t plane = static_cast<int64_t>(in.dim(1)) * in.dim(2);
  Tensor out = Tensor::zeros({static_cast<int>(plane), c}, in.requires_grad());
  const double* x = in.data().data();
  double* y = out.data().data();
  for (int ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < plane; ++i) y[i * c + ch] = x[ch * plane + i];
  if (out.requires_grad()) {
    auto in_n = in.node_ptr(), out_n = out.node_ptr();
    tape.record([in_n, out_n, c, plane]() {
      out_n->ensure_grad();
      in_n->ensure_grad();
      const double* gy = out_n->grad.data();
      double* gx = in_n->grad.data();
      for (int ch = 0; ch < c; ++ch)
        for (int64_t i = 0; i < plane; ++i) gx[ch * plane + i] += gy[i * c + ch];
    });
  }
  return out;
}

Tensor nc_to_chw(Tape& tape, const Tensor& in, int h, int w) {
  check(in.shape().size() == 2, "nc_to_chw: rank mismatch");
  const int c = in.dim(1);
  const int64_t plane = static_cast<int64_t>(h) * w;
  check(plane == in.dim(0), "nc_to_chw: pixel count mismatch");
  Tensor out = Tensor::zeros({c, h, w}, in.requires_grad());
  const double* x = in.data().data();
  double* y = out.data().data();
  for (int ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < plane; ++i) y[ch * plane + i] = x[i * c + ch];
  if (out.requires_grad()) {
    auto in_n = in.node_ptr(), out_n = out.node_ptr();
    tape.record([in_n, out_n, c, plane]() {
      out_n->ensure_grad();
      in_n->ensure_grad();
      const double* gy = out_n->grad.data();
      double* gx = in_n->grad.data();
      for (int ch = 0; ch < c; ++ch)
        for (int64_t i = 0; i < plane; ++i) gx[i * c + ch] += gy[ch * plane + i];
    });
  }
  return out;
}

Tensor concat_channels(Tape& tape, const std::vector<Tensor>& parts) {
  check(!parts.empty(), "concat_channels: empty input");
  const int h = parts[0].dim(1), w = parts[0].dim(2);
  bool rg = false;
  for (const Tensor& p : parts) {
    check(p.shape().size() == 3 && p.dim(0) == 1 && p.dim(1) == h && p.dim(2) == w,
          "concat_channels: parts must share [1,h,w] shape");
    rg = rg || p.requires_grad();
  }
  const int c = static_cast<int>(parts.size());
  const int64_t plane = static_cast<int64_t>(h) * w;
  Tensor out = Tensor::zeros({c, h, w}, rg);
  for (int ch = 0; ch < c; ++ch)
    std::memcpy(out.data().data() + ch * plane, parts[static_cast<size_t>(ch)].data().data(),
                sizeof(double) * static_cast<size_t>(plane));
  if (rg) {
    std::vector<std::shared_ptr<TensorNode>> part_nodes;
    part_nodes.reserve(parts.size());
    for (const Tensor& p : parts) part_nodes.push_back(p.node_ptr());
    auto out_n = out.node_ptr();
    tape.record([part_nodes, out_n, plane]() {
      out_n->ensure_grad();
      const double* gy = out_n->grad.data();
      for (size_t ch = 0; ch < part_nodes.size(); ++ch) {
        if (!part_nodes[ch]->requires_grad) continue;
        part_nodes[ch]->ensure_grad();
        double* gp = part_nodes[ch]->grad.data();
        const double* src = gy + static_cast<int64_t>(ch) * plane;
        for (int64_t i = 0; i < plane; ++i) gp[i] += src[i];
      }
    });
  }
  return out;
}

Tensor slice_col(Tape& tape, const Tensor& in, int col) {
  check(in.shape().size() == 2, "slice_col: rank mismatch");
  const int n = in.dim(0), c = in.dim(1);
  check(col >= 0 && col < c, "slice_col: column out of range");
  Tensor out = Tensor::zeros({n}, in.requires_grad());
  for (int i = 0; i < n; ++i)
    out.data()[static_cast<size_t>(i)] = in.data()[static_cast<size_t>(i) * c + col];
  if (out.requires_grad()) {
    auto in_n = in.node_ptr(), out_n = out.node_ptr();
    tape.record([in_n, out_n, n, c, col]() {
      out_n->ensure_grad();
      in_n->ensure_grad();
      for (int i = 0; i < n; ++i)
        in_n->grad[static_cast<size_t>(i) * c + col] += out_n->grad[static_cast<size_t>(i)];
    });
  }
  return out;
}

Tensor flatten(Tape& tape, const Tensor& in) {
  Tensor out = Tensor::zeros({static_cast<int>(in.numel())}, in.requires_grad());
  out.data() = in.data();
  if (out.requires_grad()) {
    auto in_n = in.node_ptr(), out_n = out.node_ptr();
    tape.record([in_n, out_n]() {
      out_n->ensure_grad();
      in_n->ensure_grad();
      for (size_t i = 0; i < in_n->grad.size(); ++i) in_n->grad[i] += out_n->grad[i];
    });
  }
  return out;
}

Tensor gather_offsets(Tape& tape, const Tensor& grid,
                      const std::vector<std::pair<int, int>>& offsets) {
  check(grid.shape().size() >= 2, "gather_offsets: rank mismatch");
  const int h = grid.dim(static_cast<int>(grid.shape().size()) - 2);
  const int w = grid.dim(static_cast<int>(grid.shape().size()) - 1);
  const int k = static_cast<int>(offsets.size());
  const int64_t n = static_cast<int64_t>(h) * w;
  Tensor out = Tensor::zeros({static_cast<int>(n), k}, grid.requires_grad());
  const double* g = grid.data().data();
  double* y = out.data().data();
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      double* row = y + (static_cast<int64_t>(yy) * w + xx) * k;
      for (int i = 0; i < k; ++i) {
        const int sy = yy + offsets[static_cast<size_t>(i)].first;
        const int sx = xx + offsets[static_cast<size_t>(i)].second;
        row[i] = (sy >= 0 && sy < h && sx >= 0 && sx < w)
                     ? g[static_cast<int64_t>(sy) * w + sx]
                     : 0.0;
      }
    }
  }
  if (out.requires_grad()) {
    auto grid_n = grid.node_ptr(), out_n = out.node_ptr();
    auto offs = offsets;
    tape.record([grid_n, out_n, offs, h, w, k]() {
      out_n->ensure_grad();
      grid_n->ensure_grad();
      const double* gy = out_n->grad.data();
      double* gg = grid_n->grad.data();
      for (int yy = 0; yy < h; ++yy) {
        for (int xx = 0; xx < w; ++xx) {
          const double* row = gy + (static_cast<int64_t>(yy) * w + xx) * k;
          for (int i = 0; i < k; ++i) {
            const int sy = yy + offs[static_cast<size_t>(i)].first;
            const int sx = xx + offs[static_cast<size_t>(i)].second;
            if (sy >= 0 && sy < h && sx >= 0 && sx < w)
              gg[static_cast<int64_t>(sy) * w + sx] += row[i];
          }
        }
      }
    });
  }
  return out;
}

Tensor filter_sep_valid(Tape& tape, const Tensor& in, const std::vector<double>& k1d) {
  check(in.shape().size() == 3, "filter_sep_valid: rank mismatch");
  const int c = in.dim(0), h = in.dim(1), w = in.dim(2);
  const int t = static_cast<int>(k1d.size());
  check(h >= t && w >= t, "filter_sep_valid: input smaller than kernel");
  const int oh = h - t + 1, ow = w - t + 1;
  Tensor out = Tensor::zeros({c, oh, ow}, in.requires_grad());
  const double* x = in.data().data();
  double* y = out.data().data();
  std::vector<double> tmp(static_cast<size_t>(h) * ow);
  for (int ch = 0; ch < c; ++ch) {
    const double* xp = x + static_cast<int64_t>(ch) * h * w;
    // rows pass
    for (int yy = 0; yy < h; ++yy) {
      const double* xr = xp + static_cast<int64_t>(yy) * w;
      double* tr = tmp.data() + static_cast<int64_t>(yy) * ow;
      for (int xx = 0; xx < ow; ++xx) {
        double acc = 0.0;
        for (int j = 0; j < t; ++j) acc += xr[xx + j] * k1d[static_cast<size_t>(j)];
        tr[xx] = acc;
      }
    }
    // cols pass
    double* yp = y + static_cast<int64_t>(ch) * oh * ow;
    for (int yy = 0; yy < oh; ++yy) {
      double* yr = yp + static_cast<int64_t>(yy) * ow;
      for (int xx = 0; xx < ow; ++xx) yr[xx] = 0.0;
      for (int i = 0; i < t; ++i) {
        const double kv = k1d[static_cast<size_t>(i)];
        const double* tr = tmp.data() + static_cast<int64_t>(yy + i) * ow;
        for (int xx = 0; xx < ow; ++xx) yr[xx] += kv * tr[xx];
      }
    }
  }
  if (out.requires_grad()) {
    auto in_n = in.node_ptr(), out_n = out.node_ptr();
    auto kern = k1d;
    tape.record([in_n, out_n, kern, c, h, w, oh, ow]() {
      out_n->ensure_grad();
      in_n->ensure_grad();
      const int t = static_cast<int>(kern.size());
      const double* gy = out_n->grad.data();
      double* gx = in_n->grad.data();
      std::vector<double> gtmp(static_cast<size_t>(h) * ow);
      for (int ch = 0; ch < c; ++ch) {
        const double* gyp = gy + static_cast<int64_t>(ch) * oh * ow;
        std::fill(gtmp.begin(), gtmp.end(), 0.0);
        for (int yy = 0; yy < oh; ++yy) {
          const double* gyr = gyp + static_cast<int64_t>(yy) * ow;
          for (int i = 0; i < t; ++i) {
            const double kv = kern[static_cast<size_t>(i)];
            double* tr = gtmp.data() + static_cast<int64_t>(yy + i) * ow;
            for (int xx = 0; xx < ow; ++xx) tr[xx] += kv * gyr[xx];
          }
        }
        double* gxp = gx + static_cast<int64_t>(ch) * h * w;
        for (int yy = 0; yy < h; ++yy) {
          const double* tr = gtmp.data() + static_cast<int64_t>(yy) * ow;
          double* gxr = gxp + static_cast<int64_t>(yy) * w;
          for (int xx = 0; xx < ow; ++xx) {
            const double gv = tr[xx];
            if (gv == 0.0) continue;
            for (int j = 0; j < t; ++j) gxr[xx + j] += gv * kern[static_cast<size_t>(j)];
          }
        }
      }
    });
  }
  return out;
}

Tensor avgpool2(Tape& tape, const Tensor& in) {
  check(in.shape().size() == 3, "avgpool2: rank mismatch");
  const int c = in.dim(0), h = in.dim(1), w = in.dim(2);
  const int oh = h / 2, ow = w / 2;
  check(oh >= 1 && ow >= 1, "avgpool2: input too small");
  Tensor out = Tensor::zeros({c, oh, ow}, in.requires_grad());
  const double* x = in.data().data();
  double* y = out.data().data();
  for (int ch = 0; ch < c; ++ch) {
    const double* xp = x + static_cast<int64_t>(ch) * h * w;
    double* yp = y + static_cast<int64_t>(ch) * oh * ow;
    for (int yy = 0; yy < oh; ++yy) {
      const double* r0 = xp + static_cast<int64_t>(2 * yy) * w;
      const double* r1 = r0 + w;
      double* yr = yp + static_cast<int64_t>(yy) * ow;
      for (int xx = 0; xx < ow; ++xx)
        yr[xx] = 0.25 * (r0[2 * xx] + r0[2 * xx + 1] + r1[2 * xx] + r1[2 * xx + 1]);
    }
  }
  if (out.requires_grad()) {
    auto in_n = in.node_ptr(), out_n = out.node_ptr();
    tape.record([in_n, out_n, c, h, w, oh, ow]() {
      out_n->ensure_grad();
      in_n->ensure_grad();
      const double* gy = out_n->grad.data();
      double* gx = in_n->grad.data();
      for (int ch = 0; ch < c; ++ch) {
        const double* gyp = gy + static_cast<int64_t>(ch) * oh * ow;
        double* gxp = gx + static_cast<int64_t>(ch) * h * w;
        for (int yy = 0; yy < oh; ++yy) {
          const double* gyr = gyp + static_cast<int64_t>(yy) * ow;
          double* r0 = gxp + static_cast<int64_t>(2 * yy) * w;
          double* r1 = r0 + w;
          for (int xx = 0; xx < ow; ++xx) {
            const double g = 0.25 * gyr[xx];
            r0[2 * xx] += g;
            r0[2 * xx + 1] += g;
            r1[2 * xx] += g;
            r1[2 * xx + 1] += g;
          }
        }
      }
    });
  }
  return out;
}

}  // namespace cchc::ag
