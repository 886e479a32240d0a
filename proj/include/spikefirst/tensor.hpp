// Copyright 2026 The spikefirst Authors
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

// Dense row-major tensors of doubles plus the handful of kernels the spiking
// networks need: GEMM, 2-D cross-correlation and non-overlapping pooling,
// each with its exact backward.

#ifndef SPIKEFIRST_TENSOR_HPP_
#define SPIKEFIRST_TENSOR_HPP_

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spikefirst/errors.hpp"

namespace spikefirst {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

  // Construction from external data: length must match and every value must
  // be finite.
  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
      throw DimensionError("tensor data length " +
                           std::to_string(data_.size()) +
                           " does not match shape " + shape_str(shape_));
    }
    for (double x : data_) {
      if (!std::isfinite(x)) {
        throw ParameterError("tensor data contains a non-finite value");
      }
    }
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t m = rows.size();
    const std::size_t n = m ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(m * n);
    for (const auto& row : rows) {
      if (row.size() != n) throw DimensionError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({m, n}, std::move(data));
  }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  template <typename... Idx>
  double& at(Idx... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... Idx>
  double at(Idx... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  // Reinterprets the same data under a new shape of equal element count.
  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size()) {
      throw DimensionError("cannot reshape " + shape_str(shape_) + " to " +
                           shape_str(shape));
    }
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  double sum() const {
    double s = 0.0;
    for (double x : data_) s += x;
    return s;
  }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    require_same_shape(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Tensor& operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(Tensor a, double s) { return a *= s; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  void require_same_shape(const Tensor& o, const char* what) const {
    if (shape_ != o.shape_) {
      throw DimensionError(std::string(what) + ": shape " + shape_str(shape_) +
                           " vs " + shape_str(o.shape_));
    }
  }

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != shape_.size()) {
      throw IndexError("index rank " + std::to_string(idx.size()) +
                       " != tensor rank " + std::to_string(shape_.size()));
    }
    std::size_t off = 0;
    std::size_t d = 0;
    for (std::size_t i : idx) {
      if (i >= shape_[d]) throw IndexError("tensor index out of range");
      off = off * shape_[d] + i;
      ++d;
    }
    return off;
  }

  Shape shape_;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// GEMM

namespace detail {
using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;
}  // namespace detail

// c[m x n] (+)= op(a) * op(b), all row-major. op(a) is m x k, op(b) is k x n.
inline void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                 std::size_t k, const double* a, const double* b, double* c,
                 bool accumulate) {
  using detail::ConstMap;
  using detail::MutMap;
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  MutMap C(c, M, N);
  if (!accumulate) C.setZero();
  if (m == 0 || n == 0 || k == 0) return;
  if (!trans_a && !trans_b) {
    C.noalias() += ConstMap(a, M, K) * ConstMap(b, K, N);
  } else if (!trans_a && trans_b) {
    C.noalias() += ConstMap(a, M, K) * ConstMap(b, N, K).transpose();
  } else if (trans_a && !trans_b) {
    C.noalias() += ConstMap(a, K, M).transpose() * ConstMap(b, K, N);
  } else {
    C.noalias() +=
        ConstMap(a, K, M).transpose() * ConstMap(b, N, K).transpose();
  }
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul expects rank-2 operands, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul inner dimensions differ: " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Tensor c({a.dim(0), b.dim(1)});
  gemm(false, false, a.dim(0), b.dim(1), a.dim(1), a.raw(), b.raw(), c.raw(),
       false);
  return c;
}

// ---------------------------------------------------------------------------
// Convolution (cross-correlation, zero padding)

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 0, height = 0, width = 0;
  std::size_t out_channels = 0, kernel_h = 0, kernel_w = 0;
  std::size_t stride = 1, pad = 0;
  std::size_t out_h = 0, out_w = 0;

  std::size_t patch() const { return in_channels * kernel_h * kernel_w; }
  std::size_t out_plane() const { return out_h * out_w; }
};

inline std::size_t conv_out_extent(std::size_t in, std::size_t k,
                                   std::size_t stride, std::size_t pad) {
  if (stride == 0) throw ShapeError("conv stride must be positive");
  const std::size_t padded = in + 2 * pad;
  if (k == 0 || k > padded || (padded - k) % stride != 0) {
    throw ShapeError("conv output extent is not a positive integer (in=" +
                     std::to_string(in) + ", k=" + std::to_string(k) +
                     ", stride=" + std::to_string(stride) +
                     ", pad=" + std::to_string(pad) + ")");
  }
  return (padded - k) / stride + 1;
}

// Accepts input as [C x H x W] or batched [N x C x H x W].
inline ConvGeometry conv_geometry(const Shape& input, const Shape& kernel,
                                  std::size_t stride, std::size_t pad) {
  if (kernel.size() != 4) {
    throw DimensionError("conv kernel must be [Co x Ci x Kh x Kw], got " +
                         shape_str(kernel));
  }
  ConvGeometry g;
  if (input.size() == 3) {
    g.batch = 1;
    g.in_channels = input[0];
    g.height = input[1];
    g.width = input[2];
  } else if (input.size() == 4) {
    g.batch = input[0];
    g.in_channels = input[1];
    g.height = input[2];
    g.width = input[3];
  } else {
    throw DimensionError("conv input must be rank 3 or 4, got " +
                         shape_str(input));
  }
  if (kernel[1] != g.in_channels) {
    throw DimensionError("conv channel mismatch: input " + shape_str(input) +
                         ", kernel " + shape_str(kernel));
  }
  g.out_channels = kernel[0];
  g.kernel_h = kernel[2];
  g.kernel_w = kernel[3];
  g.stride = stride;
  g.pad = pad;
  g.out_h = conv_out_extent(g.height, g.kernel_h, stride, pad);
  g.out_w = conv_out_extent(g.width, g.kernel_w, stride, pad);
  return g;
}

namespace detail {

// cols is [patch x (batch * out_plane)], column = n * out_plane + p.
inline void im2col(const ConvGeometry& g, const double* input, double* cols) {
  const std::size_t np = g.batch * g.out_plane();
  const std::size_t in_plane = g.height * g.width;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
      for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
        const std::size_t row = (c * g.kernel_h + kh) * g.kernel_w + kw;
        double* dst = cols + row * np;
        for (std::size_t n = 0; n < g.batch; ++n) {
          const double* src = input + (n * g.in_channels + c) * in_plane;
          for (std::size_t oh = 0; oh < g.out_h; ++oh) {
            const std::ptrdiff_t ih =
                static_cast<std::ptrdiff_t>(oh * g.stride + kh) -
                static_cast<std::ptrdiff_t>(g.pad);
            for (std::size_t ow = 0; ow < g.out_w; ++ow) {
              const std::ptrdiff_t iw =
                  static_cast<std::ptrdiff_t>(ow * g.stride + kw) -
                  static_cast<std::ptrdiff_t>(g.pad);
              const bool inside =
                  ih >= 0 && iw >= 0 &&
                  ih < static_cast<std::ptrdiff_t>(g.height) &&
                  iw < static_cast<std::ptrdiff_t>(g.width);
              *dst++ = inside ? src[ih * static_cast<std::ptrdiff_t>(g.width) + iw]
                              : 0.0;
            }
          }
        }
      }
    }
  }
}

inline void col2im(const ConvGeometry& g, const double* cols, double* input) {
  const std::size_t np = g.batch * g.out_plane();
  const std::size_t in_plane = g.height * g.width;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
      for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
        const std::size_t row = (c * g.kernel_h + kh) * g.kernel_w + kw;
        const double* src = cols + row * np;
        for (std::size_t n = 0; n < g.batch; ++n) {
          double* dst = input + (n * g.in_channels + c) * in_plane;
          for (std::size_t oh = 0; oh < g.out_h; ++oh) {
            const std::ptrdiff_t ih =
                static_cast<std::ptrdiff_t>(oh * g.stride + kh) -
                static_cast<std::ptrdiff_t>(g.pad);
            for (std::size_t ow = 0; ow < g.out_w; ++ow, ++src) {
              const std::ptrdiff_t iw =
                  static_cast<std::ptrdiff_t>(ow * g.stride + kw) -
                  static_cast<std::ptrdiff_t>(g.pad);
              if (ih >= 0 && iw >= 0 &&
                  ih < static_cast<std::ptrdiff_t>(g.height) &&
                  iw < static_cast<std::ptrdiff_t>(g.width)) {
                dst[ih * static_cast<std::ptrdiff_t>(g.width) + iw] += *src;
              }
            }
          }
        }
      }
    }
  }
}

// [Co x N*P] <-> [N x Co x P]
inline void channel_major_to_batch_major(const ConvGeometry& g,
                                         const double* src, double* dst) {
  const std::size_t p = g.out_plane();
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      std::copy_n(src + (co * g.batch + n) * p, p,
                  dst + (n * g.out_channels + co) * p);
    }
  }
}

inline void batch_major_to_channel_major(const ConvGeometry& g,
                                         const double* src, double* dst) {
  const std::size_t p = g.out_plane();
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      std::copy_n(src + (n * g.out_channels + co) * p, p,
                  dst + (co * g.batch + n) * p);
    }
  }
}

}  // namespace detail

// Output is [Co x O_H x O_W] for a rank-3 input, [N x Co x O_H x O_W] for a
// rank-4 input.
inline Tensor conv2d(const Tensor& input, const Tensor& kernel,
                     std::size_t stride, std::size_t pad) {
  const ConvGeometry g = conv_geometry(input.shape(), kernel.shape(), stride, pad);
  const std::size_t np = g.batch * g.out_plane();
  std::vector<double> cols(g.patch() * np);
  detail::im2col(g, input.raw(), cols.data());
  std::vector<double> out_cm(g.out_channels * np);
  gemm(false, false, g.out_channels, np, g.patch(), kernel.raw(), cols.data(),
       out_cm.data(), false);
  Shape out_shape = input.rank() == 3
                        ? Shape{g.out_channels, g.out_h, g.out_w}
                        : Shape{g.batch, g.out_channels, g.out_h, g.out_w};
  Tensor out(std::move(out_shape));
  detail::channel_major_to_batch_major(g, out_cm.data(), out.raw());
  return out;
}

struct ConvGrads {
  Tensor grad_input;
  Tensor grad_kernel;
};

inline ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input,
                                 const Tensor& kernel, std::size_t stride,
                                 std::size_t pad, bool need_input_grad = true) {
  const ConvGeometry g = conv_geometry(input.shape(), kernel.shape(), stride, pad);
  const Shape expected = input.rank() == 3
                             ? Shape{g.out_channels, g.out_h, g.out_w}
                             : Shape{g.batch, g.out_channels, g.out_h, g.out_w};
  if (grad_out.shape() != expected) {
    throw DimensionError("conv2d_backward: grad_out " +
                         shape_str(grad_out.shape()) + ", expected " +
                         shape_str(expected));
  }
  const std::size_t np = g.batch * g.out_plane();
  std::vector<double> dout_cm(g.out_channels * np);
  detail::batch_major_to_channel_major(g, grad_out.raw(), dout_cm.data());

  std::vector<double> cols(g.patch() * np);
  detail::im2col(g, input.raw(), cols.data());

  ConvGrads grads;
  grads.grad_kernel = Tensor(kernel.shape());
  gemm(false, true, g.out_channels, g.patch(), np, dout_cm.data(), cols.data(),
       grads.grad_kernel.raw(), false);

  grads.grad_input = Tensor(input.shape());
  if (need_input_grad) {
    // Reuse the column buffer for d(cols).
    gemm(true, false, g.patch(), np, g.out_channels, kernel.raw(),
         dout_cm.data(), cols.data(), false);
    detail::col2im(g, cols.data(), grads.grad_input.raw());
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Pooling (non-overlapping, window x window)

enum class PoolMode { kAverage, kMax };

struct PoolResult {
  Tensor output;
  // Flat input index of the selected element for each output (max mode).
  std::vector<std::size_t> argmax;
};

inline PoolResult pool2d(const Tensor& input, std::size_t window, PoolMode mode) {
  if (input.rank() < 2) {
    throw DimensionError("pool2d expects at least [H x W], got " +
                         shape_str(input.shape()));
  }
  if (window == 0) throw ShapeError("pool window must be positive");
  const std::size_t h = input.dim(input.rank() - 2);
  const std::size_t w = input.dim(input.rank() - 1);
  if (h % window != 0 || w % window != 0) {
    throw ShapeError("pool window " + std::to_string(window) +
                     " does not divide spatial dims " + shape_str(input.shape()));
  }
  const std::size_t oh = h / window, ow = w / window;
  const std::size_t planes = input.size() / (h * w);
  Shape out_shape = input.shape();
  out_shape[out_shape.size() - 2] = oh;
  out_shape[out_shape.size() - 1] = ow;
  PoolResult res{Tensor(out_shape), {}};
  if (mode == PoolMode::kMax) res.argmax.resize(res.output.size());
  const double inv_area = 1.0 / static_cast<double>(window * window);
  const double* in = input.raw();
  double* out = res.output.raw();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const std::size_t o = (p * oh + i) * ow + j;
        if (mode == PoolMode::kAverage) {
          double s = 0.0;
          for (std::size_t a = 0; a < window; ++a) {
            for (std::size_t b = 0; b < window; ++b) {
              s += in[(p * h + i * window + a) * w + j * window + b];
            }
          }
          out[o] = s * inv_area;
        } else {
          std::size_t best = (p * h + i * window) * w + j * window;
          for (std::size_t a = 0; a < window; ++a) {
            for (std::size_t b = 0; b < window; ++b) {
              const std::size_t idx = (p * h + i * window + a) * w + j * window + b;
              if (in[idx] > in[best]) best = idx;
            }
          }
          out[o] = in[best];
          res.argmax[o] = best;
        }
      }
    }
  }
  return res;
}

inline Tensor pool2d_backward(const Tensor& grad_out, const Shape& input_shape,
                              std::size_t window, PoolMode mode,
                              std::span<const std::size_t> argmax = {}) {
  if (input_shape.size() < 2 || window == 0) {
    throw DimensionError("pool2d_backward: bad input shape or window");
  }
  const std::size_t h = input_shape[input_shape.size() - 2];
  const std::size_t w = input_shape[input_shape.size() - 1];
  if (h % window != 0 || w % window != 0) {
    throw ShapeError("pool2d_backward: window does not divide input");
  }
  const std::size_t oh = h / window, ow = w / window;
  if (grad_out.size() * window * window != shape_numel(input_shape)) {
    throw DimensionError("pool2d_backward: grad_out " +
                         shape_str(grad_out.shape()) + " vs input " +
                         shape_str(input_shape));
  }
  Tensor grad_in(input_shape);
  const double* g = grad_out.raw();
  double* gi = grad_in.raw();
  if (mode == PoolMode::kMax) {
    if (argmax.size() != grad_out.size()) {
      throw DimensionError("pool2d_backward: argmax indices missing");
    }
    for (std::size_t o = 0; o < grad_out.size(); ++o) gi[argmax[o]] += g[o];
    return grad_in;
  }
  const std::size_t planes = grad_in.size() / (h * w);
  const double inv_area = 1.0 / static_cast<double>(window * window);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const double v = g[(p * oh + i) * ow + j] * inv_area;
        for (std::size_t a = 0; a < window; ++a) {
          for (std::size_t b = 0; b < window; ++b) {
            gi[(p * h + i * window + a) * w + j * window + b] = v;
          }
        }
      }
    }
  }
  return grad_in;
}

}  // namespace spikefirst

#endif  // SPIKEFIRST_TENSOR_HPP_
