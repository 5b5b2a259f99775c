// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>

#include "scd/core/tensor.hpp"

namespace scd::net {

/// Square convolution with "same" padding (kernel / 2). Weights are laid
/// out out_channels x (in_channels * kernel * kernel), (c, ky, kx) order.
template <typename Scalar>
struct Conv2d {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  Matrix<Scalar> weight;
  Vector<Scalar> bias;
  bool trainable = true;

  Eigen::Index parameter_count() const { return weight.size() + bias.size(); }
};

inline int conv_out_size(int in, int kernel, int stride) {
  const int pad = kernel / 2;
  return (in + 2 * pad - kernel) / stride + 1;
}

/// Output columns [lo, hi) whose tap kx lands inside a row of `in` pixels.
inline std::pair<int, int> valid_columns(int out, int in, int kx, int pad, int stride) {
  int lo = 0;
  while (lo < out && lo * stride + kx - pad < 0) ++lo;
  int hi = out;
  while (hi > lo && (hi - 1) * stride + kx - pad >= in) --hi;
  return {lo, hi};
}

/// Unfolds receptive fields into columns: (C * k * k) x (Ho * Wo).
template <typename Scalar>
Matrix<Scalar> im2col(const Tensor<Scalar>& x, int kernel, int stride) {
  const int pad = kernel / 2;
  const int ho = conv_out_size(x.height, kernel, stride);
  const int wo = conv_out_size(x.width, kernel, stride);
  Matrix<Scalar> col(static_cast<Eigen::Index>(x.channels()) * kernel * kernel, static_cast<Eigen::Index>(ho) * wo);
  for (int c = 0; c < x.channels(); ++c) {
    const Scalar* src = x.data.row(c).data();
    for (int ky = 0; ky < kernel; ++ky)
      for (int kx = 0; kx < kernel; ++kx) {
        Scalar* dst = col.row((c * kernel + ky) * kernel + kx).data();
        const auto [lo, hi] = valid_columns(wo, x.width, kx, pad, stride);
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          Scalar* out = dst + static_cast<std::ptrdiff_t>(oy) * wo;
          if (iy < 0 || iy >= x.height) {
            std::fill(out, out + wo, Scalar(0));
            continue;
          }
          const Scalar* row = src + static_cast<std::ptrdiff_t>(iy) * x.width;
          const int shift = kx - pad;
          std::fill(out, out + lo, Scalar(0));
          if (stride == 1) {
            std::copy(row + lo + shift, row + hi + shift, out + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox) out[ox] = row[ox * stride + shift];
          }
          std::fill(out + hi, out + wo, Scalar(0));
        }
      }
  }
  return col;
}

/// Adjoint of im2col: scatters column gradients back onto a C x H x W tensor.
template <typename Scalar>
Tensor<Scalar> col2im(const Matrix<Scalar>& col, int channels, int height, int width, int kernel, int stride) {
  const int pad = kernel / 2;
  const int ho = conv_out_size(height, kernel, stride);
  const int wo = conv_out_size(width, kernel, stride);
  Tensor<Scalar> x(channels, height, width);
  for (int c = 0; c < channels; ++c) {
    Scalar* dst = x.data.row(c).data();
    for (int ky = 0; ky < kernel; ++ky)
      for (int kx = 0; kx < kernel; ++kx) {
        const Scalar* src = col.row((c * kernel + ky) * kernel + kx).data();
        const auto [lo, hi] = valid_columns(wo, width, kx, pad, stride);
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= height) continue;
          Scalar* row = dst + static_cast<std::ptrdiff_t>(iy) * width;
          const Scalar* in = src + static_cast<std::ptrdiff_t>(oy) * wo;
          const int shift = kx - pad;
          if (stride == 1) {
            for (int ox = lo; ox < hi; ++ox) row[ox + shift] += in[ox];
          } else {
            for (int ox = lo; ox < hi; ++ox) row[ox * stride + shift] += in[ox];
          }
        }
      }
  }
  return x;
}

/// Pre-activation output of a convolution.
template <typename Scalar>
Tensor<Scalar> conv_forward(const Conv2d<Scalar>& conv, const Tensor<Scalar>& x) {
  if (x.channels() != conv.in_channels)
    throw ShapeError(conv.name + ": expected " + std::to_string(conv.in_channels) + " input channels, got " +
                     std::to_string(x.channels()));
  Tensor<Scalar> y;
  y.height = conv_out_size(x.height, conv.kernel, conv.stride);
  y.width = conv_out_size(x.width, conv.kernel, conv.stride);
  if (conv.kernel == 1 && conv.stride == 1) {
    y.data.noalias() = conv.weight * x.data;
  } else {
    const Matrix<Scalar> col = im2col(x, conv.kernel, conv.stride);
    y.data.noalias() = conv.weight * col;
  }
  y.data.colwise() += conv.bias;
  return y;
}

template <typename Scalar>
void relu_inplace(Tensor<Scalar>& t) {
  t.data = t.data.cwiseMax(Scalar(0));
}

/// Nearest-neighbour x2 upsampling.
template <typename Scalar>
Tensor<Scalar> upsample2(const Tensor<Scalar>& x) {
  Tensor<Scalar> y(x.channels(), x.height * 2, x.width * 2);
  for (int c = 0; c < x.channels(); ++c) {
    const auto src = x.plane(c);
    auto dst = y.plane(c);
    for (int r = 0; r < y.height; ++r)
      for (int col = 0; col < y.width; ++col) dst(r, col) = src(r / 2, col / 2);
  }
  return y;
}

/// Adjoint of upsample2: each source cell collects its 2x2 block.
template <typename Scalar>
Tensor<Scalar> upsample2_backward(const Tensor<Scalar>& grad) {
  Tensor<Scalar> x(grad.channels(), grad.height / 2, grad.width / 2);
  for (int c = 0; c < grad.channels(); ++c) {
    const auto g = grad.plane(c);
    auto dst = x.plane(c);
    for (int r = 0; r < x.height; ++r)
      for (int col = 0; col < x.width; ++col)
        dst(r, col) = g(2 * r, 2 * col) + g(2 * r, 2 * col + 1) + g(2 * r + 1, 2 * col) + g(2 * r + 1, 2 * col + 1);
  }
  return x;
}

} // namespace scd::net
