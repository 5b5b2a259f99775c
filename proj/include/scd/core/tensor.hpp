// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "scd/core/error.hpp"

namespace scd {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Single-channel H x W raster, row-major.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Multi-channel raster stored planar: one row of `data` per channel,
/// pixel (r, c) of channel k lives at data(k, r * width + c).
/// The layout makes a 3x3 convolution a single GEMM after im2col.
template <typename Scalar>
struct Tensor {
  int height = 0;
  int width = 0;
  Matrix<Scalar> data;

  Tensor() = default;
  Tensor(int channels, int h, int w) : height(h), width(w), data(Matrix<Scalar>::Zero(channels, h * w)) {}

  int channels() const { return static_cast<int>(data.rows()); }
  Eigen::Index pixels() const { return static_cast<Eigen::Index>(height) * width; }

  Scalar& operator()(int channel, int row, int col) { return data(channel, row * width + col); }
  Scalar operator()(int channel, int row, int col) const { return data(channel, row * width + col); }

  /// View of one channel as an H x W plane.
  Eigen::Map<Plane<Scalar>> plane(int channel) {
    return Eigen::Map<Plane<Scalar>>(data.row(channel).data(), height, width);
  }
  Eigen::Map<const Plane<Scalar>> plane(int channel) const {
    return Eigen::Map<const Plane<Scalar>>(data.row(channel).data(), height, width);
  }

  bool same_shape(const Tensor& other) const {
    return height == other.height && width == other.width && channels() == other.channels();
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out;
    out.height = height;
    out.width = width;
    out.data = data.template cast<Other>();
    return out;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.same_shape(b) && a.data == b.data;
  }
};

/// Color image, intensities in [0, 1].
using Raster = Tensor<float>;

inline std::string shape_string(int channels, int height, int width) {
  return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

template <typename Scalar>
std::string shape_string(const Tensor<Scalar>& t) {
  return shape_string(t.channels(), t.height, t.width);
}

} // namespace scd
