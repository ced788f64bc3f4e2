// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "cslkit/mac_counter.hpp"
#include "cslkit/tensor.hpp"

// Primitive layer forward passes and their vector-Jacobian products.
//
// Only the convolutions touch the MacCounter; bias, affine, activation, pooling,
// resizing, concat and add are free under the cost model.

namespace csl::ops {

enum class Padding { same, valid };
enum class PoolKind { max, avg };

const char* to_string(Padding p);
const char* to_string(PoolKind k);

/// Output extent along one axis. "same" pads symmetrically with the odd pixel
/// going to the bottom/right.
struct AxisGeometry {
  std::size_t out = 0;
  std::size_t pad_before = 0;
  std::size_t pad_after = 0;
};
AxisGeometry conv_axis(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding);

// Weights are (K, K, C, N).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride, Padding padding,
                 MacCounter* counter = nullptr, std::string_view layer = "conv2d");

// Weights are (K, K, C, multiplier); output channel c*multiplier + m reads input channel c.
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride, Padding padding,
                           MacCounter* counter = nullptr, std::string_view layer = "depthwise_conv2d");

// Weights are (1, 1, C, N).
template <typename T>
Tensor<T> pointwise_conv2d(const Tensor<T>& x, const Tensor<T>& w, MacCounter* counter = nullptr,
                           std::string_view layer = "pointwise_conv2d");

// Per-channel parameters are (1, C, 1, 1).
template <typename T>
Tensor<T> bias_add(const Tensor<T>& x, const Tensor<T>& bias);
template <typename T>
Tensor<T> channel_affine(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& shift);

template <typename T>
Tensor<T> mish(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

template <typename T>
Tensor<T> pool2d(const Tensor<T>& x, PoolKind kind, std::size_t window, std::size_t stride);
template <typename T>
Tensor<T> adaptive_avg_pool(const Tensor<T>& x, std::size_t out_h, std::size_t out_w);
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);
template <typename T>
Tensor<T> resize_nearest(const Tensor<T>& x, std::size_t out_h, std::size_t out_w);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> xs);
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs);
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, std::span<const std::size_t> sizes);
template <typename T>
Tensor<T> add(std::span<const Tensor<T>* const> xs);
template <typename T>
Tensor<T> add(const std::vector<Tensor<T>>& xs);
// s is (N, C, 1, 1).
template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s);

// Adaptive pooling bin [begin, end) for output index i: floor(i*in/out) .. floor((i+1)*in/out).
struct Bin {
  std::size_t begin;
  std::size_t end;
};
Bin adaptive_bin(std::size_t i, std::size_t in, std::size_t out);
inline std::size_t nearest_source(std::size_t dst, std::size_t in, std::size_t out) { return dst * in / out; }

// ---- vector-Jacobian products -------------------------------------------

template <typename T>
struct ConvGrads {
  Tensor<T> dx;
  Tensor<T> dw;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride, Padding padding,
                             const Tensor<T>& dy);
template <typename T>
ConvGrads<T> depthwise_conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride,
                                       Padding padding, const Tensor<T>& dy);
template <typename T>
Tensor<T> bias_add_backward(const Tensor<T>& dy);

template <typename T>
struct AffineGrads {
  Tensor<T> dx;
  Tensor<T> dscale;
  Tensor<T> dshift;
};
template <typename T>
AffineGrads<T> channel_affine_backward(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& dy);

template <typename T>
Tensor<T> mish_backward(const Tensor<T>& x, const Tensor<T>& dy);
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& dy);

template <typename T>
Tensor<T> pool2d_backward(const Tensor<T>& x, PoolKind kind, std::size_t window, std::size_t stride,
                          const Tensor<T>& dy);
template <typename T>
Tensor<T> adaptive_avg_pool_backward(const Shape& x_shape, const Tensor<T>& dy);
template <typename T>
Tensor<T> resize_nearest_backward(const Shape& x_shape, const Tensor<T>& dy);

template <typename T>
struct ScaleGrads {
  Tensor<T> dx;
  Tensor<T> ds;
};
template <typename T>
ScaleGrads<T> scale_channels_backward(const Tensor<T>& x, const Tensor<T>& s, const Tensor<T>& dy);

}  // namespace csl::ops
