// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

// Reference kernels. Plain loops in the canonical (ky, kx, c) accumulation
// order; the vector backends are checked against these bit for bit.

#include "cslkit/kernels.hpp"

namespace csl::kernels::scalar {

template <typename T>
std::uint64_t conv2d(const ConvGeometry& g, const T* in, const T* w, T* out) {
  const std::size_t K = g.kernel;
  const std::size_t C = g.in_ch;
  const std::size_t N = g.out_ch;
  const std::size_t s = g.stride;
  std::uint64_t macs = 0;
  for (std::size_t o = 0; o < N; ++o) {
    for (std::size_t y = 0; y < g.out_h; ++y) {
      T* orow = out + (o * g.out_h + y) * g.out_w;
      for (std::size_t x = 0; x < g.out_w; ++x) {
        T acc = 0;
        for (std::size_t ky = 0; ky < K; ++ky) {
          for (std::size_t kx = 0; kx < K; ++kx) {
            const T* wp = w + (ky * K + kx) * C * N + o;
            const T* ip = in + (y * s + ky) * g.in_w + x * s + kx;
            for (std::size_t c = 0; c < C; ++c) {
              acc += ip[c * g.in_h * g.in_w] * wp[c * N];
            }
          }
        }
        orow[x] = acc;
      }
      macs += g.out_w * K * K * C;
    }
  }
  return macs;
}

template <typename T>
std::uint64_t depthwise(const ConvGeometry& g, const T* in, const T* w, T* out) {
  const std::size_t K = g.kernel;
  const std::size_t C = g.in_ch;
  const std::size_t M = g.multiplier;
  const std::size_t s = g.stride;
  std::uint64_t macs = 0;
  for (std::size_t c = 0; c < C; ++c) {
    const T* plane = in + c * g.in_h * g.in_w;
    for (std::size_t m = 0; m < M; ++m) {
      const std::size_t oc = c * M + m;
      for (std::size_t y = 0; y < g.out_h; ++y) {
        T* orow = out + (oc * g.out_h + y) * g.out_w;
        for (std::size_t x = 0; x < g.out_w; ++x) {
          T acc = 0;
          for (std::size_t ky = 0; ky < K; ++ky) {
            for (std::size_t kx = 0; kx < K; ++kx) {
              acc += plane[(y * s + ky) * g.in_w + x * s + kx] * w[((ky * K + kx) * C + c) * M + m];
            }
          }
          orow[x] = acc;
        }
        macs += g.out_w * K * K;
      }
    }
  }
  return macs;
}

template std::uint64_t conv2d<float>(const ConvGeometry&, const float*, const float*, float*);
template std::uint64_t conv2d<double>(const ConvGeometry&, const double*, const double*, double*);
template std::uint64_t depthwise<float>(const ConvGeometry&, const float*, const float*, float*);
template std::uint64_t depthwise<double>(const ConvGeometry&, const double*, const double*, double*);

}  // namespace csl::kernels::scalar
