// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

// AVX2 kernels. Lanes run across adjacent output columns, so each lane performs
// the same (ky, kx, c) chain of separate multiply and add as the scalar
// reference. Built with -mavx2 only; callers must check backend_available().

#include "cslkit/kernels.hpp"

#if defined(CSLKIT_BUILD_AVX2)
#include <immintrin.h>
#endif

namespace csl::kernels::avx2 {

#if defined(CSLKIT_BUILD_AVX2)

bool compiled() { return true; }

namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
  using reg = __m256;
  static constexpr std::size_t lanes = 8;
  static reg zero() { return _mm256_setzero_ps(); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  // Even elements of p[0..15].
  static reg load_stride2(const float* p) {
    const __m256 a = _mm256_loadu_ps(p);
    const __m256 b = _mm256_loadu_ps(p + 8);
    const __m256 ev = _mm256_shuffle_ps(a, b, _MM_SHUFFLE(2, 0, 2, 0));
    return _mm256_castpd_ps(_mm256_permute4x64_pd(_mm256_castps_pd(ev), _MM_SHUFFLE(3, 1, 2, 0)));
  }
  static reg mul_add(reg acc, reg a, reg b) { return _mm256_add_ps(acc, _mm256_mul_ps(a, b)); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
};

template <>
struct Vec<double> {
  using reg = __m256d;
  static constexpr std::size_t lanes = 4;
  static reg zero() { return _mm256_setzero_pd(); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static reg load_stride2(const double* p) {
    const __m256d a = _mm256_loadu_pd(p);
    const __m256d b = _mm256_loadu_pd(p + 4);
    return _mm256_permute4x64_pd(_mm256_unpacklo_pd(a, b), _MM_SHUFFLE(3, 1, 2, 0));
  }
  static reg mul_add(reg acc, reg a, reg b) { return _mm256_add_pd(acc, _mm256_mul_pd(a, b)); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
};

template <typename T, std::size_t Stride>
inline typename Vec<T>::reg load_cols(const T* p) {
  if constexpr (Stride == 1) {
    return Vec<T>::load(p);
  } else {
    return Vec<T>::load_stride2(p);
  }
}

// Number of leading output columns whose vector loads stay inside the row.
// The stride-2 load touches one element past the last tap it uses.
template <typename T, std::size_t Stride>
std::size_t vector_columns(const ConvGeometry& g) {
  constexpr std::size_t L = Vec<T>::lanes;
  std::size_t n = 0;
  while (n + L <= g.out_w) {
    const std::size_t last_read = (n + L - 1) * Stride + (g.kernel - 1) + (Stride - 1);
    if (last_read >= g.in_w) break;
    n += L;
  }
  return n;
}

template <typename T, std::size_t Stride>
std::uint64_t conv2d_impl(const ConvGeometry& g, const T* in, const T* w, T* out) {
  using V = Vec<T>;
  constexpr std::size_t L = V::lanes;
  constexpr std::size_t U = 4;
  const std::size_t K = g.kernel;
  const std::size_t C = g.in_ch;
  const std::size_t N = g.out_ch;
  const std::size_t plane = g.in_h * g.in_w;
  const std::size_t vcols = vector_columns<T, Stride>(g);
  std::uint64_t macs = 0;

  for (std::size_t o = 0; o < N; ++o) {
    for (std::size_t y = 0; y < g.out_h; ++y) {
      T* orow = out + (o * g.out_h + y) * g.out_w;
      std::size_t x = 0;
      for (; x + U * L <= vcols; x += U * L) {
        typename V::reg acc[U];
        for (std::size_t u = 0; u < U; ++u) acc[u] = V::zero();
        for (std::size_t ky = 0; ky < K; ++ky) {
          for (std::size_t kx = 0; kx < K; ++kx) {
            const T* wp = w + (ky * K + kx) * C * N + o;
            const T* ip = in + (y * Stride + ky) * g.in_w + x * Stride + kx;
            for (std::size_t c = 0; c < C; ++c) {
              const auto wv = V::set1(wp[c * N]);
              const T* p = ip + c * plane;
              for (std::size_t u = 0; u < U; ++u) {
                acc[u] = V::mul_add(acc[u], load_cols<T, Stride>(p + u * L * Stride), wv);
              }
            }
          }
        }
        for (std::size_t u = 0; u < U; ++u) V::store(orow + x + u * L, acc[u]);
      }
      for (; x + L <= vcols; x += L) {
        auto acc = V::zero();
        for (std::size_t ky = 0; ky < K; ++ky) {
          for (std::size_t kx = 0; kx < K; ++kx) {
            const T* wp = w + (ky * K + kx) * C * N + o;
            const T* ip = in + (y * Stride + ky) * g.in_w + x * Stride + kx;
            for (std::size_t c = 0; c < C; ++c) {
              acc = V::mul_add(acc, load_cols<T, Stride>(ip + c * plane), V::set1(wp[c * N]));
            }
          }
        }
        V::store(orow + x, acc);
      }
      for (; x < g.out_w; ++x) {
        T acc = 0;
        for (std::size_t ky = 0; ky < K; ++ky) {
          for (std::size_t kx = 0; kx < K; ++kx) {
            const T* wp = w + (ky * K + kx) * C * N + o;
            const T* ip = in + (y * Stride + ky) * g.in_w + x * Stride + kx;
            for (std::size_t c = 0; c < C; ++c) acc += ip[c * plane] * wp[c * N];
          }
        }
        orow[x] = acc;
      }
      macs += g.out_w * K * K * C;
    }
  }
  return macs;
}

template <typename T, std::size_t Stride>
std::uint64_t depthwise_impl(const ConvGeometry& g, const T* in, const T* w, T* out) {
  using V = Vec<T>;
  constexpr std::size_t L = V::lanes;
  const std::size_t K = g.kernel;
  const std::size_t C = g.in_ch;
  const std::size_t M = g.multiplier;
  const std::size_t vcols = vector_columns<T, Stride>(g);
  std::uint64_t macs = 0;

  for (std::size_t c = 0; c < C; ++c) {
    const T* plane = in + c * g.in_h * g.in_w;
    for (std::size_t m = 0; m < M; ++m) {
      const std::size_t oc = c * M + m;
      for (std::size_t y = 0; y < g.out_h; ++y) {
        T* orow = out + (oc * g.out_h + y) * g.out_w;
        std::size_t x = 0;
        for (; x + L <= vcols; x += L) {
          auto acc = V::zero();
          for (std::size_t ky = 0; ky < K; ++ky) {
            const T* row = plane + (y * Stride + ky) * g.in_w + x * Stride;
            for (std::size_t kx = 0; kx < K; ++kx) {
              acc = V::mul_add(acc, load_cols<T, Stride>(row + kx), V::set1(w[((ky * K + kx) * C + c) * M + m]));
            }
          }
          V::store(orow + x, acc);
        }
        for (; x < g.out_w; ++x) {
          T acc = 0;
          for (std::size_t ky = 0; ky < K; ++ky) {
            for (std::size_t kx = 0; kx < K; ++kx) {
              acc += plane[(y * Stride + ky) * g.in_w + x * Stride + kx] * w[((ky * K + kx) * C + c) * M + m];
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

}  // namespace

template <typename T>
std::uint64_t conv2d(const ConvGeometry& g, const T* in, const T* w, T* out) {
  if (g.stride == 1) return conv2d_impl<T, 1>(g, in, w, out);
  if (g.stride == 2) return conv2d_impl<T, 2>(g, in, w, out);
  return scalar::conv2d<T>(g, in, w, out);
}

template <typename T>
std::uint64_t depthwise(const ConvGeometry& g, const T* in, const T* w, T* out) {
  if (g.stride == 1) return depthwise_impl<T, 1>(g, in, w, out);
  if (g.stride == 2) return depthwise_impl<T, 2>(g, in, w, out);
  return scalar::depthwise<T>(g, in, w, out);
}

#else  // !CSLKIT_BUILD_AVX2

bool compiled() { return false; }

template <typename T>
std::uint64_t conv2d(const ConvGeometry& g, const T* in, const T* w, T* out) {
  return scalar::conv2d<T>(g, in, w, out);
}

template <typename T>
std::uint64_t depthwise(const ConvGeometry& g, const T* in, const T* w, T* out) {
  return scalar::depthwise<T>(g, in, w, out);
}

#endif

template std::uint64_t conv2d<float>(const ConvGeometry&, const float*, const float*, float*);
template std::uint64_t conv2d<double>(const ConvGeometry&, const double*, const double*, double*);
template std::uint64_t depthwise<float>(const ConvGeometry&, const float*, const float*, float*);
template std::uint64_t depthwise<double>(const ConvGeometry&, const double*, const double*, double*);

}  // namespace csl::kernels::avx2
