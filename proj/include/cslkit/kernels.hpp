// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace csl::kernels {

enum class Backend { scalar, avx2 };

/// Geometry of one batch item. The input plane is already zero-padded, so every
/// tap of every output pixel reads inside [in_h x in_w].
struct ConvGeometry {
  std::size_t in_ch = 1;
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  std::size_t out_ch = 1;
  std::size_t out_h = 1;
  std::size_t out_w = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t multiplier = 1;  // depthwise only
};

// Kernels write every output element and return the multiply-accumulates they
// executed. Weights are HWIO: (K, K, C, N) for dense, (K, K, C, multiplier) for
// depthwise. Each output element accumulates its taps in (ky, kx, c) order
// starting from zero; every backend honours that order exactly.
template <typename T>
using ConvKernel = std::uint64_t (*)(const ConvGeometry&, const T* in, const T* w, T* out);

template <typename T>
struct KernelTable {
  ConvKernel<T> conv2d;
  ConvKernel<T> depthwise;
};

const char* to_string(Backend b);
std::optional<Backend> parse_backend(std::string_view name);

bool backend_available(Backend b);
Backend best_backend();

// Process-wide selection. Initialised from CSLKIT_BACKEND when set, otherwise
// the best backend the CPU supports.
Backend active_backend();
void set_active_backend(Backend b);

template <typename T>
const KernelTable<T>& table(Backend b);

template <typename T>
const KernelTable<T>& active_table() {
  return table<T>(active_backend());
}

namespace scalar {
template <typename T>
std::uint64_t conv2d(const ConvGeometry& g, const T* in, const T* w, T* out);
template <typename T>
std::uint64_t depthwise(const ConvGeometry& g, const T* in, const T* w, T* out);
}  // namespace scalar

namespace avx2 {
bool compiled();
template <typename T>
std::uint64_t conv2d(const ConvGeometry& g, const T* in, const T* w, T* out);
template <typename T>
std::uint64_t depthwise(const ConvGeometry& g, const T* in, const T* w, T* out);
}  // namespace avx2

}  // namespace csl::kernels
