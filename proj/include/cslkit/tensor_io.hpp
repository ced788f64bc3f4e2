// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cslkit/graph.hpp"
#include "cslkit/tensor.hpp"

namespace csl::io {

// Binary tensor container:
//   "CSLT" | u16 version | u8 rank | rank x u32 dims | f32 payload (row-major)
// All integers and floats little-endian. Tensors are written at rank 4; ranks
// 1-3 are accepted on read and padded with leading ones.
inline constexpr std::uint16_t kTensorVersion = 1;

void write_tensor(std::ostream& out, const Tensor<float>& t);
Tensor<float> read_tensor(std::istream& in);

void save_tensor(const std::string& path, const Tensor<float>& t);
Tensor<float> load_tensor(const std::string& path);

// Named sequence: repeated (u16 name length | utf-8 name | tensor) until EOF.
using NamedTensors = std::vector<std::pair<std::string, Tensor<float>>>;

void write_named(std::ostream& out, const NamedTensors& tensors);
NamedTensors read_named(std::istream& in);
void save_named(const std::string& path, const NamedTensors& tensors);
NamedTensors load_named(const std::string& path);

// Weights keyed by parameter name. Values pass through f32.
void save_weights(const std::string& path, const Network& net, const Weights& w);
Weights load_weights(const std::string& path, const Network& net);

}  // namespace csl::io
