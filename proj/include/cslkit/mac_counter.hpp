// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace csl {

/// Multiply-accumulates actually executed by the kernels, keyed by layer name.
/// Not thread-safe: one counter per concurrent evaluation.
class MacCounter {
 public:
  void add(std::string_view layer, std::uint64_t macs) {
    auto it = per_layer_.find(layer);
    if (it == per_layer_.end()) it = per_layer_.emplace(std::string(layer), 0).first;
    it->second += macs;
    total_ += macs;
  }

  std::uint64_t total() const { return total_; }
  std::uint64_t of(std::string_view layer) const {
    auto it = per_layer_.find(layer);
    return it == per_layer_.end() ? 0 : it->second;
  }
  const std::map<std::string, std::uint64_t, std::less<>>& per_layer() const { return per_layer_; }

  void reset() {
    per_layer_.clear();
    total_ = 0;
  }

 private:
  std::map<std::string, std::uint64_t, std::less<>> per_layer_;
  std::uint64_t total_ = 0;
};

}  // namespace csl
