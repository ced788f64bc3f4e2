// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cslkit/config.hpp"
#include "cslkit/cost_model.hpp"

namespace csl::verify {

struct Options {
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  // Test fixture: adds one MAC to the analytic count of this layer.
  std::string corrupt_layer;
};

struct Mismatch {
  std::string layer;
  std::uint64_t analytic = 0;
  std::uint64_t empirical = 0;
};

struct TrialResult {
  std::uint64_t seed = 0;
  std::uint64_t analytic_total = 0;
  std::uint64_t empirical_total = 0;
  std::size_t layers = 0;
  std::vector<Mismatch> mismatches;
};

struct SpeedupCheck {
  std::size_t expansion = 0;
  std::size_t channels = 0;
  double ratio = 0;
  double limit = 0;
  double rel_err = 0;
  bool passed() const { return rel_err < 0.01; }
};

struct Report {
  std::size_t input_size = 0;
  std::vector<TrialResult> trials;
  bool analytic_stable = true;  // identical analytic totals across trials
  std::vector<SpeedupCheck> speedups;
  std::vector<std::string> notes;

  bool passed() const;
  std::string render() const;
};

// Speed-up ratio at C = N = `channels`, K = 3, against its large-N limit.
std::vector<SpeedupCheck> speedup_checks(std::size_t channels = 8192);

// Forward passes with random inputs, comparing per-layer executed MACs to the
// analytic model.
Report run(const DetectorConfig& cfg, const Options& opts);

}  // namespace csl::verify
