// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cslkit/graph.hpp"

namespace csl::gradcheck {

struct Options {
  double eps = 1e-5;
  // Relative error is |a - n| / max(|a|, |n|, floor) with
  // floor = floor_scale * max(1, sum |R_k * y_k|). Central-difference roundoff
  // grows with that sum, so gradients far below it cannot be resolved.
  double floor_scale = 1e-6;
  // Coordinates probed per tensor; 0 probes all of them.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
  // Perturbs the reverse-mode result of the first case to exercise failure reporting.
  bool inject_fault = false;
};

struct CaseResult {
  std::string name;
  std::string shape;  // first input shape
  double max_rel_err = 0;
  std::string worst;  // "input0[12]" or a parameter name with index
  double worst_analytic = 0;
  double worst_numeric = 0;
  std::size_t checked = 0;
  double floor = 0;
  double tolerance = 0;
  bool passed() const { return max_rel_err < tolerance; }
};

// Loss is sum_k <R_k, y_k> over outputs with fixed random R_k. Compares the
// reverse-mode gradient of every input and parameter with central differences.
CaseResult check_network(const std::string& name, const Network& net, const Options& opts, double tolerance);

std::vector<CaseResult> primitive_cases(const Options& opts);
// Every variant at t = 2 and 3.
std::vector<CaseResult> module_cases(const Options& opts);
// Toy detector at 64x64 with sampled coordinates.
CaseResult toy_detector_case(const Options& opts);

struct Report {
  std::vector<CaseResult> cases;
  bool passed() const;
  double max_rel_err(double tolerance) const;  // over cases sharing `tolerance`
  std::string render() const;
};

Report run_suite(const Options& opts);

inline constexpr double kPrimitiveTolerance = 1e-4;
inline constexpr double kDetectorTolerance = 1e-3;

}  // namespace csl::gradcheck
