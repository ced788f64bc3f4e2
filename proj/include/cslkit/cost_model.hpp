// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cslkit/graph.hpp"
#include "cslkit/mac_counter.hpp"

namespace csl::cost {

/// Shape of one layer for the closed-form cost formulas. `expansion` is only
/// read by the CSL-Module formulas.
struct ConvShapeQuery {
  std::size_t out_h = 1;
  std::size_t out_w = 1;
  std::size_t in_ch = 1;
  std::size_t out_ch = 1;
  std::size_t kernel = 1;
  double expansion = 1.0;

  void validate() const;
};

// H'*W'*C*K^2*N
std::uint64_t conv_flops(const ConvShapeQuery& q);
// H'*W'*C*multiplier*K^2
std::uint64_t depthwise_flops(std::size_t out_h, std::size_t out_w, std::size_t channels, std::size_t multiplier,
                              std::size_t kernel);
// H*W*C*N
std::uint64_t pointwise_flops(std::size_t h, std::size_t w, std::size_t in_ch, std::size_t out_ch);

/// The five CSL-Module terms, in this fixed order:
///   0 skip pointwise          H'W' * C * N/2
///   1 candidate depthwise     t * H'W' * K^2 * N/2
///   2 input depthwise         H'W' * C * K^2
///   3 fused depthwise         H'W' * (C + tN/2) * K^2
///   4 projection pointwise    H'W' * (C + tN/2) * N/2
struct CslCost {
  std::array<std::uint64_t, 5> terms{};
  std::uint64_t total = 0;
};

inline constexpr std::array<const char*, 5> kCslTermNames = {
    "skip_pointwise", "candidate_depthwise", "input_depthwise", "fused_depthwise", "projection_pointwise"};

// Rejects odd N and non-integral t*N/2.
CslCost csl_flops(const ConvShapeQuery& q);

// Half of N and t*N/2 as exact counts; throws SpecError when not integral.
std::size_t half_channels(std::size_t out_ch);
std::size_t candidate_channels(std::size_t out_ch, double expansion);

double speedup_ratio(const ConvShapeQuery& q);
// Large-N limit of speedup_ratio for C = N: K^2 / (1 + t/4).
double asymptotic_speedup(std::size_t kernel, double expansion);

// Analytic MACs of one node, from its recorded shapes only.
std::uint64_t analytic_macs(const Network& net, const Node& node);
// K^2*C*N for conv, K^2*C*mult for depthwise, C for bias, 2C for affine.
std::size_t param_count(const Network& net, const Node& node);

struct CostRow {
  std::string name;
  std::string op;
  Shape shape;
  std::uint64_t analytic = 0;
  std::uint64_t empirical = 0;
  std::size_t params = 0;
  bool shared_params = false;  // parameters already charged to an earlier row
};

struct CostReport {
  std::size_t input_h = 0;
  std::size_t input_w = 0;
  bool has_empirical = false;
  std::vector<CostRow> rows;
  std::uint64_t total_analytic = 0;
  std::uint64_t total_empirical = 0;
  std::size_t total_params = 0;
  std::vector<std::string> notes;

  std::vector<const CostRow*> mismatches() const;

  std::string render_table() const;
  // layer,analytic_macs,empirical_macs,params
  std::string render_csv() const;
};

// One row per non-input node. Shared parameters are charged to their first user.
CostReport network_cost(const Network& net, const MacCounter* empirical = nullptr);

// Reference totals for the 416x416, 80-class detector.
struct Calibration {
  static constexpr double kMacTarget = 1470e6;
  static constexpr double kParamTarget = 3.2e6;
  double macs = 0;
  double params = 0;
  double mac_deviation() const { return macs / kMacTarget - 1.0; }
  double param_deviation() const { return params / kParamTarget - 1.0; }
  bool within(double tolerance) const;
  std::string render() const;
};

Calibration calibration(const CostReport& report);

// Fixed text about the speed-up ratio claims, appended to verify reports.
std::vector<std::string> speedup_footnotes();

}  // namespace csl::cost
