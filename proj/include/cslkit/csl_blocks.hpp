// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "cslkit/config.hpp"
#include "cslkit/graph.hpp"

namespace csl {

enum class CslVariant { plain, attention, downsample };

const char* to_string(CslVariant v);

struct CslModuleSpec {
  std::size_t in_ch = 16;
  std::size_t out_ch = 16;
  std::size_t expansion = 2;
  std::size_t kernel = 3;
  CslVariant variant = CslVariant::plain;
  std::size_t se_reduction = 4;

  // Channels entering the fused depthwise: C + t*N/2.
  std::size_t expanded_channels() const;
  void validate() const;
};

// Layer suffixes of the five cost terms, in term order.
inline constexpr std::array<const char*, 5> kCslTermLayers = {".skip_pw", ".cand_dw", ".input_dw", ".fused_dw",
                                                              ".proj_pw"};

/// CSL-Module on top of `x`:
///   S = mish(bn(pw_{C->N/2}(X)))                               skip branch
///   U = concat(mish(bn(dw_K(X))), mish(bn(dw_K^t(S))))         expansion, C + tN/2 maps
///   M = bn(pw_{->N/2}(mish(bn(dw_K(U)))))                      fused + linear projection
///   out = concat(S, M)
/// attention inserts an SE block after the fused depthwise; downsample halves
/// U with adaptive average pooling and S with a 2x2 stride-2 average pool.
NodeId add_csl_module(GraphBuilder& b, NodeId x, const CslModuleSpec& spec, const std::string& prefix);

// global pool -> pw ch->ch/r (+bias) -> mish -> pw ch/r->ch (+bias) -> sigmoid -> scale
NodeId add_se_block(GraphBuilder& b, NodeId x, std::size_t reduction, const std::string& prefix);

std::array<NodeId, 3> add_backbone(GraphBuilder& b, NodeId image, const BackboneSpec& spec);

std::size_t middle_size(std::size_t larger, std::size_t smaller, MiddleRule rule);

/// Projects three scales to `width` channels and inserts a middle level between
/// each neighbouring pair; returns five levels, largest first.
std::array<NodeId, 5> add_expand_pyramid(GraphBuilder& b, const std::array<NodeId, 3>& scales, const FpnSpec& fpn);

/// R repeat blocks. Each block refreshes levels 2 and 4, then 1, 3 and 5, each
/// from the sum of itself and its resized neighbours, through a CSL-Module.
std::array<NodeId, 5> add_fpn_repeats(GraphBuilder& b, const std::array<NodeId, 5>& levels, const FpnSpec& fpn);

// Standalone networks (input "input"/"scale{k}"/"level{k}", outputs named).
Network build_csl_module(const CslModuleSpec& spec, std::size_t height, std::size_t width);
Network build_se_block(std::size_t channels, std::size_t reduction, std::size_t height, std::size_t width);
Network build_backbone(const BackboneSpec& spec, std::size_t input_size);
Network build_expand_pyramid(const std::array<Shape, 3>& scales, const FpnSpec& fpn);
Network build_fpn_repeats(const std::array<Shape, 5>& levels, const FpnSpec& fpn);

/// Backbone -> pyramid expansion -> R repeats -> one 1x1 head (a single
/// weight/bias pair) applied to all five levels. Outputs "level0".."level4".
Network build_detector(const DetectorConfig& cfg);

// Dispatches on cfg.kind: the detector, a single conv ("conv"), or one CSL-Module.
Network build_network(const DetectorConfig& cfg);

inline constexpr const char* kHeadWeight = "head.weight";
inline constexpr const char* kHeadBias = "head.bias";

}  // namespace csl
