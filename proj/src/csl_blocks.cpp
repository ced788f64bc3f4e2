// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cslkit/csl_blocks.hpp"

#include <cmath>

#include "cslkit/cost_model.hpp"
#include "cslkit/error.hpp"

namespace csl {

const char* to_string(CslVariant v) {
  switch (v) {
    case CslVariant::plain: return "plain";
    case CslVariant::attention: return "attention";
    case CslVariant::downsample: return "downsample";
  }
  return "unknown";
}

std::size_t CslModuleSpec::expanded_channels() const {
  return in_ch + cost::candidate_channels(out_ch, static_cast<double>(expansion));
}

void CslModuleSpec::validate() const {
  if (in_ch == 0) throw SpecError("CSL-Module: in_ch must be >= 1");
  if (out_ch == 0 || out_ch % 2 != 0) {
    throw SpecError("CSL-Module: out_ch must be even (N/2 skip maps), got " + std::to_string(out_ch));
  }
  if (expansion == 0) throw SpecError("CSL-Module: expansion t must be >= 1");
  if (kernel == 0 || kernel % 2 == 0) throw SpecError("CSL-Module: kernel must be odd, got " + std::to_string(kernel));
  if (variant == CslVariant::attention) {
    if (se_reduction == 0 || expanded_channels() % se_reduction != 0) {
      throw SpecError("CSL-Module: SE channels C+tN/2=" + std::to_string(expanded_channels()) +
                      " must be divisible by reduction " + std::to_string(se_reduction));
    }
  }
}

NodeId add_se_block(GraphBuilder& b, NodeId x, std::size_t reduction, const std::string& prefix) {
  const std::size_t ch = b.shape(x).c;
  if (reduction == 0 || ch % reduction != 0) {
    throw SpecError(prefix + ": channels " + std::to_string(ch) + " not divisible by reduction " +
                    std::to_string(reduction));
  }
  NodeId s = b.global_avg_pool(x, prefix + ".pool");
  s = b.conv2d(s, prefix + ".reduce", ch / reduction, 1);
  s = b.bias_add(s, prefix + ".reduce_bias");
  s = b.mish(s, prefix + ".reduce_act");
  s = b.conv2d(s, prefix + ".expand", ch, 1);
  s = b.bias_add(s, prefix + ".expand_bias");
  s = b.sigmoid(s, prefix + ".gate");
  return b.scale_channels(x, s, prefix + ".scale");
}

namespace {

NodeId bn_mish(GraphBuilder& b, NodeId x, const std::string& name) {
  x = b.affine(x, name + "_bn");
  return b.mish(x, name + "_act");
}

}  // namespace

NodeId add_csl_module(GraphBuilder& b, NodeId x, const CslModuleSpec& spec, const std::string& prefix) {
  spec.validate();
  const Shape in = b.shape(x);
  if (in.c != spec.in_ch) {
    throw ShapeError(prefix + ": module expects " + std::to_string(spec.in_ch) + " input channels, got " + in.str());
  }
  const std::size_t half = spec.out_ch / 2;
  const std::size_t K = spec.kernel;
  const bool down = spec.variant == CslVariant::downsample;
  if (down && (in.h < 2 || in.w < 2)) throw ShapeError(prefix + ": downsample needs spatial dims >= 2, got " + in.str());

  NodeId skip = b.conv2d(x, prefix + ".skip_pw", half, 1);
  skip = bn_mish(b, skip, prefix + ".skip");

  NodeId xdw = b.depthwise(x, prefix + ".input_dw", K, 1);
  xdw = bn_mish(b, xdw, prefix + ".input_dw");
  NodeId sdw = b.depthwise(skip, prefix + ".cand_dw", K, spec.expansion);
  sdw = bn_mish(b, sdw, prefix + ".cand_dw");
  NodeId u = b.concat({xdw, sdw}, prefix + ".expand");
  if (down) u = b.adaptive_avg_pool(u, prefix + ".expand_pool", in.h / 2, in.w / 2);

  NodeId f = b.depthwise(u, prefix + ".fused_dw", K, 1);
  f = bn_mish(b, f, prefix + ".fused_dw");
  if (spec.variant == CslVariant::attention) f = add_se_block(b, f, spec.se_reduction, prefix + ".se");

  NodeId m = b.conv2d(f, prefix + ".proj_pw", half, 1);
  m = b.affine(m, prefix + ".proj_bn");

  if (down) skip = b.pool(skip, prefix + ".skip_pool", ops::PoolKind::avg, 2, 2);
  return b.concat({skip, m}, prefix + ".out");
}

std::array<NodeId, 3> add_backbone(GraphBuilder& b, NodeId image, const BackboneSpec& spec) {
  if (spec.groups.empty()) throw SpecError("backbone: needs at least one group");
  if (spec.stem_ch == 0) throw SpecError("backbone: stem channels must be >= 1");
  for (std::size_t k = 0; k < 3; ++k) {
    if (spec.taps[k] >= spec.groups.size()) throw SpecError("backbone: tap " + std::to_string(k) + " names a missing group");
    if (k > 0 && spec.taps[k] <= spec.taps[k - 1]) throw SpecError("backbone: taps must be strictly increasing");
  }

  NodeId x = b.conv2d(image, "backbone.stem.conv", spec.stem_ch, 3, 2);
  x = bn_mish(b, x, "backbone.stem");
  std::size_t stride = 2;
  std::size_t channels = spec.stem_ch;
  std::vector<std::size_t> group_stride;
  std::vector<NodeId> group_out;
  for (std::size_t g = 0; g < spec.groups.size(); ++g) {
    const BackboneGroup& grp = spec.groups[g];
    const std::string gp = "backbone.g" + std::to_string(g);
    if (grp.modules == 0) throw SpecError(gp + ": group needs at least one module");
    if (grp.downsample) {
      x = b.pool(x, gp + ".pool", ops::PoolKind::avg, 2, 2);
      stride *= 2;
    }
    for (std::size_t m = 0; m < grp.modules; ++m) {
      CslModuleSpec ms;
      ms.in_ch = channels;
      ms.out_ch = grp.out_ch;
      ms.expansion = spec.expansion;
      ms.kernel = spec.kernel;
      ms.se_reduction = spec.se_reduction;
      ms.variant = m == 0 ? CslVariant::attention : CslVariant::plain;
      x = add_csl_module(b, x, ms, gp + ".m" + std::to_string(m));
      channels = grp.out_ch;
    }
    group_stride.push_back(stride);
    group_out.push_back(x);
  }

  constexpr std::array<std::size_t, 3> kTapStrides{8, 16, 32};
  std::array<NodeId, 3> taps{};
  for (std::size_t k = 0; k < 3; ++k) {
    const std::size_t s = group_stride[spec.taps[k]];
    if (s != kTapStrides[k]) {
      throw SpecError("backbone: stride bookkeeping failed, tap " + std::to_string(k) + " (group " +
                      std::to_string(spec.taps[k]) + ") is at stride " + std::to_string(s) + ", expected " +
                      std::to_string(kTapStrides[k]));
    }
    taps[k] = group_out[spec.taps[k]];
  }
  return taps;
}

std::size_t middle_size(std::size_t larger, std::size_t smaller, MiddleRule rule) {
  const double a = static_cast<double>(larger);
  const double b = static_cast<double>(smaller);
  switch (rule) {
    case MiddleRule::geometric: return static_cast<std::size_t>(std::lround(std::sqrt(a * b)));
    case MiddleRule::arithmetic: return static_cast<std::size_t>(std::lround((a + b) / 2.0));
    case MiddleRule::pow2: return static_cast<std::size_t>(std::lround(a / std::sqrt(2.0)));
  }
  return larger;
}

namespace {

NodeId resized_to(GraphBuilder& b, NodeId x, const Shape& target, const std::string& name) {
  const Shape& s = b.shape(x);
  if (s.h == target.h && s.w == target.w) return x;
  return b.resize(x, name, target.h, target.w);
}

CslModuleSpec fpn_module(const FpnSpec& fpn) {
  CslModuleSpec ms;
  ms.in_ch = fpn.width;
  ms.out_ch = fpn.width;
  ms.expansion = fpn.expansion;
  return ms;
}

}  // namespace

std::array<NodeId, 5> add_expand_pyramid(GraphBuilder& b, const std::array<NodeId, 3>& scales, const FpnSpec& fpn) {
  for (std::size_t k = 1; k < 3; ++k) {
    const Shape& hi = b.shape(scales[k - 1]);
    const Shape& lo = b.shape(scales[k]);
    if (!(lo.h < hi.h && lo.w < hi.w)) {
      throw ShapeError("pyramid: scale sizes must strictly decrease, got " + hi.str() + " then " + lo.str());
    }
  }
  std::array<NodeId, 3> lat{};
  for (std::size_t k = 0; k < 3; ++k) {
    const std::string p = "fpn.lateral" + std::to_string(k);
    lat[k] = b.conv2d(scales[k], p, fpn.width, 1);
    lat[k] = bn_mish(b, lat[k], p);
  }
  std::array<NodeId, 5> levels{lat[0], 0, lat[1], 0, lat[2]};
  for (std::size_t k = 0; k < 2; ++k) {
    const Shape& hi = b.shape(lat[k]);
    const Shape& lo = b.shape(lat[k + 1]);
    const Shape mid{1, fpn.width, middle_size(hi.h, lo.h, fpn.middle_rule), middle_size(hi.w, lo.w, fpn.middle_rule)};
    if (!(mid.h < hi.h && mid.h > lo.h && mid.w < hi.w && mid.w > lo.w)) {
      throw ShapeError("pyramid: middle level " + mid.str() + " is not strictly between " + hi.str() + " and " + lo.str());
    }
    const std::string p = "fpn.mid" + std::to_string(k);
    const NodeId a = resized_to(b, lat[k], mid, p + ".from_upper");
    const NodeId c = resized_to(b, lat[k + 1], mid, p + ".from_lower");
    const NodeId sum = b.add({a, c}, p + ".sum");
    levels[2 * k + 1] = add_csl_module(b, sum, fpn_module(fpn), p + ".csl");
  }
  return levels;
}

std::array<NodeId, 5> add_fpn_repeats(GraphBuilder& b, const std::array<NodeId, 5>& in, const FpnSpec& fpn) {
  for (NodeId l : in) {
    if (b.shape(l).c != fpn.width) {
      throw ShapeError("fpn: level channels " + std::to_string(b.shape(l).c) + " differ from width " +
                       std::to_string(fpn.width));
    }
  }
  std::array<NodeId, 5> lv = in;
  constexpr std::array<std::array<std::size_t, 3>, 2> kSteps{{{1, 3, 5}, {0, 2, 4}}};  // 5 = none
  for (std::size_t r = 0; r < fpn.repeats; ++r) {
    for (std::size_t step = 0; step < 2; ++step) {
      std::array<NodeId, 5> next = lv;
      for (std::size_t k : kSteps[step]) {
        if (k >= 5) continue;
        const std::string p = "fpn.r" + std::to_string(r) + ".l" + std::to_string(k + 1);
        const Shape target = b.shape(lv[k]);
        std::vector<NodeId> terms;
        if (k > 0) terms.push_back(resized_to(b, lv[k - 1], target, p + ".from_l" + std::to_string(k)));
        terms.push_back(lv[k]);
        if (k < 4) terms.push_back(resized_to(b, lv[k + 1], target, p + ".from_l" + std::to_string(k + 2)));
        const NodeId sum = b.add(terms, p + ".sum");
        next[k] = add_csl_module(b, sum, fpn_module(fpn), p + ".csl");
      }
      lv = next;
    }
  }
  return lv;
}

Network build_csl_module(const CslModuleSpec& spec, std::size_t height, std::size_t width) {
  GraphBuilder b;
  const NodeId x = b.input("input", spec.in_ch, height, width);
  b.output(add_csl_module(b, x, spec, "csl"), "output");
  return std::move(b).build();
}

Network build_se_block(std::size_t channels, std::size_t reduction, std::size_t height, std::size_t width) {
  GraphBuilder b;
  const NodeId x = b.input("input", channels, height, width);
  b.output(add_se_block(b, x, reduction, "se"), "output");
  return std::move(b).build();
}

Network build_backbone(const BackboneSpec& spec, std::size_t input_size) {
  GraphBuilder b;
  const NodeId x = b.input("image", 3, input_size, input_size);
  const auto taps = add_backbone(b, x, spec);
  b.output(taps[0], "tap8");
  b.output(taps[1], "tap16");
  b.output(taps[2], "tap32");
  return std::move(b).build();
}

Network build_expand_pyramid(const std::array<Shape, 3>& scales, const FpnSpec& fpn) {
  GraphBuilder b;
  std::array<NodeId, 3> in{};
  for (std::size_t k = 0; k < 3; ++k) in[k] = b.input("scale" + std::to_string(k), scales[k].c, scales[k].h, scales[k].w);
  const auto lv = add_expand_pyramid(b, in, fpn);
  for (std::size_t k = 0; k < 5; ++k) b.output(lv[k], "level" + std::to_string(k));
  return std::move(b).build();
}

Network build_fpn_repeats(const std::array<Shape, 5>& levels, const FpnSpec& fpn) {
  GraphBuilder b;
  std::array<NodeId, 5> in{};
  for (std::size_t k = 0; k < 5; ++k) in[k] = b.input("level" + std::to_string(k), levels[k].c, levels[k].h, levels[k].w);
  const auto lv = add_fpn_repeats(b, in, fpn);
  for (std::size_t k = 0; k < 5; ++k) b.output(lv[k], "level" + std::to_string(k));
  return std::move(b).build();
}

Network build_detector(const DetectorConfig& cfg) {
  GraphBuilder b;
  const NodeId image = b.input("image", 3, cfg.input_size, cfg.input_size);
  const auto taps = add_backbone(b, image, cfg.backbone);
  auto levels = add_expand_pyramid(b, taps, cfg.fpn);
  levels = add_fpn_repeats(b, levels, cfg.fpn);

  const std::size_t out_ch = cfg.head_channels();
  const ParamId w = b.param(kHeadWeight, Shape{1, 1, cfg.fpn.width, out_ch}, ParamRole::weight, cfg.fpn.width);
  const ParamId bias = b.param(kHeadBias, Shape{1, out_ch, 1, 1}, ParamRole::bias, 1);
  for (std::size_t k = 0; k < 5; ++k) {
    const std::string p = "head.l" + std::to_string(k + 1);
    NodeId y = b.conv2d_shared(levels[k], p + ".conv", w);
    y = b.bias_add_shared(y, p + ".bias", bias);
    b.output(y, "level" + std::to_string(k));
  }
  return std::move(b).build();
}

Network build_network(const DetectorConfig& cfg) {
  const LayerSpec& l = cfg.layer;
  switch (cfg.kind) {
    case NetworkKind::detector:
      return build_detector(cfg);
    case NetworkKind::conv: {
      GraphBuilder b;
      const NodeId x = b.input("input", l.in_ch, cfg.input_size, cfg.input_size);
      b.output(b.conv2d(x, "conv", l.out_ch, l.kernel, l.stride), "out");
      return std::move(b).build();
    }
    case NetworkKind::csl_module: {
      CslModuleSpec spec;
      spec.in_ch = l.in_ch;
      spec.out_ch = l.out_ch;
      spec.kernel = l.kernel;
      spec.expansion = l.expansion;
      spec.variant = l.variant == "attention"    ? CslVariant::attention
                     : l.variant == "downsample" ? CslVariant::downsample
                                                 : CslVariant::plain;
      return build_csl_module(spec, cfg.input_size, cfg.input_size);
    }
  }
  throw SpecError("unknown network kind");
}

}  // namespace csl
