// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace csl {

struct BackboneGroup {
  std::size_t modules = 1;
  std::size_t out_ch = 16;
  bool downsample = true;
};

/// Stem (3x3 stride-2 conv) followed by CSL-Module groups. A downsample group
/// opens with a 2x2 stride-2 average pool; its first module is the attention
/// variant. `taps` index the three groups exported at strides 8/16/32.
struct BackboneSpec {
  std::size_t stem_ch = 32;
  std::size_t expansion = 3;
  std::size_t kernel = 3;
  std::size_t se_reduction = 4;
  std::vector<BackboneGroup> groups;
  std::array<std::size_t, 3> taps{1, 2, 3};
};

enum class MiddleRule { geometric, arithmetic, pow2 };

const char* to_string(MiddleRule r);

struct FpnSpec {
  std::size_t width = 96;
  std::size_t repeats = 3;
  std::size_t expansion = 2;
  MiddleRule middle_rule = MiddleRule::geometric;
};

// Per-anchor channel block (tx, ty, tw, th, obj, class_0 .. class_{C-1}),
// blocks laid out anchor after anchor.
enum class HeadLayout { anchor_major };

// What a config file describes. `conv` and `csl_module` build one layer or
// one block on an input_size x input_size map; the detector keys are ignored.
enum class NetworkKind { detector, conv, csl_module };

const char* to_string(NetworkKind k);

struct LayerSpec {
  std::size_t in_ch = 3;
  std::size_t out_ch = 16;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t expansion = 2;
  std::string variant = "plain";  // csl_module only: plain, attention, downsample
};

struct DetectorConfig {
  NetworkKind kind = NetworkKind::detector;
  LayerSpec layer;
  std::size_t input_size = 416;
  std::size_t num_classes = 80;
  std::size_t anchors_per_level = 3;
  std::uint64_t seed = 0;
  BackboneSpec backbone;
  FpnSpec fpn;
  HeadLayout head = HeadLayout::anchor_major;

  std::size_t head_channels() const { return anchors_per_level * (5 + num_classes); }
};

DetectorConfig default_config();
// 64x64 input, width 8, one repeat: small enough for finite differences.
DetectorConfig toy_config();

// Unknown keys, wrong types and out-of-range values throw ConfigError naming
// the key path (e.g. "backbone.groups[2].out_ch").
DetectorConfig parse_config(std::string_view json_text);
DetectorConfig load_config(const std::string& path);
std::string dump_config(const DetectorConfig& cfg);

}  // namespace csl
