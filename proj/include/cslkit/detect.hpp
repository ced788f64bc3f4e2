// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cslkit/anchors.hpp"
#include "cslkit/tensor.hpp"

namespace csl::detect {

using anchors::BoxWH;

// Width/height prediction: w = w_a * exp(tw) or w = w_a + tw.
enum class WhMode { exp, additive };
const char* to_string(WhMode m);
WhMode parse_wh_mode(const std::string& s);

/// Decoded box in normalised center form.
struct Detection {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;
  std::size_t class_id = 0;
  double score = 0;
  std::size_t level = 0;
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct DecodedWH {
  double w = 0;
  double h = 0;
  bool clamped = false;  // a side fell below 0 or above 1
};

DecodedWH decode_wh(const BoxWH& anchor, double tw, double th, WhMode mode);

// Head tensors are (1, k*(5+classes), grid_h, grid_w). Anchor a owns channels
// [a*(5+classes), (a+1)*(5+classes)) laid out as tx, ty, tw, th, obj, cls...
struct LevelLayout {
  std::size_t anchors = 0;
  std::size_t num_classes = 0;
  std::size_t stride() const { return 5 + num_classes; }
  std::size_t channel(std::size_t anchor, std::size_t field) const { return anchor * stride() + field; }
};

LevelLayout infer_layout(const Shape& raw, std::size_t anchors_per_level);

struct DecodeStats {
  std::size_t candidates = 0;  // (cell, anchor, class) triples examined
  std::size_t clamped = 0;     // boxes whose w or h needed clamping
};

// score = sigmoid(obj) * sigmoid(cls); triples with score < thresh are dropped.
std::vector<Detection> decode_level(const Tensor<float>& raw, std::span<const BoxWH> anchors, WhMode mode,
                                    double score_thresh, std::size_t level = 0, DecodeStats* stats = nullptr);

// Decodes every level with its anchor list; concatenates in level order.
std::vector<Detection> decode_all(std::span<const Tensor<float>> raw, const anchors::AnchorSet& set, WhMode mode,
                                  double score_thresh, DecodeStats* stats = nullptr);

// Corner-style IoU of two center-form boxes.
double box_iou(const Detection& a, const Detection& b);

// Selection order: higher score, then smaller class id, then smaller x, then y, w, h.
bool ranks_before(const Detection& a, const Detection& b);

// Gaussian soft-NMS. Returns survivors in selection order.
std::vector<Detection> soft_nms(std::vector<Detection> dets, double sigma = 0.5, double final_thresh = 0.001);

// COCO results: [{image_id, category_id, bbox:[x,y,w,h] in pixels, score}].
std::string to_coco_results(std::span<const Detection> dets, long long image_id, double image_w, double image_h);
std::string render_table(std::span<const Detection> dets);

}  // namespace csl::detect
