// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace csl::anchors {

/// Box extent normalised by image width/height; 0 < w, h <= 1.
struct BoxWH {
  double w = 0;
  double h = 0;
  friend bool operator==(const BoxWH&, const BoxWH&) = default;
};

// Scalar compared against the bin thresholds.
enum class ScaleRule { geometric_mean, max_side };
// Representative of a cluster.
enum class CenterRule { mean, medoid };

double scale_of(const BoxWH& b, ScaleRule rule = ScaleRule::geometric_mean);

struct LoadedBoxes {
  std::vector<BoxWH> boxes;
  std::size_t dropped_degenerate = 0;  // zero or negative width/height
  std::size_t clamped = 0;             // extent beyond the image, clamped to 1
};

// COCO-style document: images[{id,width,height}], annotations[{image_id,bbox:[x,y,w,h]}].
LoadedBoxes parse_annotations(std::string_view json_text);
LoadedBoxes load_boxes(const std::string& path);
// Inverse of parse_annotations: one 1x1 image holding every box.
std::string export_annotations(std::span<const BoxWH> boxes);

// IoU of two co-centred boxes.
double iou_wh(const BoxWH& a, const BoxWH& b);

// [0, 1/2^(l-1), 1/2^(l-2), ..., 1]
std::vector<double> scale_thresholds(std::size_t levels);
// Bin i holds thresholds[i] <= s < thresholds[i+1]; the top bin also takes s = 1.
std::size_t bin_index(double scale, std::span<const double> thresholds);

struct ScaleBins {
  std::vector<double> thresholds;
  std::vector<std::vector<BoxWH>> bins;
};

ScaleBins bin_by_scale(std::span<const BoxWH> boxes, std::size_t levels, ScaleRule rule = ScaleRule::geometric_mean);

struct KMeansResult {
  std::vector<BoxWH> centers;           // sorted by area ascending
  std::vector<std::size_t> assignment;  // box -> index into centers
  std::vector<double> objective;        // mean (1 - IoU) after each iteration
  std::size_t iterations = 0;
  bool converged = false;
};

// Mean 1 - IoU of each box to its assigned center.
double assignment_cost(std::span<const BoxWH> boxes, std::span<const BoxWH> centers,
                       std::span<const std::size_t> assignment);

KMeansResult kmeans_iou(std::span<const BoxWH> boxes, std::size_t k, std::uint64_t seed,
                        CenterRule center = CenterRule::mean, std::size_t max_iterations = 300);

struct AnchorLevel {
  std::vector<BoxWH> anchors;
  std::size_t box_count = 0;
  bool fallback = false;  // fewer than k boxes: evenly spaced squares spanning the bin
  bool clamped = false;   // a cluster center left the bin and was pulled back to its edge
};

struct AnchorSet {
  std::vector<double> thresholds;
  std::vector<AnchorLevel> levels;
  std::size_t total() const;
};

struct AnchorOptions {
  std::size_t levels = 5;
  std::size_t per_level = 3;
  std::uint64_t seed = 0;
  ScaleRule scale = ScaleRule::geometric_mean;
  CenterRule center = CenterRule::mean;
};

AnchorSet generate_anchors(std::span<const BoxWH> boxes, const AnchorOptions& opts);
AnchorSet generate_anchors(const std::string& annotation_file, const AnchorOptions& opts);

// "level i: (w,h) (w,h) ..." per level, flags as a trailing comment.
std::string to_text(const AnchorSet& set);
// level,index,w,h,fallback,clamped
std::string to_csv(const AnchorSet& set);
// Reads the text form back; thresholds are left empty.
AnchorSet parse_anchor_text(std::string_view text);
AnchorSet load_anchor_file(const std::string& path);

}  // namespace csl::anchors
