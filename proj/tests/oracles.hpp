// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <tuple>
#include <vector>

#include "cslkit/anchors.hpp"
#include "cslkit/detect.hpp"

// Reference implementations written independently of the library code.
namespace csl::testing::oracle {

using anchors::BoxWH;
using anchors::iou_wh;
using detect::Detection;

// Cost of the partition induced by nearest-seed assignment, against its means.
inline double one_lloyd_pass(std::span<const BoxWH> boxes, const std::vector<BoxWH>& seeds) {
  const std::size_t k = seeds.size();
  std::vector<std::size_t> a(boxes.size());
  std::vector<double> sw(k, 0), sh(k, 0), cnt(k, 0);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    double best = -1;
    for (std::size_t j = 0; j < k; ++j) {
      const double v = iou_wh(boxes[i], seeds[j]);
      if (v > best) {
        best = v;
        a[i] = j;
      }
    }
    sw[a[i]] += boxes[i].w;
    sh[a[i]] += boxes[i].h;
    cnt[a[i]] += 1;
  }
  double cost = 0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const BoxWH c{sw[a[i]] / cnt[a[i]], sh[a[i]] / cnt[a[i]]};
    cost += 1.0 - iou_wh(boxes[i], c);
  }
  return cost / static_cast<double>(boxes.size());
}

// Best single Lloyd pass over every k-subset of boxes used as seeds.
inline double exhaustive_seeding(std::span<const BoxWH> boxes, std::size_t k) {
  const std::size_t n = boxes.size();
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
  double best = std::numeric_limits<double>::infinity();
  do {
    std::vector<BoxWH> seeds;
    for (std::size_t i = 0; i < n; ++i)
      if (pick[i]) seeds.push_back(boxes[i]);
    best = std::min(best, one_lloyd_pass(boxes, seeds));
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

// k well-separated sizes with 3% jitter, n boxes round-robin.
inline std::vector<BoxWH> planted_boxes(std::mt19937_64& gen, std::size_t n, std::size_t k) {
  std::uniform_real_distribution<double> u(0.05, 0.9);
  std::uniform_real_distribution<double> jitter(0.97, 1.03);
  std::vector<BoxWH> centers;
  while (centers.size() < k) {
    const BoxWH c{u(gen), u(gen)};
    bool far = true;
    for (const auto& o : centers) far = far && iou_wh(c, o) < 0.5;
    if (far) centers.push_back(c);
  }
  std::vector<BoxWH> boxes;
  for (std::size_t i = 0; i < n; ++i) {
    const BoxWH& c = centers[i % k];
    boxes.push_back({c.w * jitter(gen), c.h * jitter(gen)});
  }
  std::shuffle(boxes.begin(), boxes.end(), gen);
  return boxes;
}

// Direct transcription: pick the best remaining, decay the rest, recurse.
inline void soft_nms_step(std::vector<Detection> rest, double sigma, double thresh, std::vector<Detection>& out) {
  std::erase_if(rest, [&](const Detection& d) { return d.score < thresh; });
  if (rest.empty()) return;
  std::size_t best = 0;
  for (std::size_t i = 1; i < rest.size(); ++i) {
    const auto& a = rest[i];
    const auto& b = rest[best];
    const auto ka = std::make_tuple(-a.score, a.class_id, a.x, a.y, a.w, a.h);
    const auto kb = std::make_tuple(-b.score, b.class_id, b.x, b.y, b.w, b.h);
    if (ka < kb) best = i;
  }
  const Detection d = rest[best];
  out.push_back(d);
  rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(best));
  for (auto& r : rest) {
    if (r.class_id != d.class_id) continue;
    const double x1 = std::max(d.x - d.w / 2, r.x - r.w / 2), x2 = std::min(d.x + d.w / 2, r.x + r.w / 2);
    const double y1 = std::max(d.y - d.h / 2, r.y - r.h / 2), y2 = std::min(d.y + d.h / 2, r.y + r.h / 2);
    const double inter = std::max(0.0, x2 - x1) * std::max(0.0, y2 - y1);
    const double uni = d.w * d.h + r.w * r.h - inter;
    const double iou = uni > 0 ? inter / uni : 0.0;
    r.score *= std::exp(-iou * iou / sigma);
  }
  soft_nms_step(std::move(rest), sigma, thresh, out);
}

inline std::vector<Detection> soft_nms(std::vector<Detection> dets, double sigma, double thresh) {
  std::vector<Detection> out;
  soft_nms_step(std::move(dets), sigma, thresh, out);
  return out;
}

}  // namespace csl::testing::oracle
