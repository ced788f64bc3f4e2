// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cslkit/detect.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "cslkit/error.hpp"
#include "json.hpp"

namespace csl::detect {

const char* to_string(WhMode m) { return m == WhMode::exp ? "exp" : "additive"; }

WhMode parse_wh_mode(const std::string& s) {
  if (s == "exp") return WhMode::exp;
  if (s == "additive") return WhMode::additive;
  throw Error("unknown decode mode '" + s + "' (expected exp or additive)");
}

namespace {

double sigmoid(double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); }

double clamp_unit(double v, bool& clamped) {
  if (v < 0.0) {
    clamped = true;
    return 0.0;
  }
  if (v > 1.0) {
    clamped = true;
    return 1.0;
  }
  return v;
}

}  // namespace

DecodedWH decode_wh(const BoxWH& anchor, double tw, double th, WhMode mode) {
  DecodedWH r;
  if (mode == WhMode::exp) {
    r.w = anchor.w * std::exp(tw);
    r.h = anchor.h * std::exp(th);
  } else {
    r.w = anchor.w + tw;
    r.h = anchor.h + th;
  }
  r.w = clamp_unit(r.w, r.clamped);
  r.h = clamp_unit(r.h, r.clamped);
  return r;
}

LevelLayout infer_layout(const Shape& raw, std::size_t anchors_per_level) {
  if (raw.n != 1) throw ShapeError("head output must have batch 1, got " + raw.str());
  if (anchors_per_level == 0 || raw.c % anchors_per_level != 0) {
    throw ShapeError("head output " + raw.str() + " has " + std::to_string(raw.c) + " channels, not a multiple of " +
                     std::to_string(anchors_per_level) + " anchors");
  }
  const std::size_t per = raw.c / anchors_per_level;
  if (per < 6) {
    throw ShapeError("head output " + raw.str() + " leaves " + std::to_string(per) +
                     " channels per anchor; need 5 + at least one class");
  }
  return {anchors_per_level, per - 5};
}

std::vector<Detection> decode_level(const Tensor<float>& raw, std::span<const BoxWH> anchors, WhMode mode,
                                    double score_thresh, std::size_t level, DecodeStats* stats) {
  const Shape& s = raw.shape();
  const LevelLayout lay = infer_layout(s, anchors.size());
  const double gw = static_cast<double>(s.w), gh = static_cast<double>(s.h);
  std::vector<Detection> out;
  for (std::size_t a = 0; a < lay.anchors; ++a) {
    for (std::size_t y = 0; y < s.h; ++y) {
      for (std::size_t x = 0; x < s.w; ++x) {
        const auto field = [&](std::size_t f) { return static_cast<double>(raw.at(0, lay.channel(a, f), y, x)); };
        const double obj = sigmoid(field(4));
        bool any = false;
        Detection d;
        for (std::size_t c = 0; c < lay.num_classes; ++c) {
          const double score = obj * sigmoid(field(5 + c));
          if (stats) ++stats->candidates;
          if (score < score_thresh) continue;
          if (!any) {
            bool clamped = false;
            d.x = clamp_unit((static_cast<double>(x) + sigmoid(field(0))) / gw, clamped);
            d.y = clamp_unit((static_cast<double>(y) + sigmoid(field(1))) / gh, clamped);
            const DecodedWH wh = decode_wh(anchors[a], field(2), field(3), mode);
            d.w = wh.w;
            d.h = wh.h;
            d.level = level;
            if (stats && (clamped || wh.clamped)) ++stats->clamped;
            any = true;
          }
          d.class_id = c;
          d.score = score;
          out.push_back(d);
        }
      }
    }
  }
  return out;
}

std::vector<Detection> decode_all(std::span<const Tensor<float>> raw, const anchors::AnchorSet& set, WhMode mode,
                                  double score_thresh, DecodeStats* stats) {
  if (raw.size() != set.levels.size()) {
    throw ShapeError("decode: " + std::to_string(raw.size()) + " head outputs for " +
                     std::to_string(set.levels.size()) + " anchor levels");
  }
  std::vector<Detection> out;
  for (std::size_t l = 0; l < raw.size(); ++l) {
    auto d = decode_level(raw[l], set.levels[l].anchors, mode, score_thresh, l, stats);
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

double box_iou(const Detection& a, const Detection& b) {
  const double ix = std::min(a.x + a.w / 2, b.x + b.w / 2) - std::max(a.x - a.w / 2, b.x - b.w / 2);
  const double iy = std::min(a.y + a.h / 2, b.y + b.h / 2) - std::max(a.y - a.h / 2, b.y - b.h / 2);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0 ? inter / uni : 0.0;
}

bool ranks_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.class_id != b.class_id) return a.class_id < b.class_id;
  if (a.x != b.x) return a.x < b.x;
  if (a.y != b.y) return a.y < b.y;
  if (a.w != b.w) return a.w < b.w;
  return a.h < b.h;
}

std::vector<Detection> soft_nms(std::vector<Detection> dets, double sigma, double final_thresh) {
  if (!(sigma > 0)) throw Error("soft_nms: sigma must be positive");
  std::erase_if(dets, [&](const Detection& d) { return d.score < final_thresh; });
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  while (!dets.empty()) {
    auto best = std::min_element(dets.begin(), dets.end(), ranks_before);
    const Detection sel = *best;
    dets.erase(best);
    kept.push_back(sel);
    for (auto& d : dets) {
      if (d.class_id != sel.class_id) continue;
      const double iou = box_iou(sel, d);
      d.score *= std::exp(-(iou * iou) / sigma);
    }
    std::erase_if(dets, [&](const Detection& d) { return d.score < final_thresh; });
  }
  return kept;
}

std::string to_coco_results(std::span<const Detection> dets, long long image_id, double image_w, double image_h) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& d : dets) {
    out.push_back({{"image_id", image_id},
                   {"category_id", d.class_id},
                   {"bbox", {(d.x - d.w / 2) * image_w, (d.y - d.h / 2) * image_h, d.w * image_w, d.h * image_h}},
                   {"score", d.score}});
  }
  return out.dump(1);
}

std::string render_table(std::span<const Detection> dets) {
  std::ostringstream out;
  out << std::left << std::setw(6) << "level" << std::setw(7) << "class" << std::right << std::setw(10) << "score"
      << std::setw(10) << "x" << std::setw(10) << "y" << std::setw(10) << "w" << std::setw(10) << "h" << "\n";
  out << std::fixed << std::setprecision(5);
  for (const auto& d : dets) {
    out << std::left << std::setw(6) << d.level << std::setw(7) << d.class_id << std::right << std::setw(10)
        << d.score << std::setw(10) << d.x << std::setw(10) << d.y << std::setw(10) << d.w << std::setw(10) << d.h
        << "\n";
  }
  out << dets.size() << " detections\n";
  return out.str();
}

}  // namespace csl::detect
