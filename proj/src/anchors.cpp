// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cslkit/anchors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "cslkit/error.hpp"
#include "cslkit/rng.hpp"
#include "json.hpp"

namespace csl::anchors {

using nlohmann::json;

double scale_of(const BoxWH& b, ScaleRule rule) {
  return rule == ScaleRule::max_side ? std::max(b.w, b.h) : std::sqrt(b.w * b.h);
}

// ---------------------------------------------------------------------------
// Annotation ingestion

namespace {

double number_at(const json& j, const std::string& where) {
  if (!j.is_number()) throw FormatError(where + ": expected a number");
  return j.get<double>();
}

const json& member(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(where + ": missing '" + key + "'");
  return *it;
}

std::string image_key(const json& id, const std::string& where) {
  if (id.is_number_integer() || id.is_string()) return id.dump();
  throw FormatError(where + ": id must be an integer or string");
}

}  // namespace

LoadedBoxes parse_annotations(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("annotations: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("annotations: document must be an object");

  const json& images = member(doc, "images", "document");
  const json& anns = member(doc, "annotations", "document");
  if (!images.is_array()) throw FormatError("images: expected an array");
  if (!anns.is_array()) throw FormatError("annotations: expected an array");

  std::unordered_map<std::string, std::pair<double, double>> sizes;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string where = "images[" + std::to_string(i) + "]";
    const json& img = images[i];
    if (!img.is_object()) throw FormatError(where + ": expected an object");
    const std::string id = image_key(member(img, "id", where), where + ".id");
    const double w = number_at(member(img, "width", where), where + ".width");
    const double h = number_at(member(img, "height", where), where + ".height");
    if (!(w > 0) || !(h > 0)) throw FormatError(where + ": width and height must be positive");
    if (!sizes.emplace(id, std::make_pair(w, h)).second) throw FormatError(where + ": duplicate id " + id);
  }

  LoadedBoxes out;
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string where = "annotations[" + std::to_string(i) + "]";
    const json& a = anns[i];
    if (!a.is_object()) throw FormatError(where + ": expected an object");
    const std::string id = image_key(member(a, "image_id", where), where + ".image_id");
    auto it = sizes.find(id);
    if (it == sizes.end()) throw FormatError(where + ".image_id: unknown image " + id);
    const json& bbox = member(a, "bbox", where);
    if (!bbox.is_array() || bbox.size() != 4) throw FormatError(where + ".bbox: expected [x,y,w,h]");
    for (std::size_t c = 0; c < 4; ++c) number_at(bbox[c], where + ".bbox[" + std::to_string(c) + "]");
    double w = bbox[2].get<double>() / it->second.first;
    double h = bbox[3].get<double>() / it->second.second;
    if (!(w > 0) || !(h > 0)) {
      ++out.dropped_degenerate;
      continue;
    }
    if (w > 1 || h > 1) {
      ++out.clamped;
      w = std::min(w, 1.0);
      h = std::min(h, 1.0);
    }
    out.boxes.push_back({w, h});
  }
  return out;
}

LoadedBoxes load_boxes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open annotation file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_annotations(ss.str());
}

std::string export_annotations(std::span<const BoxWH> boxes) {
  json doc;
  doc["images"] = json::array({{{"id", 1}, {"width", 1.0}, {"height", 1.0}}});
  json anns = json::array();
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    anns.push_back({{"id", i + 1}, {"image_id", 1}, {"bbox", {0.0, 0.0, boxes[i].w, boxes[i].h}}});
  }
  doc["annotations"] = std::move(anns);
  return doc.dump();
}

// ---------------------------------------------------------------------------
// Binning

double iou_wh(const BoxWH& a, const BoxWH& b) {
  const double inter = std::min(a.w, b.w) * std::min(a.h, b.h);
  return inter / (a.w * a.h + b.w * b.h - inter);
}

std::vector<double> scale_thresholds(std::size_t levels) {
  if (levels < 2) throw SpecError("scale binning needs at least 2 levels");
  std::vector<double> s(levels + 1);
  s[0] = 0.0;
  for (std::size_t i = 1; i <= levels; ++i) s[i] = std::ldexp(1.0, -static_cast<int>(levels - i));
  return s;
}

std::size_t bin_index(double scale, std::span<const double> t) {
  const std::size_t levels = t.size() - 1;
  for (std::size_t i = 0; i + 1 < levels; ++i) {
    if (scale < t[i + 1]) return i;
  }
  return levels - 1;
}

ScaleBins bin_by_scale(std::span<const BoxWH> boxes, std::size_t levels, ScaleRule rule) {
  ScaleBins out;
  out.thresholds = scale_thresholds(levels);
  out.bins.resize(levels);
  for (const auto& b : boxes) out.bins[bin_index(scale_of(b, rule), out.thresholds)].push_back(b);
  return out;
}

// ---------------------------------------------------------------------------
// K-means

double assignment_cost(std::span<const BoxWH> boxes, std::span<const BoxWH> centers,
                       std::span<const std::size_t> assignment) {
  if (boxes.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < boxes.size(); ++i) acc += 1.0 - iou_wh(boxes[i], centers[assignment[i]]);
  return acc / static_cast<double>(boxes.size());
}

namespace {

double dist(const BoxWH& a, const BoxWH& b) { return 1.0 - iou_wh(a, b); }

std::vector<BoxWH> farthest_point_seeds(std::span<const BoxWH> boxes, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<BoxWH> centers;
  centers.push_back(boxes[rng.below(boxes.size())]);
  std::vector<double> nearest(boxes.size(), std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      nearest[i] = std::min(nearest[i], dist(boxes[i], centers.back()));
      if (nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    centers.push_back(boxes[best]);
  }
  return centers;
}

void assign(std::span<const BoxWH> boxes, std::span<const BoxWH> centers, std::vector<std::size_t>& out) {
  out.resize(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    std::size_t best = 0;
    double best_d = dist(boxes[i], centers[0]);
    for (std::size_t c = 1; c < centers.size(); ++c) {
      const double d = dist(boxes[i], centers[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    out[i] = best;
  }
}

BoxWH cluster_center(std::span<const BoxWH> boxes, std::span<const std::size_t> members, CenterRule rule) {
  if (rule == CenterRule::mean) {
    double sw = 0, sh = 0;
    for (auto i : members) {
      sw += boxes[i].w;
      sh += boxes[i].h;
    }
    const double n = static_cast<double>(members.size());
    return {sw / n, sh / n};
  }
  std::size_t best = members[0];
  double best_cost = std::numeric_limits<double>::infinity();
  for (auto i : members) {
    double c = 0;
    for (auto j : members) c += dist(boxes[i], boxes[j]);
    if (c < best_cost) {
      best_cost = c;
      best = i;
    }
  }
  return boxes[best];
}

// Centers of each non-empty cluster; empty clusters take the box farthest from
// its current center, each box used at most once per round.
std::vector<BoxWH> update_centers(std::span<const BoxWH> boxes, std::span<const BoxWH> old,
                                  std::span<const std::size_t> assignment, CenterRule rule) {
  const std::size_t k = old.size();
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < boxes.size(); ++i) members[assignment[i]].push_back(i);
  std::vector<BoxWH> next(k);
  std::vector<bool> taken(boxes.size(), false);
  for (std::size_t c = 0; c < k; ++c) {
    if (!members[c].empty()) {
      next[c] = cluster_center(boxes, members[c], rule);
      continue;
    }
    std::size_t far = boxes.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (taken[i]) continue;
      const double d = dist(boxes[i], old[assignment[i]]);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    taken[far] = true;
    next[c] = boxes[far];
  }
  return next;
}

}  // namespace

KMeansResult kmeans_iou(std::span<const BoxWH> boxes, std::size_t k, std::uint64_t seed, CenterRule center,
                        std::size_t max_iterations) {
  if (k == 0) throw SpecError("kmeans: k must be positive");
  if (boxes.size() < k) {
    throw SpecError("kmeans: " + std::to_string(boxes.size()) + " boxes cannot form " + std::to_string(k) +
                    " clusters");
  }
  std::vector<BoxWH> centers = farthest_point_seeds(boxes, k, seed);
  std::vector<std::size_t> assignment;
  assign(boxes, centers, assignment);
  centers = update_centers(boxes, centers, assignment, center);

  KMeansResult r;
  r.objective.push_back(assignment_cost(boxes, centers, assignment));
  r.iterations = 1;
  std::vector<std::size_t> next_assignment;
  while (r.iterations < max_iterations) {
    assign(boxes, centers, next_assignment);
    if (next_assignment == assignment) {
      r.converged = true;
      break;
    }
    std::vector<BoxWH> next_centers = update_centers(boxes, centers, next_assignment, center);
    const double cost = assignment_cost(boxes, next_centers, next_assignment);
    // The mean is not the IoU-distance minimiser, so a Lloyd step can raise the
    // objective; keep the previous clustering when it would.
    if (cost > r.objective.back()) {
      r.converged = true;
      break;
    }
    assignment.swap(next_assignment);
    centers = std::move(next_centers);
    r.objective.push_back(cost);
    ++r.iterations;
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double aa = centers[a].w * centers[a].h, ab = centers[b].w * centers[b].h;
    if (aa != ab) return aa < ab;
    return centers[a].w < centers[b].w;
  });
  std::vector<std::size_t> rank(k);
  r.centers.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    r.centers[i] = centers[order[i]];
    rank[order[i]] = i;
  }
  r.assignment.resize(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) r.assignment[i] = rank[assignment[i]];
  return r;
}

// ---------------------------------------------------------------------------
// Anchor sets

std::size_t AnchorSet::total() const {
  std::size_t n = 0;
  for (const auto& l : levels) n += l.anchors.size();
  return n;
}

namespace {

// Rescales `b` so its scale sits inside [lo, hi) (hi inclusive when `top`).
BoxWH clamp_to_bin(BoxWH b, double lo, double hi, bool top, ScaleRule rule, bool& moved) {
  double s = scale_of(b, rule);
  if (s < lo) {
    moved = true;
    const double f = lo / s;
    b.w = std::min(b.w * f, 1.0);
    b.h = std::min(b.h * f, 1.0);
    if (rule == ScaleRule::geometric_mean && b.w * b.h < lo * lo) {
      // One side saturated at 1; grow the other.
      if (b.w >= 1.0) b.h = std::min(lo * lo, 1.0);
      else b.w = std::min(lo * lo, 1.0);
    }
    while (scale_of(b, rule) < lo) {
      b.w = std::min(std::nextafter(b.w, 2.0), 1.0);
      b.h = std::min(std::nextafter(b.h, 2.0), 1.0);
    }
  } else if (!top && s >= hi) {
    moved = true;
    const double f = hi / s;
    b.w *= f;
    b.h *= f;
    while (scale_of(b, rule) >= hi) {
      b.w = std::nextafter(b.w, 0.0);
      b.h = std::nextafter(b.h, 0.0);
    }
  }
  return b;
}

std::vector<BoxWH> fallback_anchors(double lo, double hi, std::size_t k) {
  std::vector<BoxWH> out(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double s = lo + (hi - lo) * static_cast<double>(j + 1) / static_cast<double>(k + 1);
    out[j] = {s, s};
  }
  return out;
}

}  // namespace

AnchorSet generate_anchors(std::span<const BoxWH> boxes, const AnchorOptions& opts) {
  if (opts.per_level == 0) throw SpecError("anchors: per-level count must be positive");
  const ScaleBins bins = bin_by_scale(boxes, opts.levels, opts.scale);
  AnchorSet set;
  set.thresholds = bins.thresholds;
  set.levels.resize(opts.levels);
  for (std::size_t i = 0; i < opts.levels; ++i) {
    AnchorLevel& level = set.levels[i];
    const auto& bin = bins.bins[i];
    const double lo = bins.thresholds[i], hi = bins.thresholds[i + 1];
    const bool top = i + 1 == opts.levels;
    level.box_count = bin.size();
    if (bin.size() < opts.per_level) {
      level.fallback = true;
      level.anchors = fallback_anchors(lo, hi, opts.per_level);
      continue;
    }
    KMeansResult km = kmeans_iou(bin, opts.per_level, opts.seed + i, opts.center);
    for (auto& a : km.centers) a = clamp_to_bin(a, lo, hi, top, opts.scale, level.clamped);
    level.anchors = std::move(km.centers);
  }
  return set;
}

AnchorSet generate_anchors(const std::string& annotation_file, const AnchorOptions& opts) {
  LoadedBoxes loaded = load_boxes(annotation_file);
  return generate_anchors(loaded.boxes, opts);
}

// ---------------------------------------------------------------------------
// Text and CSV

namespace {

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

std::string to_text(const AnchorSet& set) {
  std::ostringstream out;
  for (std::size_t i = 0; i < set.levels.size(); ++i) {
    const auto& l = set.levels[i];
    out << "level " << i << ":";
    for (const auto& a : l.anchors) out << " (" << fmt(a.w) << "," << fmt(a.h) << ")";
    if (l.fallback) out << "  # fallback";
    if (l.clamped) out << "  # clamped";
    out << "\n";
  }
  return out.str();
}

std::string to_csv(const AnchorSet& set) {
  std::ostringstream out;
  out << "level,index,w,h,fallback,clamped\n";
  for (std::size_t i = 0; i < set.levels.size(); ++i) {
    const auto& l = set.levels[i];
    for (std::size_t j = 0; j < l.anchors.size(); ++j) {
      out << i << "," << j << "," << fmt(l.anchors[j].w) << "," << fmt(l.anchors[j].h) << ","
          << (l.fallback ? 1 : 0) << "," << (l.clamped ? 1 : 0) << "\n";
    }
  }
  return out.str();
}

namespace {

double parse_double(std::string_view s, std::size_t line) {
  double v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) {
    throw FormatError("anchor file line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

AnchorSet parse_anchor_text(std::string_view text) {
  AnchorSet set;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    AnchorLevel level;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      std::string_view comment = line.substr(hash);
      level.fallback = comment.find("fallback") != std::string_view::npos;
      level.clamped = comment.find("clamped") != std::string_view::npos;
      line = line.substr(0, hash);
    }
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string prefix = "level " + std::to_string(set.levels.size()) + ":";
    if (line.substr(0, prefix.size()) != prefix) {
      throw FormatError("anchor file line " + std::to_string(line_no) + ": expected '" + prefix + "'");
    }
    std::string_view rest = line.substr(prefix.size());
    while (true) {
      const auto open = rest.find('(');
      if (open == std::string_view::npos) break;
      const auto close = rest.find(')', open);
      const auto comma = rest.find(',', open);
      if (close == std::string_view::npos || comma == std::string_view::npos || comma > close) {
        throw FormatError("anchor file line " + std::to_string(line_no) + ": expected (w,h)");
      }
      BoxWH a{parse_double(rest.substr(open + 1, comma - open - 1), line_no),
              parse_double(rest.substr(comma + 1, close - comma - 1), line_no)};
      if (!(a.w > 0) || !(a.h > 0)) {
        throw FormatError("anchor file line " + std::to_string(line_no) + ": anchors must be positive");
      }
      level.anchors.push_back(a);
      rest = rest.substr(close + 1);
    }
    if (level.anchors.empty()) {
      throw FormatError("anchor file line " + std::to_string(line_no) + ": no anchors");
    }
    set.levels.push_back(std::move(level));
  }
  if (set.levels.empty()) throw FormatError("anchor file: no levels");
  return set;
}

AnchorSet load_anchor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open anchor file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_anchor_text(ss.str());
}

}  // namespace csl::anchors
