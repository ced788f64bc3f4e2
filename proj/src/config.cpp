// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cslkit/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cslkit/error.hpp"
#include "json.hpp"

namespace csl {

using nlohmann::json;

const char* to_string(MiddleRule r) {
  switch (r) {
    case MiddleRule::geometric: return "geometric";
    case MiddleRule::arithmetic: return "arithmetic";
    case MiddleRule::pow2: return "pow2";
  }
  return "unknown";
}

const char* to_string(NetworkKind k) {
  switch (k) {
    case NetworkKind::detector: return "detector";
    case NetworkKind::conv: return "conv";
    case NetworkKind::csl_module: return "csl_module";
  }
  return "unknown";
}

DetectorConfig default_config() {
  DetectorConfig c;
  c.input_size = 416;
  c.num_classes = 80;
  c.anchors_per_level = 3;
  c.backbone.stem_ch = 32;
  c.backbone.expansion = 3;
  c.backbone.groups = {{2, 48, true}, {4, 64, true}, {6, 256, true}, {4, 448, true}};
  c.backbone.taps = {1, 2, 3};
  c.fpn.width = 96;
  c.fpn.repeats = 3;
  return c;
}

DetectorConfig toy_config() {
  DetectorConfig c;
  c.input_size = 64;
  c.num_classes = 2;
  c.anchors_per_level = 3;
  c.backbone.stem_ch = 8;
  c.backbone.expansion = 3;
  c.backbone.groups = {{1, 8, true}, {1, 8, true}, {1, 8, true}, {1, 8, true}};
  c.backbone.taps = {1, 2, 3};
  c.fpn.width = 8;
  c.fpn.repeats = 1;
  return c;
}

namespace {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  ~Reader() = default;

  // Call once every known key has been read.
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(child(k), "unknown key");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  std::size_t count(const std::string& key, std::size_t fallback, std::size_t min = 1) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(child(key), "expected an integer");
    const auto n = v.get<long long>();
    if (n < static_cast<long long>(min)) throw ConfigError(child(key), "must be >= " + std::to_string(min));
    return static_cast<std::size_t>(n);
  }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(child(key), "expected true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(child(key), "expected a string");
    return v.get<std::string>();
  }

  const json* node(const std::string& key) {
    if (!has(key)) return nullptr;
    return &j_.at(key);
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_backbone(const json& j, BackboneSpec& bb) {
  Reader r(j, "backbone");
  bb.stem_ch = r.count("stem_channels", bb.stem_ch);
  bb.expansion = r.count("expansion", bb.expansion);
  bb.kernel = r.count("kernel", bb.kernel);
  if (bb.kernel % 2 == 0) throw ConfigError("backbone.kernel", "must be odd");
  bb.se_reduction = r.count("se_reduction", bb.se_reduction);
  if (const json* groups = r.node("groups")) {
    if (!groups->is_array() || groups->empty()) throw ConfigError("backbone.groups", "expected a non-empty array");
    bb.groups.clear();
    for (std::size_t i = 0; i < groups->size(); ++i) {
      const std::string gp = "backbone.groups[" + std::to_string(i) + "]";
      Reader g((*groups)[i], gp);
      BackboneGroup grp;
      grp.modules = g.count("modules", 1);
      grp.out_ch = g.count("out_ch", 0);
      if (grp.out_ch % 2 != 0) throw ConfigError(gp + ".out_ch", "must be even");
      grp.downsample = g.flag("downsample", true);
      g.finish();
      bb.groups.push_back(grp);
    }
  }
  if (const json* taps = r.node("taps")) {
    if (!taps->is_array() || taps->size() != 3) throw ConfigError("backbone.taps", "expected three group indices");
    for (std::size_t k = 0; k < 3; ++k) {
      const json& v = (*taps)[k];
      const std::string tp = "backbone.taps[" + std::to_string(k) + "]";
      if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(tp, "expected a group index");
      bb.taps[k] = v.get<std::size_t>();
      if (bb.taps[k] >= bb.groups.size()) throw ConfigError(tp, "no such group");
    }
  }
  r.finish();
}

void read_fpn(const json& j, FpnSpec& fpn) {
  Reader r(j, "fpn");
  fpn.width = r.count("width", fpn.width);
  if (fpn.width % 2 != 0) throw ConfigError("fpn.width", "must be even");
  fpn.repeats = r.count("repeats", fpn.repeats, 0);
  fpn.expansion = r.count("expansion", fpn.expansion);
  const std::string rule = r.text("middle_rule", to_string(fpn.middle_rule));
  if (rule == "geometric") {
    fpn.middle_rule = MiddleRule::geometric;
  } else if (rule == "arithmetic") {
    fpn.middle_rule = MiddleRule::arithmetic;
  } else if (rule == "pow2") {
    fpn.middle_rule = MiddleRule::pow2;
  } else {
    throw ConfigError("fpn.middle_rule", "expected geometric, arithmetic or pow2, got '" + rule + "'");
  }
  r.finish();
}

void read_layer(const json& j, LayerSpec& layer) {
  Reader r(j, "layer");
  layer.in_ch = r.count("in_channels", layer.in_ch);
  layer.out_ch = r.count("out_channels", layer.out_ch);
  layer.kernel = r.count("kernel", layer.kernel);
  if (layer.kernel % 2 == 0) throw ConfigError("layer.kernel", "must be odd");
  layer.stride = r.count("stride", layer.stride);
  layer.expansion = r.count("expansion", layer.expansion);
  layer.variant = r.text("variant", layer.variant);
  if (layer.variant != "plain" && layer.variant != "attention" && layer.variant != "downsample") {
    throw ConfigError("layer.variant", "expected plain, attention or downsample, got '" + layer.variant + "'");
  }
  r.finish();
}

}  // namespace

DetectorConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed config: ") + e.what());
  }
  DetectorConfig cfg = default_config();
  Reader r(j, "");
  const std::string kind = r.text("kind", "detector");
  if (kind == "detector") {
    cfg.kind = NetworkKind::detector;
  } else if (kind == "conv") {
    cfg.kind = NetworkKind::conv;
  } else if (kind == "csl_module") {
    cfg.kind = NetworkKind::csl_module;
  } else {
    throw ConfigError("kind", "expected detector, conv or csl_module, got '" + kind + "'");
  }
  if (const json* layer = r.node("layer")) read_layer(*layer, cfg.layer);
  cfg.input_size = r.count("input_size", cfg.input_size);
  cfg.num_classes = r.count("num_classes", cfg.num_classes);
  cfg.anchors_per_level = r.count("anchors_per_level", cfg.anchors_per_level);
  if (r.has("seed")) {
    const json& v = j.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError("seed", "expected a non-negative integer");
    }
    cfg.seed = v.get<std::uint64_t>();
  }
  if (const json* bb = r.node("backbone")) read_backbone(*bb, cfg.backbone);
  if (const json* fpn = r.node("fpn")) read_fpn(*fpn, cfg.fpn);
  if (const json* head = r.node("head")) {
    Reader h(*head, "head");
    const std::string layout = h.text("layout", "anchor_major");
    if (layout != "anchor_major") throw ConfigError("head.layout", "only anchor_major is supported");
    h.finish();
  }
  r.finish();
  return cfg;
}

DetectorConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const DetectorConfig& cfg) {
  json groups = json::array();
  for (const auto& g : cfg.backbone.groups) {
    groups.push_back({{"modules", g.modules}, {"out_ch", g.out_ch}, {"downsample", g.downsample}});
  }
  json j = {
      {"kind", to_string(cfg.kind)},
      {"input_size", cfg.input_size},
      {"num_classes", cfg.num_classes},
      {"anchors_per_level", cfg.anchors_per_level},
      {"seed", cfg.seed},
      {"backbone",
       {{"stem_channels", cfg.backbone.stem_ch},
        {"expansion", cfg.backbone.expansion},
        {"kernel", cfg.backbone.kernel},
        {"se_reduction", cfg.backbone.se_reduction},
        {"groups", groups},
        {"taps", cfg.backbone.taps}}},
      {"fpn",
       {{"width", cfg.fpn.width},
        {"repeats", cfg.fpn.repeats},
        {"expansion", cfg.fpn.expansion},
        {"middle_rule", to_string(cfg.fpn.middle_rule)}}},
      {"head", {{"layout", "anchor_major"}}},
  };
  if (cfg.kind != NetworkKind::detector) {
    j["layer"] = {{"in_channels", cfg.layer.in_ch}, {"out_channels", cfg.layer.out_ch},
                  {"kernel", cfg.layer.kernel},     {"stride", cfg.layer.stride},
                  {"expansion", cfg.layer.expansion}, {"variant", cfg.layer.variant}};
  }
  return j.dump(2) + "\n";
}

}  // namespace csl
