// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

// cslkit: summarise and verify CSL networks, generate anchors, decode head
// outputs, and run the gradient-check suite.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cslkit/anchors.hpp"
#include "cslkit/config.hpp"
#include "cslkit/cost_model.hpp"
#include "cslkit/csl_blocks.hpp"
#include "cslkit/detect.hpp"
#include "cslkit/error.hpp"
#include "cslkit/executor.hpp"
#include "cslkit/gradcheck.hpp"
#include "cslkit/kernels.hpp"
#include "cslkit/rng.hpp"
#include "cslkit/tensor_io.hpp"
#include "cslkit/verify.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

// Verification failures propagate as this exit code.
struct Failed {
  std::string message;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("CSLKIT_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw csl::ConfigError("CSLKIT_SEED", std::string("not an unsigned integer: '") + env + "'");
  }
  return 0;
}

struct Common {
  std::string config;
  std::optional<std::size_t> input_size;
  std::optional<std::uint64_t> seed;

  csl::DetectorConfig load() const {
    csl::DetectorConfig cfg = config.empty() ? csl::default_config() : csl::load_config(config);
    if (input_size) cfg.input_size = *input_size;
    return cfg;
  }
  std::uint64_t resolved_seed() const { return seed ? *seed : default_seed(); }
};

void add_config_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "Network config (JSON); default network when omitted")
      ->check(CLI::ExistingFile);
  cmd->add_option("--input-size", c.input_size, "Override the config's input size")
      ->check(CLI::Range(std::size_t{8}, std::size_t{4096}));
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw csl::FormatError("cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------------------

int cmd_summary(const Common& c, const std::string& format) {
  const csl::DetectorConfig cfg = c.load();
  const csl::Network net = csl::build_network(cfg);
  const csl::cost::CostReport report = csl::cost::network_cost(net);
  if (format == "csv") {
    std::cout << report.render_csv();
    return kOk;
  }
  std::cout << report.render_table();
  if (cfg.kind == csl::NetworkKind::detector && cfg.input_size == 416 && cfg.num_classes == 80) {
    std::cout << csl::cost::calibration(report).render() << "\n";
  }
  return kOk;
}

int cmd_verify(const Common& c, std::size_t trials, const std::string& corrupt) {
  const csl::DetectorConfig cfg = c.load();
  csl::verify::Options opts;
  opts.trials = trials;
  opts.seed = c.resolved_seed();
  opts.corrupt_layer = corrupt;
  std::cout << "backend: " << csl::kernels::to_string(csl::kernels::active_backend()) << "\n";
  const csl::verify::Report r = csl::verify::run(cfg, opts);
  std::cout << r.render();
  return r.passed() ? kOk : kFailed;
}

struct AnchorArgs {
  std::string annotations;
  std::size_t levels = 5;
  std::size_t per_level = 3;
  std::optional<std::uint64_t> seed;
  std::string out = "anchors";
  std::string scale_rule = "geometric";
  std::string center = "mean";
};

int cmd_anchors(const AnchorArgs& a) {
  const csl::anchors::LoadedBoxes loaded = csl::anchors::load_boxes(a.annotations);
  std::cout << "loaded " << loaded.boxes.size() << " boxes";
  if (loaded.dropped_degenerate) std::cout << ", dropped " << loaded.dropped_degenerate << " degenerate";
  if (loaded.clamped) std::cout << ", clamped " << loaded.clamped << " to the image";
  std::cout << "\n";
  if (loaded.boxes.empty()) throw Failed{"annotation file contains no usable boxes"};

  csl::anchors::AnchorOptions opts;
  opts.levels = a.levels;
  opts.per_level = a.per_level;
  opts.seed = a.seed ? *a.seed : default_seed();
  opts.scale = a.scale_rule == "max" ? csl::anchors::ScaleRule::max_side : csl::anchors::ScaleRule::geometric_mean;
  opts.center = a.center == "medoid" ? csl::anchors::CenterRule::medoid : csl::anchors::CenterRule::mean;
  const csl::anchors::AnchorSet set = csl::anchors::generate_anchors(loaded.boxes, opts);

  std::size_t widest = 1;
  for (const auto& l : set.levels) widest = std::max(widest, l.box_count);
  std::cout << "bin occupancy:\n";
  for (std::size_t i = 0; i < set.levels.size(); ++i) {
    const auto& l = set.levels[i];
    const std::size_t bar = (l.box_count * 40 + widest - 1) / widest;
    std::cout << "  level " << i << " [" << std::setw(8) << set.thresholds[i] << ", " << std::setw(8)
              << set.thresholds[i + 1] << (i + 1 == set.levels.size() ? "]" : ")") << " " << std::setw(7)
              << l.box_count << " " << std::string(bar, '#') << "\n";
    if (l.fallback) {
      std::cerr << "warning: level " << i << " has " << l.box_count << " boxes (< " << a.per_level
                << "); using evenly spaced fallback anchors\n";
    }
    if (l.clamped) std::cerr << "warning: level " << i << " anchors clamped to the bin edge\n";
  }
  write_file(a.out + ".txt", csl::anchors::to_text(set));
  write_file(a.out + ".csv", csl::anchors::to_csv(set));
  std::cout << csl::anchors::to_text(set);
  std::cout << "wrote " << a.out << ".txt and " << a.out << ".csv (" << set.total() << " anchors)\n";
  return kOk;
}

struct DecodeArgs {
  std::string raw;
  bool random = false;
  std::string anchors;
  std::string weights;
  std::string mode = "exp";
  double sigma = 0.5;
  double thresh = 0.3;
  double final_thresh = 0.001;
  long long image_id = 0;
  std::string format = "coco";
  std::string out;
  std::string export_raw;
  std::string export_weights;
};

int cmd_decode(const Common& c, const DecodeArgs& a) {
  const csl::DetectorConfig cfg = c.load();
  if (cfg.kind != csl::NetworkKind::detector) throw csl::ConfigError("kind", "decode needs a detector config");
  const csl::anchors::AnchorSet anchors = csl::anchors::load_anchor_file(a.anchors);
  if (anchors.levels.size() != 5) {
    throw csl::FormatError(a.anchors + ": expected 5 anchor levels, found " + std::to_string(anchors.levels.size()));
  }
  for (std::size_t l = 0; l < anchors.levels.size(); ++l) {
    if (anchors.levels[l].anchors.size() != cfg.anchors_per_level) {
      throw csl::FormatError(a.anchors + ": level " + std::to_string(l) + " has " +
                             std::to_string(anchors.levels[l].anchors.size()) + " anchors, config expects " +
                             std::to_string(cfg.anchors_per_level));
    }
  }

  std::vector<csl::Tensor<float>> raw;
  if (a.random) {
    const csl::Network net = csl::build_detector(cfg);
    const csl::Weights w =
        a.weights.empty() ? csl::Weights::initialize(net, cfg.seed) : csl::io::load_weights(a.weights, net);
    if (!a.export_weights.empty()) csl::io::save_weights(a.export_weights, net, w);
    csl::Rng rng(c.resolved_seed());
    csl::Tensor<float> image(net.node(net.inputs().front()).shape);
    for (auto& v : image.data()) v = static_cast<float>(rng.uniform());
    raw = csl::forward<float>(net, w, image);
  } else {
    const csl::io::NamedTensors named = csl::io::load_named(a.raw);
    if (named.size() != 5) {
      throw csl::FormatError(a.raw + ": expected 5 head tensors, found " + std::to_string(named.size()));
    }
    for (std::size_t l = 0; l < named.size(); ++l) {
      const std::string want = "level" + std::to_string(l);
      if (named[l].first != want) {
        throw csl::FormatError(a.raw + ": tensor " + std::to_string(l) + " is '" + named[l].first + "', expected '" +
                               want + "'");
      }
      if (named[l].second.shape().c != cfg.head_channels()) {
        throw csl::ShapeError(a.raw + ": " + want + " has " + std::to_string(named[l].second.shape().c) +
                              " channels, config head expects " + std::to_string(cfg.head_channels()));
      }
      raw.push_back(named[l].second);
    }
  }
  if (!a.export_raw.empty()) {
    csl::io::NamedTensors named;
    for (std::size_t l = 0; l < raw.size(); ++l) named.emplace_back("level" + std::to_string(l), raw[l]);
    csl::io::save_named(a.export_raw, named);
  }

  csl::detect::DecodeStats stats;
  auto dets = csl::detect::decode_all(raw, anchors, csl::detect::parse_wh_mode(a.mode), a.thresh, &stats);
  const std::size_t before = dets.size();
  dets = csl::detect::soft_nms(std::move(dets), a.sigma, a.final_thresh);

  const double side = static_cast<double>(cfg.input_size);
  const std::string text = a.format == "table" ? csl::detect::render_table(dets)
                                               : csl::detect::to_coco_results(dets, a.image_id, side, side) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file(a.out, text);
  }
  std::cerr << before << " candidates above " << a.thresh << ", " << dets.size() << " after soft-NMS";
  if (stats.clamped) std::cerr << ", " << stats.clamped << " boxes clamped to [0,1]";
  std::cerr << "\n";
  return kOk;
}

int cmd_gradcheck(const std::string& size, std::optional<std::uint64_t> seed, bool fault) {
  if (size != "toy") throw csl::ConfigError("--size", "only 'toy' is supported");
  csl::gradcheck::Options opts;
  opts.seed = seed ? *seed : default_seed();
  opts.inject_fault = fault;
  const csl::DetectorConfig toy = csl::toy_config();
  std::cout << "toy detector: input " << toy.input_size << "x" << toy.input_size << ", width " << toy.fpn.width
            << ", repeats " << toy.fpn.repeats << ", classes " << toy.num_classes << "; eps " << opts.eps
            << ", f64\n";
  const csl::gradcheck::Report r = csl::gradcheck::run_suite(opts);
  std::cout << r.render();
  std::cout << (r.passed() ? "PASS" : "FAIL") << "\n";
  return r.passed() ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cslkit: CSL network builder, cost verifier and detection toolchain"};
  app.require_subcommand(1);

  Common common;
  std::string format = "table";
  auto* summary = app.add_subcommand("summary", "Per-layer output shapes, analytic MACs and parameters");
  add_config_flags(summary, common);
  summary->add_option("--format", format, "table or csv")->check(CLI::IsMember({"table", "csv"}));

  std::size_t trials = 1;
  std::string corrupt;
  auto* verify = app.add_subcommand("verify", "Compare executed MACs with the analytic model");
  add_config_flags(verify, common);
  verify->add_option("--trials", trials, "Random inputs to evaluate")->check(CLI::Range(1, 100));
  verify->add_option("--seed", common.seed, "Input seed (default 0, or CSLKIT_SEED)");
  verify->add_option("--fault-inject", corrupt, "Corrupt the analytic count of this layer")->group("");

  AnchorArgs aa;
  auto* anchors = app.add_subcommand("anchors", "Scale-binned IoU k-means anchors from COCO annotations");
  anchors->add_option("--annotations", aa.annotations, "COCO-style annotation file")
      ->required()
      ->check(CLI::ExistingFile);
  anchors->add_option("--levels", aa.levels, "Pyramid levels")->check(CLI::Range(2, 16));
  anchors->add_option("--per-level", aa.per_level, "Anchors per level")->check(CLI::Range(1, 64));
  anchors->add_option("--seed", aa.seed, "Clustering seed (default 0, or CSLKIT_SEED)");
  anchors->add_option("-o,--out", aa.out, "Output prefix; writes PREFIX.txt and PREFIX.csv");
  anchors->add_option("--scale-rule", aa.scale_rule, "geometric (sqrt(w*h)) or max (max(w,h))")
      ->check(CLI::IsMember({"geometric", "max"}));
  anchors->add_option("--center", aa.center, "Cluster center: mean or medoid")
      ->check(CLI::IsMember({"mean", "medoid"}));

  DecodeArgs da;
  auto* decode = app.add_subcommand("decode", "Decode head outputs and apply soft-NMS");
  add_config_flags(decode, common);
  auto* raw_opt = decode->add_option("--raw", da.raw, "Head outputs (named tensors level0..level4)")
                      ->check(CLI::ExistingFile);
  auto* random_opt = decode->add_flag("--random", da.random, "Run the network on a random image instead");
  raw_opt->excludes(random_opt);
  decode->add_option("--anchors", da.anchors, "Anchor text file")->required()->check(CLI::ExistingFile);
  decode->add_option("--weights", da.weights, "Weights file for --random")->check(CLI::ExistingFile);
  decode->add_option("--mode", da.mode, "exp or additive")->check(CLI::IsMember({"exp", "additive"}));
  decode->add_option("--sigma", da.sigma, "Soft-NMS Gaussian sigma")->check(CLI::PositiveNumber);
  decode->add_option("--thresh", da.thresh, "Score threshold before soft-NMS")->check(CLI::Range(0.0, 1.0));
  decode->add_option("--final-thresh", da.final_thresh, "Score threshold after soft-NMS")
      ->check(CLI::Range(0.0, 1.0));
  decode->add_option("--image-id", da.image_id, "image_id written to COCO results");
  decode->add_option("--format", da.format, "coco or table")->check(CLI::IsMember({"coco", "table"}));
  decode->add_option("-o,--out", da.out, "Write results here instead of stdout");
  decode->add_option("--seed", common.seed, "Image seed for --random (default 0, or CSLKIT_SEED)");
  decode->add_option("--export-raw", da.export_raw, "Save the head outputs that were decoded");
  decode->add_option("--export-weights", da.export_weights, "Save the weights used by --random");

  std::string size = "toy";
  std::optional<std::uint64_t> gc_seed;
  bool gc_fault = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "Reverse-mode gradients against central differences");
  gradcheck->add_option("--size", size, "Problem size (toy)");
  gradcheck->add_option("--seed", gc_seed, "Seed (default 0, or CSLKIT_SEED)");
  gradcheck->add_flag("--fault-inject", gc_fault, "Perturb one analytic gradient")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*summary) return cmd_summary(common, format);
    if (*verify) return cmd_verify(common, trials, corrupt);
    if (*anchors) return cmd_anchors(aa);
    if (*decode) {
      if (!da.random && da.raw.empty()) {
        std::cerr << "error: decode needs --raw FILE or --random\n";
        return kUsage;
      }
      return cmd_decode(common, da);
    }
    if (*gradcheck) return cmd_gradcheck(size, gc_seed, gc_fault);
  } catch (const Failed& f) {
    std::cerr << "error: " << f.message << "\n";
    return kFailed;
  } catch (const csl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const csl::FormatError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kUsage;
  } catch (const csl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
