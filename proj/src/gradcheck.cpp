// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cslkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <functional>
#include <sstream>

#include "cslkit/csl_blocks.hpp"
#include "cslkit/executor.hpp"
#include "cslkit/rng.hpp"

namespace csl::gradcheck {

namespace {

Tensor<double> random_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(s);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

double loss(const Network& net, const Weights& w, std::span<const Tensor<double>> inputs,
            const std::vector<Tensor<double>>& probes) {
  const auto outs = forward<double>(net, w, inputs);
  double acc = 0.0;
  for (std::size_t k = 0; k < outs.size(); ++k) {
    for (std::size_t i = 0; i < outs[k].size(); ++i) acc += outs[k][i] * probes[k][i];
  }
  return acc;
}

std::vector<std::size_t> coords(std::size_t n, std::size_t max_coords, Rng& rng) {
  std::vector<std::size_t> idx;
  if (max_coords == 0 || n <= max_coords) {
    for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    return idx;
  }
  while (idx.size() < max_coords) {
    const std::size_t i = rng.below(n);
    if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

// FNV-1a, so per-case streams do not depend on the standard library.
std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ull;
  return h;
}

double rel_err(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

}  // namespace

CaseResult check_network(const std::string& name, const Network& net, const Options& opts, double tolerance) {
  Rng rng(opts.seed ^ name_hash(name));
  Weights w = Weights::initialize(net, opts.seed);
  // Non-trivial affine and bias values so their gradients are exercised away from 1/0.
  for (std::size_t p = 0; p < net.params().size(); ++p) {
    const ParamRole role = net.params()[p].role;
    if (role == ParamRole::scale) w[p] = random_tensor(w[p].shape(), rng, 0.5, 1.5);
    if (role == ParamRole::bias || role == ParamRole::shift) w[p] = random_tensor(w[p].shape(), rng, -0.2, 0.2);
  }
  std::vector<Tensor<double>> inputs;
  for (NodeId id : net.inputs()) inputs.push_back(random_tensor(net.node(id).shape, rng));
  std::vector<Tensor<double>> probes;
  for (NodeId id : net.outputs()) probes.push_back(random_tensor(net.node(id).shape, rng));

  TapedForward<double> run = forward_taped<double>(net, w, inputs);

  CaseResult r;
  double magnitude = 0.0;
  {
    const auto outs = run.output_values();
    for (std::size_t k = 0; k < outs.size(); ++k) {
      for (std::size_t i = 0; i < outs[k].size(); ++i) magnitude += std::abs(outs[k][i] * probes[k][i]);
    }
  }
  r.floor = opts.floor_scale * std::max(1.0, magnitude);
  r.name = name;
  r.shape = net.node(net.inputs().front()).shape.str();
  r.tolerance = tolerance;
  const Gradients<double> grads = backward<double>(run, probes);

  auto probe = [&](Tensor<double>& target, const Tensor<double>& analytic, const std::string& label) {
    for (std::size_t i : coords(target.size(), opts.max_coords, rng)) {
      const double saved = target[i];
      target[i] = saved + opts.eps;
      const double up = loss(net, w, inputs, probes);
      target[i] = saved - opts.eps;
      const double down = loss(net, w, inputs, probes);
      target[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.eps);
      double a = analytic[i];
      if (opts.inject_fault && r.checked == 0) a = a * 1.5 + 1e-2;
      const double e = rel_err(a, numeric, r.floor);
      if (r.checked++ == 0 || e > r.max_rel_err) {
        r.max_rel_err = e;
        r.worst = label + "[" + std::to_string(i) + "]";
        r.worst_analytic = a;
        r.worst_numeric = numeric;
      }
    }
  };
  for (std::size_t k = 0; k < inputs.size(); ++k) probe(inputs[k], grads.inputs[k], "input" + std::to_string(k));
  for (std::size_t p = 0; p < net.params().size(); ++p) probe(w[p], grads.params[p], net.params()[p].name);
  return r;
}

namespace {

Network single(const Shape& in, const std::function<NodeId(GraphBuilder&, NodeId)>& body) {
  GraphBuilder b;
  const NodeId x = b.input("input", in.c, in.h, in.w);
  b.output(body(b, x), "out");
  return std::move(b).build();
}

}  // namespace

std::vector<CaseResult> primitive_cases(const Options& opts) {
  using ops::Padding;
  using ops::PoolKind;
  struct Case {
    std::string name;
    Network net;
  };
  std::vector<Case> cases;
  auto add = [&](const std::string& name, const Shape& in, const std::function<NodeId(GraphBuilder&, NodeId)>& f) {
    cases.push_back({name, single(in, f)});
  };
  const Shape s6{1, 4, 6, 6};
  const Shape s8{1, 8, 8, 8};
  add("conv2d k3 s1", s6, [](GraphBuilder& b, NodeId x) { return b.conv2d(x, "conv", 5, 3, 1); });
  add("conv2d k3 s2", {1, 3, 7, 7}, [](GraphBuilder& b, NodeId x) { return b.conv2d(x, "conv", 4, 3, 2); });
  add("conv2d k5 valid", {1, 2, 8, 8},
      [](GraphBuilder& b, NodeId x) { return b.conv2d(x, "conv", 3, 5, 1, Padding::valid); });
  add("conv2d k1", s8, [](GraphBuilder& b, NodeId x) { return b.conv2d(x, "pw", 8, 1); });
  add("depthwise k3", s6, [](GraphBuilder& b, NodeId x) { return b.depthwise(x, "dw", 3); });
  add("depthwise k3 m2 s2", {1, 3, 7, 6}, [](GraphBuilder& b, NodeId x) { return b.depthwise(x, "dw", 3, 2, 2); });
  add("depthwise k5", s8, [](GraphBuilder& b, NodeId x) { return b.depthwise(x, "dw", 5); });
  add("bias_add", s6, [](GraphBuilder& b, NodeId x) { return b.bias_add(x, "b"); });
  add("channel_affine", s6, [](GraphBuilder& b, NodeId x) { return b.affine(x, "bn"); });
  add("mish", s8, [](GraphBuilder& b, NodeId x) { return b.mish(x, "act"); });
  add("sigmoid", s8, [](GraphBuilder& b, NodeId x) { return b.sigmoid(x, "act"); });
  add("max_pool 2x2 s2", s6, [](GraphBuilder& b, NodeId x) { return b.pool(x, "pool", PoolKind::max, 2, 2); });
  add("avg_pool 3x3 s2", {1, 2, 7, 7},
      [](GraphBuilder& b, NodeId x) { return b.pool(x, "pool", PoolKind::avg, 3, 2); });
  add("adaptive_avg_pool 7->4", {1, 3, 7, 7},
      [](GraphBuilder& b, NodeId x) { return b.adaptive_avg_pool(x, "pool", 4, 4); });
  add("global_avg_pool", s6, [](GraphBuilder& b, NodeId x) { return b.global_avg_pool(x, "gap"); });
  add("resize_nearest up", {1, 3, 3, 4}, [](GraphBuilder& b, NodeId x) { return b.resize(x, "up", 7, 8); });
  add("resize_nearest down", s8, [](GraphBuilder& b, NodeId x) { return b.resize(x, "down", 5, 3); });
  add("concat", s6, [](GraphBuilder& b, NodeId x) {
    const NodeId y = b.mish(x, "act");
    return b.concat({x, y, x}, "cat");
  });
  add("add", s6, [](GraphBuilder& b, NodeId x) {
    const NodeId y = b.sigmoid(x, "act");
    return b.add({x, y}, "sum");
  });
  add("scale_channels", s6, [](GraphBuilder& b, NodeId x) {
    const NodeId s = b.sigmoid(b.global_avg_pool(x, "gap"), "gate");
    return b.scale_channels(x, s, "scale");
  });
  add("se_block", s8, [](GraphBuilder& b, NodeId x) { return add_se_block(b, x, 4, "se"); });

  std::vector<CaseResult> out;
  Options o = opts;
  for (auto& c : cases) {
    out.push_back(check_network(c.name, c.net, o, kPrimitiveTolerance));
    o.inject_fault = false;
  }
  return out;
}

std::vector<CaseResult> module_cases(const Options& opts) {
  std::vector<CaseResult> out;
  for (CslVariant v : {CslVariant::plain, CslVariant::attention, CslVariant::downsample}) {
    for (std::size_t t : {2, 3}) {
      CslModuleSpec spec;
      spec.in_ch = 8;
      spec.out_ch = 8;
      spec.expansion = t;
      spec.variant = v;
      spec.se_reduction = 4;
      const std::string name = std::string("csl_module ") + to_string(v) + " t=" + std::to_string(t);
      out.push_back(check_network(name, build_csl_module(spec, 8, 8), opts, kPrimitiveTolerance));
    }
  }
  return out;
}

CaseResult toy_detector_case(const Options& opts) {
  Options o = opts;
  if (o.max_coords == 0) o.max_coords = 6;
  return check_network("toy detector 64x64", build_detector(toy_config()), o, kDetectorTolerance);
}

bool Report::passed() const {
  return std::all_of(cases.begin(), cases.end(), [](const CaseResult& c) { return c.passed(); });
}

double Report::max_rel_err(double tolerance) const {
  double m = 0.0;
  for (const auto& c : cases) {
    if (c.tolerance == tolerance) m = std::max(m, c.max_rel_err);
  }
  return m;
}

std::string Report::render() const {
  std::ostringstream out;
  out << std::left << std::setw(28) << "case" << std::setw(18) << "input" << std::right << std::setw(8) << "coords"
      << std::setw(13) << "max_rel_err" << std::setw(10) << "tol" << "  result\n";
  for (const auto& c : cases) {
    out << std::left << std::setw(28) << c.name << std::setw(18) << c.shape << std::right << std::setw(8)
        << c.checked << std::setw(13) << std::scientific << std::setprecision(3) << c.max_rel_err << std::setw(10)
        << std::setprecision(0) << c.tolerance << std::defaultfloat << "  " << (c.passed() ? "ok" : "FAIL");
    if (!c.passed()) {
      out << " (worst " << c.worst << ": reverse " << c.worst_analytic << ", numeric " << c.worst_numeric << ")";
    }
    out << "\n";
  }
  out << "max rel err: primitives+modules " << std::scientific << std::setprecision(3)
      << max_rel_err(kPrimitiveTolerance) << ", toy detector " << max_rel_err(kDetectorTolerance) << "\n";
  return out.str();
}

Report run_suite(const Options& opts) {
  Report r;
  r.cases = primitive_cases(opts);
  Options rest = opts;
  rest.inject_fault = false;
  for (auto& c : module_cases(rest)) r.cases.push_back(std::move(c));
  r.cases.push_back(toy_detector_case(rest));
  return r;
}

}  // namespace csl::gradcheck
