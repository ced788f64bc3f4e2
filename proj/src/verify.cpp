// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cslkit/verify.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "cslkit/csl_blocks.hpp"
#include "cslkit/executor.hpp"
#include "cslkit/rng.hpp"

namespace csl::verify {

std::vector<SpeedupCheck> speedup_checks(std::size_t channels) {
  std::vector<SpeedupCheck> out;
  for (std::size_t t : {3, 2}) {
    SpeedupCheck c;
    c.expansion = t;
    c.channels = channels;
    c.ratio = cost::speedup_ratio({1, 1, channels, channels, 3, static_cast<double>(t)});
    c.limit = cost::asymptotic_speedup(3, static_cast<double>(t));
    c.rel_err = std::abs(c.ratio - c.limit) / c.limit;
    out.push_back(c);
  }
  return out;
}

Report run(const DetectorConfig& cfg, const Options& opts) {
  const Network net = build_network(cfg);
  const Weights w = Weights::initialize(net, cfg.seed);
  const Shape in = net.node(net.inputs().front()).shape;

  Report r;
  r.input_size = cfg.input_size;
  for (std::size_t trial = 0; trial < opts.trials; ++trial) {
    TrialResult t;
    t.seed = opts.seed + trial;
    Rng rng(t.seed);
    Tensor<float> x(in);
    for (auto& v : x.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));

    MacCounter counter;
    forward<float>(net, w, x, &counter);
    cost::CostReport cost = cost::network_cost(net, &counter);
    for (auto& row : cost.rows) {
      if (!opts.corrupt_layer.empty() && row.name == opts.corrupt_layer) row.analytic += 1;
      t.analytic_total += row.analytic;
      if (row.analytic != row.empirical) t.mismatches.push_back({row.name, row.analytic, row.empirical});
    }
    // Counted layers must all be graph nodes.
    for (const auto& [layer, macs] : counter.per_layer()) {
      if (!net.find(layer)) t.mismatches.push_back({layer, 0, macs});
    }
    t.empirical_total = counter.total();
    t.layers = cost.rows.size();
    if (!r.trials.empty() && t.analytic_total != r.trials.front().analytic_total) r.analytic_stable = false;
    r.trials.push_back(std::move(t));
  }
  r.speedups = speedup_checks();
  r.notes = cost::speedup_footnotes();
  return r;
}

bool Report::passed() const {
  if (!analytic_stable) return false;
  for (const auto& t : trials) {
    if (!t.mismatches.empty()) return false;
  }
  for (const auto& s : speedups) {
    if (!s.passed()) return false;
  }
  return true;
}

std::string Report::render() const {
  std::ostringstream out;
  out << "input " << input_size << "x" << input_size << "\n";
  for (const auto& t : trials) {
    out << "trial seed " << t.seed << ": " << t.layers << " layers, analytic " << t.analytic_total << " MACs, empirical "
        << t.empirical_total << " MACs, " << (t.mismatches.empty() ? "all layers equal" : "MISMATCH") << "\n";
    for (const auto& m : t.mismatches) {
      out << "  mismatch " << m.layer << ": analytic " << m.analytic << " empirical " << m.empirical << "\n";
    }
  }
  if (!analytic_stable) out << "analytic totals differ between trials\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& s : speedups) {
    out << "speed-up t=" << s.expansion << " at C=N=" << s.channels << ": " << s.ratio << " (limit " << s.limit
        << ", rel err " << std::scientific << std::setprecision(2) << s.rel_err << std::fixed << std::setprecision(4)
        << ") " << (s.passed() ? "ok" : "FAIL") << "\n";
  }
  for (const auto& n : notes) out << "note: " << n << "\n";
  out << (passed() ? "PASS" : "FAIL") << "\n";
  return out.str();
}

}  // namespace csl::verify
