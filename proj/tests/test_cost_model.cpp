// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "cslkit/cost_model.hpp"
#include "cslkit/csl_blocks.hpp"
#include "cslkit/error.hpp"
#include "cslkit/executor.hpp"
#include "test_util.hpp"

namespace csl {
namespace {

using cost::ConvShapeQuery;

TEST(ConvFlops, Examples) {
  EXPECT_EQ(cost::conv_flops({32, 32, 16, 16, 3}), 2359296u);
  EXPECT_EQ(cost::conv_flops({1, 1, 1, 1, 1}), 1u);
  EXPECT_EQ(cost::conv_flops({52, 52, 256, 256, 3}), 1594884096u);
}

TEST(CslFlops, TermsOfTheThirtyTwoPixelExample) {
  const auto c = cost::csl_flops({32, 32, 16, 16, 3, 2.0});
  const std::array<std::uint64_t, 5> expect{131072, 147456, 147456, 294912, 262144};
  EXPECT_EQ(c.terms, expect);
  EXPECT_EQ(c.total, 983040u);
}

TEST(CslFlops, TermsOfTheUnitExample) {
  const auto c = cost::csl_flops({1, 1, 2, 2, 1, 2.0});
  const std::array<std::uint64_t, 5> expect{2, 2, 2, 4, 4};
  EXPECT_EQ(c.terms, expect);
  EXPECT_EQ(c.total, 14u);
}

TEST(CslFlops, TotalIsSumOfTermsAndRejectsOddSplits) {
  std::mt19937_64 gen(3);
  for (int i = 0; i < 200; ++i) {
    const ConvShapeQuery q{1 + gen() % 40, 1 + gen() % 40, 1 + gen() % 64, 2 * (1 + gen() % 32), 1 + 2 * (gen() % 3),
                           static_cast<double>(2 + gen() % 2)};
    const auto c = cost::csl_flops(q);
    std::uint64_t sum = 0;
    for (auto t : c.terms) sum += t;
    EXPECT_EQ(sum, c.total);
  }
  EXPECT_THROW(cost::csl_flops({4, 4, 8, 7, 3, 2.0}), SpecError);
  EXPECT_THROW(cost::csl_flops({4, 4, 8, 6, 3, 1.5}), SpecError);
  EXPECT_THROW(cost::conv_flops({4, 4, 8, 8, 2}), SpecError);
}

TEST(SpeedUp, SmallAndLargeChannelCounts) {
  EXPECT_DOUBLE_EQ(cost::speedup_ratio({32, 32, 16, 16, 3, 2.0}), 2.4);
  EXPECT_NEAR(cost::asymptotic_speedup(3, 3.0), 9.0 / 1.75, 1e-15);
  EXPECT_NEAR(cost::asymptotic_speedup(3, 2.0), 6.0, 1e-15);
  const double r3 = cost::speedup_ratio({1, 1, 8192, 8192, 3, 3.0});
  const double r2 = cost::speedup_ratio({1, 1, 8192, 8192, 3, 2.0});
  EXPECT_NEAR(r3, 5.143, 0.01 * 5.143);
  EXPECT_NEAR(r2, 6.0, 0.06);
}

TEST(SpeedUp, DecreasesWithExpansionAndApproachesLimit) {
  for (std::size_t n : {256u, 1024u, 8192u}) {
    double prev = 1e9;
    for (double t : {1.0, 2.0, 3.0, 4.0, 6.0}) {
      const double r = cost::speedup_ratio({1, 1, n, n, 3, t});
      EXPECT_LT(r, prev);
      prev = r;
    }
  }
  for (double t : {2.0, 3.0}) {
    double prev_gap = 1e9;
    for (std::size_t n : {64u, 512u, 4096u, 32768u}) {
      const double gap = std::abs(cost::speedup_ratio({1, 1, n, n, 3, t}) - cost::asymptotic_speedup(3, t));
      EXPECT_LT(gap, prev_gap);
      prev_gap = gap;
    }
  }
}

TEST(ParamCount, ConvDepthwiseAndBias) {
  GraphBuilder b;
  const NodeId x = b.input("x", 16, 8, 8);
  const NodeId c = b.conv2d(x, "conv", 16, 3);
  const NodeId bias = b.bias_add(c, "bias");
  const NodeId pw = b.conv2d(bias, "pw", 16, 1);
  const NodeId dw = b.depthwise(pw, "dw", 3);
  const NodeId bn = b.affine(dw, "bn");
  b.output(bn, "y");
  const Network net = std::move(b).build();
  EXPECT_EQ(cost::param_count(net, net.node(c)), 2304u);
  EXPECT_EQ(cost::param_count(net, net.node(bias)), 16u);
  EXPECT_EQ(cost::param_count(net, net.node(pw)), 256u);
  EXPECT_EQ(cost::param_count(net, net.node(dw)), 144u);
  EXPECT_EQ(cost::param_count(net, net.node(bn)), 32u);
  EXPECT_EQ(net.parameter_count(), 2304u + 16 + 256 + 144 + 32);
}

TEST(CostReport, TotalsAreColumnSumsAndEmpiricalMatches) {
  const DetectorConfig cfg = toy_config();
  const Network net = build_detector(cfg);
  MacCounter counter;
  forward<float>(net, Weights::initialize(net, 0), testing::random_tensor<float>(Shape{1, 3, 64, 64}, 1), &counter);
  const auto report = cost::network_cost(net, &counter);
  std::uint64_t a = 0, e = 0;
  std::size_t p = 0;
  for (const auto& r : report.rows) {
    a += r.analytic;
    e += r.empirical;
    p += r.params;
  }
  EXPECT_EQ(a, report.total_analytic);
  EXPECT_EQ(e, report.total_empirical);
  EXPECT_EQ(p, report.total_params);
  EXPECT_EQ(report.total_params, net.parameter_count());
  EXPECT_TRUE(report.mismatches().empty());
  EXPECT_EQ(report.total_analytic, counter.total());
  EXPECT_EQ(report.rows.size(), net.nodes().size() - net.inputs().size());
}

TEST(CostReport, SharedHeadChargedOnce) {
  const Network net = build_detector(toy_config());
  const auto report = cost::network_cost(net);
  std::size_t shared = 0, charged = 0;
  for (const auto& r : report.rows) {
    if (r.name.rfind("head.", 0) != 0 || r.name.find(".conv") == std::string::npos) continue;
    (r.shared_params ? shared : charged) += 1;
  }
  EXPECT_EQ(charged, 1u);
  EXPECT_EQ(shared, 4u);
}

TEST(CostReport, CsvAndTableRendering) {
  GraphBuilder b;
  b.output(b.conv2d(b.input("x", 16, 32, 32), "conv", 16, 3), "y");
  const Network net = std::move(b).build();
  const auto report = cost::network_cost(net);
  EXPECT_EQ(report.render_csv(), "layer,analytic_macs,empirical_macs,params\nconv,2359296,,2304\n");
  const std::string table = report.render_table();
  EXPECT_NE(table.find("conv"), std::string::npos);
  EXPECT_NE(table.find("16x32x32"), std::string::npos);
  EXPECT_NE(table.find("total analytic MACs: 2359296"), std::string::npos);
}

TEST(Calibration, DeviationArithmetic) {
  cost::Calibration c;
  c.macs = 1470e6 * 1.1;
  c.params = 3.2e6 * 0.85;
  EXPECT_NEAR(c.mac_deviation(), 0.1, 1e-12);
  EXPECT_NEAR(c.param_deviation(), -0.15, 1e-12);
  EXPECT_TRUE(c.within(0.2));
  EXPECT_FALSE(c.within(0.12));
}

TEST(Footnotes, DocumentBothExpansionRatios) {
  std::string all;
  for (const auto& n : cost::speedup_footnotes()) all += n + "\n";
  EXPECT_NE(all.find("5.143"), std::string::npos);
  EXPECT_NE(all.find("6.000"), std::string::npos);
  EXPECT_NE(all.find("7.2"), std::string::npos);
}

}  // namespace
}  // namespace csl
