// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "cslkit/anchors.hpp"
#include "cslkit/error.hpp"
#include "oracles.hpp"

namespace csl::anchors {
namespace {

TEST(LoadBoxes, NormalizesByImageSize) {
  const auto r = parse_annotations(R"({"images": [{"id": 7, "width": 640, "height": 480}],
    "annotations": [{"image_id": 7, "bbox": [0, 0, 320, 240]}, {"image_id": 7, "bbox": [10, 10, 0, 5]}]})");
  ASSERT_EQ(r.boxes.size(), 1u);
  EXPECT_EQ(r.boxes[0], (BoxWH{0.5, 0.5}));
  EXPECT_EQ(r.dropped_degenerate, 1u);
  EXPECT_EQ(r.clamped, 0u);
}

TEST(LoadBoxes, ClampsOversizedAndRejectsBadDocuments) {
  const auto r = parse_annotations(R"({"images": [{"id": 1, "width": 100, "height": 100}],
    "annotations": [{"image_id": 1, "bbox": [0, 0, 150, 50]}]})");
  ASSERT_EQ(r.boxes.size(), 1u);
  EXPECT_EQ(r.boxes[0], (BoxWH{1.0, 0.5}));
  EXPECT_EQ(r.clamped, 1u);
  try {
    parse_annotations(R"({"images": [{"id": 1, "width": 10, "height": 10}],
      "annotations": [{"image_id": 1, "bbox": [0, 0, 1, 1]}, {"image_id": 2, "bbox": [0, 0, 1, 1]}]})");
    FAIL() << "unknown image_id accepted";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("annotations[1]"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_annotations(R"({"images": [], "annotations": [{"image_id": 1, "bbox": [0, 0]}]})"), FormatError);
  EXPECT_THROW(parse_annotations("[1, 2"), FormatError);
}

TEST(LoadBoxes, ExportRoundTripIsIdentity) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(1e-4, 1.0);
  std::vector<BoxWH> boxes;
  for (int i = 0; i < 300; ++i) boxes.push_back({u(gen), u(gen)});
  const auto back = parse_annotations(export_annotations(boxes));
  EXPECT_EQ(back.boxes, boxes);
  EXPECT_EQ(back.dropped_degenerate, 0u);
}

TEST(IouWh, Examples) {
  EXPECT_DOUBLE_EQ(iou_wh({2, 2}, {4, 4}), 0.25);
  EXPECT_DOUBLE_EQ(iou_wh({0.3, 0.7}, {0.3, 0.7}), 1.0);
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    EXPECT_NEAR(iou_wh({1, eps}, {eps, 1}), eps * eps / (2 * eps - eps * eps), 1e-15);
  }
  EXPECT_LT(iou_wh({1, 1e-6}, {1e-6, 1}), 1e-5);
}

TEST(Bins, ThresholdsAndExamples) {
  EXPECT_EQ(scale_thresholds(5), (std::vector<double>{0, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1}));
  EXPECT_EQ(scale_thresholds(2), (std::vector<double>{0, 0.5, 1}));
  const auto s = scale_thresholds(5);
  EXPECT_EQ(bin_index(scale_of({0.3, 0.3}), s), 3u);
  EXPECT_EQ(bin_index(scale_of({1, 1}), s), 4u);
  EXPECT_EQ(bin_index(0.25, s), 3u);
  EXPECT_EQ(bin_index(0.0625, s), 1u);
  EXPECT_EQ(bin_index(0.01, s), 0u);
  EXPECT_DOUBLE_EQ(scale_of({0.1, 0.4}, ScaleRule::max_side), 0.4);
  EXPECT_DOUBLE_EQ(scale_of({0.1, 0.4}), 0.2);
}

TEST(Bins, PartitionIsDisjointAndComplete) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(1e-3, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<BoxWH> boxes;
    for (int i = 0; i < 200; ++i) boxes.push_back({u(gen), u(gen)});
    for (auto rule : {ScaleRule::geometric_mean, ScaleRule::max_side}) {
      const auto b = bin_by_scale(boxes, 5, rule);
      std::size_t n = 0;
      for (std::size_t i = 0; i < b.bins.size(); ++i) {
        for (const auto& box : b.bins[i]) {
          const double s = scale_of(box, rule);
          EXPECT_GE(s, b.thresholds[i]);
          if (i + 1 < b.bins.size()) EXPECT_LT(s, b.thresholds[i + 1]);
          else EXPECT_LE(s, 1.0);
        }
        n += b.bins[i].size();
      }
      EXPECT_EQ(n, boxes.size());
    }
  }
}

TEST(KMeans, Examples) {
  const std::vector<BoxWH> two{{2, 2}, {4, 4}};
  const auto r = kmeans_iou(two, 1, 0);
  ASSERT_EQ(r.centers.size(), 1u);
  EXPECT_EQ(r.centers[0], (BoxWH{3, 3}));

  const std::vector<BoxWH> distinct{{0.4, 0.1}, {0.1, 0.1}, {0.3, 0.6}};
  const auto d = kmeans_iou(distinct, 3, 5);
  EXPECT_EQ(d.centers, (std::vector<BoxWH>{{0.1, 0.1}, {0.4, 0.1}, {0.3, 0.6}}));
  EXPECT_EQ(d.objective.back(), 0.0);

  EXPECT_THROW(kmeans_iou(two, 3, 0), SpecError);
}

TEST(KMeans, MatchesExhaustiveSeedingOracleOnPlantedClusters) {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t k = 2 + trial % 3;
    const std::size_t n = k + 2 + gen() % (13 - k - 2);
    const auto boxes = testing::oracle::planted_boxes(gen, n, k);
    const auto r = kmeans_iou(boxes, k, static_cast<std::uint64_t>(trial));
    const double got = assignment_cost(boxes, r.centers, r.assignment);
    EXPECT_LE(got, testing::oracle::exhaustive_seeding(boxes, k) + 1e-12) << "trial " << trial;
  }
}

TEST(KMeans, TwoTightClustersStayInTheirHulls) {
  std::vector<BoxWH> boxes;
  for (int i = 0; i < 6; ++i) boxes.push_back({0.10 + 0.002 * i, 0.12 - 0.001 * i});
  for (int i = 0; i < 6; ++i) boxes.push_back({0.50 - 0.003 * i, 0.40 + 0.002 * i});
  const auto r = kmeans_iou(boxes, 2, 3);
  EXPECT_GE(r.centers[0].w, 0.10);
  EXPECT_LE(r.centers[0].w, 0.11);
  EXPECT_GE(r.centers[1].w, 0.485);
  EXPECT_LE(r.centers[1].w, 0.50);
  EXPECT_NEAR(assignment_cost(boxes, r.centers, r.assignment), testing::oracle::exhaustive_seeding(boxes, 2), 1e-15);
}

TEST(KMeans, ObjectiveNeverIncreasesAndRunIsDeterministic) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<BoxWH> boxes;
    for (int i = 0; i < 150; ++i) boxes.push_back({u(gen), u(gen)});
    for (auto center : {CenterRule::mean, CenterRule::medoid}) {
      const auto r = kmeans_iou(boxes, 5, static_cast<std::uint64_t>(trial), center);
      for (std::size_t i = 1; i < r.objective.size(); ++i) EXPECT_LE(r.objective[i], r.objective[i - 1]);
      EXPECT_EQ(r.objective.size(), r.iterations);
      for (std::size_t i = 1; i < r.centers.size(); ++i) {
        EXPECT_LE(r.centers[i - 1].w * r.centers[i - 1].h, r.centers[i].w * r.centers[i].h);
      }
      const auto again = kmeans_iou(boxes, 5, static_cast<std::uint64_t>(trial), center);
      EXPECT_EQ(again.centers, r.centers);
      EXPECT_EQ(again.assignment, r.assignment);
    }
  }
}

TEST(GenerateAnchors, FifteenAnchorsWithFallbackFlags) {
  std::vector<BoxWH> boxes(40, BoxWH{0.3, 0.3});
  const auto set = generate_anchors(boxes, {});
  EXPECT_EQ(set.total(), 15u);
  ASSERT_EQ(set.levels.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(set.levels[i].anchors.size(), 3u);
    EXPECT_EQ(set.levels[i].fallback, i != 3) << i;
  }
  for (const auto& a : set.levels[3].anchors) {
    EXPECT_NEAR(a.w, 0.3, 1e-15);
    EXPECT_NEAR(a.h, 0.3, 1e-15);
  }
  for (std::size_t i = 0; i < 5; ++i) {
    if (!set.levels[i].fallback) continue;
    for (const auto& a : set.levels[i].anchors) {
      EXPECT_EQ(a.w, a.h);
      EXPECT_GT(a.w, set.thresholds[i]);
      EXPECT_LT(a.w, set.thresholds[i + 1]);
    }
  }
}

TEST(GenerateAnchors, AnchorsStayInsideTheirBins) {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 25; ++trial) {
    std::lognormal_distribution<double> side(-2.0, 1.0);
    std::vector<BoxWH> boxes;
    for (int i = 0; i < 400; ++i) {
      boxes.push_back({std::clamp(side(gen), 1e-3, 1.0), std::clamp(side(gen), 1e-3, 1.0)});
    }
    AnchorOptions opts;
    opts.seed = static_cast<std::uint64_t>(trial);
    opts.scale = trial % 2 ? ScaleRule::max_side : ScaleRule::geometric_mean;
    const auto set = generate_anchors(boxes, opts);
    for (std::size_t i = 0; i < set.levels.size(); ++i) {
      for (const auto& a : set.levels[i].anchors) {
        const double s = scale_of(a, opts.scale);
        EXPECT_GE(s, set.thresholds[i]);
        if (i + 1 < set.levels.size()) EXPECT_LT(s, set.thresholds[i + 1]);
        EXPECT_GT(a.w, 0.0);
        EXPECT_LE(a.w, 1.0);
        EXPECT_GT(a.h, 0.0);
        EXPECT_LE(a.h, 1.0);
      }
    }
    const auto again = generate_anchors(boxes, opts);
    EXPECT_EQ(to_text(again), to_text(set));
  }
}

TEST(AnchorText, RoundTripAndCsv) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<BoxWH> boxes;
  for (int i = 0; i < 100; ++i) boxes.push_back({u(gen), u(gen)});
  const auto set = generate_anchors(boxes, {});
  const auto back = parse_anchor_text(to_text(set));
  ASSERT_EQ(back.levels.size(), set.levels.size());
  for (std::size_t i = 0; i < set.levels.size(); ++i) {
    EXPECT_EQ(back.levels[i].anchors, set.levels[i].anchors);
    EXPECT_EQ(back.levels[i].fallback, set.levels[i].fallback);
    EXPECT_EQ(back.levels[i].clamped, set.levels[i].clamped);
  }
  const std::string csv = to_csv(set);
  EXPECT_EQ(csv.rfind("level,index,w,h,fallback,clamped\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), 1 + set.total());
  EXPECT_EQ(to_text(parse_anchor_text("level 0: (0.5,0.25)\n")), "level 0: (0.5,0.25)\n");
  EXPECT_THROW(parse_anchor_text("level 0: (0.5;0.25)\n"), FormatError);
}

}  // namespace
}  // namespace csl::anchors
