// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cslkit/error.hpp"
#include "cslkit/ops.hpp"
#include "test_util.hpp"

namespace csl {
namespace {

using ops::Padding;
using ops::PoolKind;
using testing::random_tensor;

// ---------------------------------------------------------------------------
// Convolutions

TEST(Conv2d, SamePaddingKeepsShapeAndCountsMacs) {
  MacCounter counter;
  const auto x = random_tensor<float>(Shape{1, 16, 32, 32}, 1);
  const auto w = random_tensor<float>(Shape{3, 3, 16, 16}, 2);
  const auto y = ops::conv2d(x, w, 1, Padding::same, &counter, "c");
  EXPECT_EQ(y.shape(), (Shape{1, 16, 32, 32}));
  EXPECT_EQ(counter.of("c"), 2359296u);
  EXPECT_EQ(counter.total(), 2359296u);
}

TEST(Conv2d, OneByOneOnesSumsChannels) {
  const auto x = random_tensor<double>(Shape{1, 3, 4, 4}, 3);
  const auto w = Tensor<double>::filled(Shape{1, 1, 3, 1}, 1.0);
  const auto y = ops::conv2d(x, w, 1, Padding::same);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      EXPECT_DOUBLE_EQ(y.at(0, 0, i, j), x.at(0, 0, i, j) + x.at(0, 1, i, j) + x.at(0, 2, i, j));
}

TEST(Conv2d, MatchesDirectReferenceOnRandomGrid) {
  std::mt19937_64 gen(5);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(gen); };
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t ks[] = {1, 3, 5};
    const std::size_t k = ks[pick(0, 2)], stride = pick(1, 2);
    const Padding pad = pick(0, 1) ? Padding::same : Padding::valid;
    const Shape xs{pick(1, 2), pick(1, 5), pick(k, 11), pick(k, 11)};
    const std::size_t n = pick(1, 6);
    const auto x = random_tensor<double>(xs, gen());
    const auto w = random_tensor<double>(Shape{k, k, xs.c, n}, gen());
    MacCounter counter;
    const auto y = ops::conv2d(x, w, stride, pad, &counter, "c");
    // Independent geometry: TF-style same padding, extra pixel bottom/right.
    std::size_t oh, ow, pt = 0, pl = 0;
    if (pad == Padding::same) {
      oh = (xs.h + stride - 1) / stride;
      ow = (xs.w + stride - 1) / stride;
      pt = (std::max<long>(0, static_cast<long>((oh - 1) * stride + k) - static_cast<long>(xs.h))) / 2;
      pl = (std::max<long>(0, static_cast<long>((ow - 1) * stride + k) - static_cast<long>(xs.w))) / 2;
    } else {
      oh = (xs.h - k) / stride + 1;
      ow = (xs.w - k) / stride + 1;
    }
    const auto ref = testing::reference_conv(x, w, stride, pt, pl, oh, ow);
    ASSERT_EQ(y.shape(), ref.shape());
    for (std::size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y[i], ref[i], 1e-12);
    EXPECT_EQ(counter.total(), xs.n * oh * ow * xs.c * k * k * n);
  }
}

TEST(Conv2d, RejectsMismatchedChannelsEvenKernelAndBadStride) {
  const auto x = random_tensor<float>(Shape{1, 4, 8, 8}, 1);
  EXPECT_THROW(ops::conv2d(x, Tensor<float>(Shape{3, 3, 5, 2}), 1, Padding::same), ShapeError);
  EXPECT_THROW(ops::conv2d(x, Tensor<float>(Shape{2, 2, 4, 2}), 1, Padding::same), ShapeError);
  EXPECT_THROW(ops::conv2d(x, Tensor<float>(Shape{3, 3, 4, 2}), 3, Padding::same), ShapeError);
  try {
    ops::conv2d(x, Tensor<float>(Shape{3, 3, 5, 2}), 1, Padding::same);
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(3,3,5,2)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(1,4,8,8)"), std::string::npos) << msg;
  }
}

TEST(Depthwise, ShapeAndMacCount) {
  MacCounter counter;
  const auto x = random_tensor<float>(Shape{1, 16, 32, 32}, 1);
  const auto y = ops::depthwise_conv2d(x, random_tensor<float>(Shape{3, 3, 16, 1}, 2), 1, Padding::same, &counter, "d");
  EXPECT_EQ(y.shape(), (Shape{1, 16, 32, 32}));
  EXPECT_EQ(counter.of("d"), 147456u);
  const auto y2 = ops::depthwise_conv2d(random_tensor<float>(Shape{1, 8, 5, 5}, 3),
                                        random_tensor<float>(Shape{3, 3, 8, 2}, 4), 1, Padding::same);
  EXPECT_EQ(y2.shape().c, 16u);
}

TEST(Depthwise, IdentityKernelReproducesInput) {
  const auto x = random_tensor<double>(Shape{2, 3, 6, 7}, 9);
  Tensor<double> w(Shape{3, 3, 3, 1});
  for (std::size_t c = 0; c < 3; ++c) w.at(1, 1, c, 0) = 1.0;
  EXPECT_EQ(ops::depthwise_conv2d(x, w, 1, Padding::same).vec(), x.vec());
}

TEST(Depthwise, PerturbingOneChannelOnlyTouchesItsOutputs) {
  const std::size_t mult = 3;
  const auto x = random_tensor<double>(Shape{1, 4, 6, 6}, 1);
  const auto w = random_tensor<double>(Shape{3, 3, 4, mult}, 2);
  const auto base = ops::depthwise_conv2d(x, w, 1, Padding::same);
  for (std::size_t c = 0; c < 4; ++c) {
    auto xp = x;
    for (std::size_t i = 0; i < 36; ++i) xp.plane(0, c)[i] += 0.5;
    const auto y = ops::depthwise_conv2d(xp, w, 1, Padding::same);
    for (std::size_t o = 0; o < 4 * mult; ++o) {
      bool changed = false;
      for (std::size_t i = 0; i < 36; ++i) changed |= y.plane(0, o)[i] != base.plane(0, o)[i];
      EXPECT_EQ(changed, o / mult == c) << "input channel " << c << " output channel " << o;
    }
  }
}

TEST(Pointwise, CountsAndIdentities) {
  MacCounter counter;
  const auto x = random_tensor<double>(Shape{1, 16, 32, 32}, 1);
  ops::pointwise_conv2d(x, random_tensor<double>(Shape{1, 1, 16, 8}, 2), &counter, "p");
  EXPECT_EQ(counter.of("p"), 131072u);

  Tensor<double> eye(Shape{1, 1, 16, 16});
  for (std::size_t i = 0; i < 16; ++i) eye.at(0, 0, i, i) = 1.0;
  EXPECT_EQ(ops::pointwise_conv2d(x, eye).vec(), x.vec());

  const Tensor<double> v(Shape{1, 2, 1, 1}, {3.0, 5.0});
  const Tensor<double> ones(Shape{1, 1, 2, 1}, {1.0, 1.0});
  EXPECT_DOUBLE_EQ(ops::pointwise_conv2d(v, ones)[0], 8.0);
}

TEST(MacCounter, TotalIsSumOfLayers) {
  MacCounter counter;
  const auto x = random_tensor<float>(Shape{1, 4, 8, 8}, 1);
  ops::conv2d(x, random_tensor<float>(Shape{3, 3, 4, 4}, 2), 1, Padding::same, &counter, "a");
  ops::depthwise_conv2d(x, random_tensor<float>(Shape{5, 5, 4, 1}, 3), 2, Padding::same, &counter, "b");
  ops::conv2d(x, random_tensor<float>(Shape{3, 3, 4, 4}, 2), 1, Padding::same, &counter, "a");
  std::uint64_t sum = 0;
  for (const auto& [name, macs] : counter.per_layer()) sum += macs;
  EXPECT_EQ(sum, counter.total());
  EXPECT_EQ(counter.of("a"), 2u * 8 * 8 * 4 * 9 * 4);
  EXPECT_EQ(counter.of("b"), 4u * 4 * 4 * 25);
}

// ---------------------------------------------------------------------------
// Elementwise and pooling

TEST(Activations, MishValues) {
  const Tensor<double> x(Shape{1, 1, 1, 5}, {0.0, 1.0, -20.0, 800.0, -800.0});
  const auto y = ops::mish(x);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_NEAR(y[1], 0.8651, 1e-4);
  EXPECT_NEAR(y[2], -4.122e-8, 1e-10);
  EXPECT_LT(y[2], 0.0);
  EXPECT_DOUBLE_EQ(y[3], 800.0);
  EXPECT_TRUE(std::isfinite(y[4]));
  EXPECT_LE(std::abs(y[4]), 1e-300);
}

TEST(Activations, SigmoidValues) {
  const Tensor<float> x(Shape{1, 1, 1, 3}, {0.0f, 100.0f, -100.0f});
  const auto y = ops::sigmoid(x);
  EXPECT_EQ(y[0], 0.5f);
  EXPECT_FLOAT_EQ(y[1], 1.0f);
  EXPECT_GE(y[2], 0.0f);
  EXPECT_LT(y[2], 1e-30f);
}

TEST(Pooling, AverageOfConstantIsConstant) {
  const auto x = Tensor<double>::filled(Shape{1, 3, 8, 6}, 2.5);
  const auto y = ops::pool2d(x, PoolKind::avg, 2, 2);
  EXPECT_EQ(y.shape(), (Shape{1, 3, 4, 3}));
  for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 2.5);
}

TEST(Pooling, MaxOfTwoByTwo) {
  const Tensor<float> x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  const auto y = ops::pool2d(x, PoolKind::max, 2, 2);
  ASSERT_EQ(y.size(), 1u);
  EXPECT_EQ(y[0], 4.0f);
  EXPECT_THROW(ops::pool2d(x, PoolKind::max, 3, 1), ShapeError);
}

TEST(Pooling, AdaptiveToOneIsGlobalMean) {
  const auto x = random_tensor<double>(Shape{2, 3, 7, 5}, 4);
  const auto a = ops::adaptive_avg_pool(x, 1, 1);
  const auto g = ops::global_avg_pool(x);
  ASSERT_EQ(a.shape(), g.shape());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], g[i], 1e-15);
  double mean = 0;
  for (std::size_t i = 0; i < 35; ++i) mean += x.plane(1, 2)[i];
  EXPECT_NEAR(g.at(1, 2, 0, 0), mean / 35, 1e-15);
  EXPECT_THROW(ops::adaptive_avg_pool(x, 0, 1), ShapeError);
}

TEST(Pooling, AdaptiveBinsPartitionTheAxis) {
  for (std::size_t in = 1; in <= 40; ++in) {
    for (std::size_t out = 1; out <= in; ++out) {
      std::size_t next = 0;
      for (std::size_t i = 0; i < out; ++i) {
        const auto b = ops::adaptive_bin(i, in, out);
        EXPECT_EQ(b.begin, next);
        EXPECT_GT(b.end, b.begin);
        EXPECT_LE(b.end - b.begin, (in + out - 1) / out);
        next = b.end;
      }
      EXPECT_EQ(next, in);
    }
  }
}

TEST(Resize, NearestUpsampleAndIdentity) {
  const Tensor<float> x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  const auto y = ops::resize_nearest(x, 4, 4);
  const std::vector<float> expect{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  EXPECT_EQ(y.vec(), expect);
  EXPECT_EQ(ops::resize_nearest(x, 2, 2).vec(), x.vec());
  EXPECT_EQ(ops::resize_nearest(random_tensor<float>(Shape{1, 2, 13, 13}, 1), 18, 18).shape(), (Shape{1, 2, 18, 18}));
}

TEST(Combine, ConcatAddScale) {
  const auto a = random_tensor<float>(Shape{1, 4, 8, 8}, 1);
  const auto b = random_tensor<float>(Shape{1, 12, 8, 8}, 2);
  const auto c = ops::concat_channels(std::vector<Tensor<float>>{a, b});
  EXPECT_EQ(c.shape(), (Shape{1, 16, 8, 8}));
  EXPECT_EQ(c.plane(0, 4)[7], b.plane(0, 0)[7]);
  EXPECT_EQ(ops::add(std::vector<Tensor<float>>{a, Tensor<float>(a.shape())}).vec(), a.vec());
  EXPECT_THROW(ops::add(std::vector<Tensor<float>>{a, b}), ShapeError);
  EXPECT_THROW(ops::concat_channels(std::vector<Tensor<float>>{a, Tensor<float>(Shape{1, 1, 4, 8})}), ShapeError);

  const Tensor<float> s(Shape{1, 4, 1, 1}, {0.0f, 1.0f, 2.0f, -1.0f});
  const auto y = ops::scale_channels(a, s);
  EXPECT_EQ(y.plane(0, 0)[3], 0.0f);
  EXPECT_EQ(y.plane(0, 2)[3], 2.0f * a.plane(0, 2)[3]);
  EXPECT_EQ(y.plane(0, 3)[5], -a.plane(0, 3)[5]);
}

TEST(Combine, ConcatSplitRoundTripIsBitExact) {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Tensor<double>> parts;
    std::vector<std::size_t> sizes;
    const std::size_t k = 1 + gen() % 4;
    for (std::size_t i = 0; i < k; ++i) {
      sizes.push_back(1 + gen() % 5);
      parts.push_back(random_tensor<double>(Shape{2, sizes.back(), 3, 4}, gen()));
    }
    const auto joined = ops::concat_channels(parts);
    const auto back = ops::split_channels(joined, std::span<const std::size_t>(sizes));
    ASSERT_EQ(back.size(), parts.size());
    for (std::size_t i = 0; i < k; ++i) EXPECT_EQ(back[i].vec(), parts[i].vec());
  }
}

TEST(Affine, ScaleAndShiftPerChannel) {
  const auto x = random_tensor<double>(Shape{1, 2, 3, 3}, 1);
  const Tensor<double> scale(Shape{1, 2, 1, 1}, {2.0, -1.0});
  const Tensor<double> shift(Shape{1, 2, 1, 1}, {0.5, 0.0});
  const auto y = ops::channel_affine(x, scale, shift);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 1, 2), 2.0 * x.at(0, 0, 1, 2) + 0.5);
  EXPECT_DOUBLE_EQ(y.at(0, 1, 2, 0), -x.at(0, 1, 2, 0));
  const auto yb = ops::bias_add(x, shift);
  EXPECT_DOUBLE_EQ(yb.at(0, 0, 0, 0), x.at(0, 0, 0, 0) + 0.5);
}

}  // namespace
}  // namespace csl
