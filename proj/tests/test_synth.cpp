// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.

#include <gtest/gtest.h>

#include <cmath>

#include "growthcast/synth.hpp"

using namespace growthcast;

TEST(Synth, MonotoneGrowthAndPixelRange) {
  GrowthConfig cfg;
  cfg.dates = 5;
  cfg.growth_rate = 0.2;
  cfg.noise = 0.3;
  const auto s = generate_series(cfg);
  ASSERT_EQ(s.masks.size(), 5u);
  ASSERT_EQ(s.renders.size(), 5u);
  for (std::size_t t = 0; t + 1 < s.masks.size(); ++t)
    for (std::size_t i = 0; i < s.masks[t].bits.size(); ++i) ASSERT_LE(s.masks[t].bits[i], s.masks[t + 1].bits[i]);
  for (const auto& r : s.renders) {
    EXPECT_EQ(r.pixels.shape(), (Shape{3, 128, 128}));
    for (float v : r.pixels.data()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
  }
  const auto st = growth_stats(s.masks);
  for (std::size_t t = 0; t + 1 < st.urban_fraction.size(); ++t)
    EXPECT_LE(st.urban_fraction[t], st.urban_fraction[t + 1]);
}

TEST(Synth, InitialFractionReached) {
  GrowthConfig cfg;
  const auto s = generate_series(cfg);
  const double f = static_cast<double>(s.masks[0].count()) / (128.0 * 128.0);
  EXPECT_GE(f, 0.15);
  EXPECT_LT(f, 0.25);
}

TEST(Synth, DeterministicPerSeed) {
  GrowthConfig cfg;
  cfg.width = 40;
  cfg.height = 30;
  const auto a = generate_series(cfg), b = generate_series(cfg);
  EXPECT_EQ(a.masks, b.masks);
  EXPECT_EQ(a.renders, b.renders);
  cfg.seed = 43;
  EXPECT_NE(generate_series(cfg).masks, a.masks);
}

TEST(Synth, ZeroGrowthKeepsMasksEqual) {
  GrowthConfig cfg;
  cfg.growth_rate = 0.0;
  cfg.dates = 4;
  const auto s = generate_series(cfg);
  for (const auto& m : s.masks) EXPECT_EQ(m, s.masks.front());
  for (auto d : growth_stats(s.masks).changed_pixels) EXPECT_EQ(d, 0u);
}

TEST(Synth, MeasuredRateNearConfigured) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GrowthConfig cfg;
    cfg.seed = seed;
    cfg.dates = 3;
    const auto st = growth_stats(generate_series(cfg).masks);
    for (double r : st.measured_rate) EXPECT_NEAR(r, cfg.growth_rate, 0.2 * cfg.growth_rate) << "seed " << seed;
  }
}

TEST(Synth, GrowthStatsCountsSetDifference) {
  BinaryMask a(3, 1), b(3, 1);
  a.bits = {1, 0, 0};
  b.bits = {1, 1, 0};
  const auto st = growth_stats({a, b});
  EXPECT_EQ(st.changed_pixels[0], 1u);
  EXPECT_DOUBLE_EQ(st.measured_rate[0], 1.0);
  EXPECT_NEAR(st.urban_fraction[1], 2.0 / 3.0, 1e-15);
  EXPECT_THROW(growth_stats({a}), DataError);
  EXPECT_THROW(growth_stats({a, BinaryMask(2, 2)}), ShapeError);
}

TEST(Synth, ConfigValidation) {
  GrowthConfig cfg;
  cfg.dates = 1;
  try {
    generate_series(cfg);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("synth.dates"), std::string::npos);
  }
  cfg = {};
  cfg.initial_fraction = 0.0;
  EXPECT_THROW(generate_series(cfg), ConfigError);
  cfg = {};
  cfg.growth_rate = 1.5;
  EXPECT_THROW(generate_series(cfg), ConfigError);
  cfg = {};
  cfg.width = 4;
  EXPECT_THROW(generate_series(cfg), ConfigError);
}
