// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.
//
// Synthetic urban-growth time series: random seed blobs that grow only by
// accretion at their boundary, rendered as noisy 3-band pseudo-imagery over a
// textured background.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "growthcast/raster.hpp"

namespace growthcast {

struct GrowthConfig {
  std::size_t width = 128;
  std::size_t height = 128;
  std::size_t dates = 3;
  std::uint64_t seed = 42;
  double initial_fraction = 0.15;
  double growth_rate = 0.05;  // share of boundary-adjacent pixels converted per step
  double noise = 0.05;        // std-dev of per-pixel render noise

  void validate() const {
    if (width < 8 || height < 8) throw ConfigError("synth: width and height must be >= 8");
    if (dates < 2) throw ConfigError("synth.dates: need at least 2 dates, got " + std::to_string(dates));
    if (!(initial_fraction > 0.0 && initial_fraction < 1.0))
      throw ConfigError("synth.initial_fraction: must lie in (0,1)");
    if (!(growth_rate >= 0.0 && growth_rate <= 1.0)) throw ConfigError("synth.growth_rate: must lie in [0,1]");
    if (!(noise >= 0.0)) throw ConfigError("synth.noise: must be >= 0");
  }
};

struct SynthSeries {
  std::vector<BinaryMask> masks;
  std::vector<Raster> renders;
};

namespace synth_detail {

inline std::vector<std::size_t> boundary_candidates(const BinaryMask& m) {
  std::vector<std::size_t> out;
  const std::size_t w = m.width, h = m.height;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (m(x, y)) continue;
      const bool adjacent = (x > 0 && m(x - 1, y)) || (x + 1 < w && m(x + 1, y)) ||
                            (y > 0 && m(x, y - 1)) || (y + 1 < h && m(x, y + 1));
      if (adjacent) out.push_back(y * w + x);
    }
  }
  return out;
}

// Smooth value noise in [0,1]: bilinear interpolation of a coarse random grid.
inline std::vector<double> value_noise(std::size_t w, std::size_t h, std::size_t cell, RngStream& rng) {
  const std::size_t gw = w / cell + 2, gh = h / cell + 2;
  std::vector<double> grid(gw * gh);
  for (auto& v : grid) v = rng.uniform01();
  std::vector<double> out(w * h);
  for (std::size_t y = 0; y < h; ++y) {
    const double fy = static_cast<double>(y) / static_cast<double>(cell);
    const auto y0 = static_cast<std::size_t>(fy);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / static_cast<double>(cell);
      const auto x0 = static_cast<std::size_t>(fx);
      const double tx = fx - static_cast<double>(x0);
      const double a = grid[y0 * gw + x0], b = grid[y0 * gw + x0 + 1];
      const double c = grid[(y0 + 1) * gw + x0], d = grid[(y0 + 1) * gw + x0 + 1];
      out[y * w + x] = (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
    }
  }
  return out;
}

}  // namespace synth_detail

/// Converts a seeded random subset of the boundary-adjacent background pixels
/// (round(rate * candidates) of them) to urban.
inline BinaryMask grow_step(const BinaryMask& m, double rate, RngStream& rng) {
  auto cand = synth_detail::boundary_candidates(m);
  const auto k = static_cast<std::size_t>(std::llround(rate * static_cast<double>(cand.size())));
  rng.shuffle(cand.begin(), cand.end());
  BinaryMask next = m;
  for (std::size_t i = 0; i < k; ++i) next.bits[cand[i]] = 1;
  return next;
}

inline SynthSeries generate_series(const GrowthConfig& cfg) {
  cfg.validate();
  RngStream shape_rng(cfg.seed);
  RngStream texture_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  RngStream noise_rng(cfg.seed ^ 0xc2b2ae3d27d4eb4fULL);
  const std::size_t w = cfg.width, h = cfg.height;

  BinaryMask mask(w, h);
  const double target = cfg.initial_fraction * static_cast<double>(w * h);
  const double r_max = std::max(3.0, static_cast<double>(std::min(w, h)) / 10.0);
  while (static_cast<double>(mask.count()) < target) {
    const double cx = shape_rng.uniform(0.0, static_cast<double>(w));
    const double cy = shape_rng.uniform(0.0, static_cast<double>(h));
    const double r = shape_rng.uniform(2.0, r_max);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double dx = static_cast<double>(x) + 0.5 - cx, dy = static_cast<double>(y) + 0.5 - cy;
        if (dx * dx + dy * dy <= r * r) mask(x, y) = 1;
      }
    }
  }

  SynthSeries s;
  s.masks.push_back(mask);
  for (std::size_t t = 1; t < cfg.dates; ++t) s.masks.push_back(grow_step(s.masks.back(), cfg.growth_rate, shape_rng));

  const auto texture = synth_detail::value_noise(w, h, 16, texture_rng);
  const auto grain = synth_detail::value_noise(w, h, 3, texture_rng);
  constexpr std::array<double, 3> soil{0.45, 0.38, 0.28};
  constexpr std::array<double, 3> built{0.82, 0.80, 0.76};
  for (const auto& m : s.masks) {
    Tensor<float> px({3, h, w});
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t i = y * w + x;
        for (std::size_t b = 0; b < 3; ++b) {
          double v = m.bits[i] ? built[b] + 0.04 * (grain[i] - 0.5)
                               : soil[b] + 0.16 * (texture[i] - 0.5) + 0.06 * (grain[i] - 0.5);
          v += cfg.noise * noise_rng.normal();
          px(b, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
    s.renders.emplace_back(std::move(px), 32);
  }
  return s;
}

struct GrowthStats {
  std::vector<double> urban_fraction;       // per date
  std::vector<std::size_t> changed_pixels;  // per step: |m_{t+1} \ m_t|
  std::vector<double> measured_rate;        // per step: changed / boundary candidates of m_t
};

inline GrowthStats growth_stats(const std::vector<BinaryMask>& masks) {
  if (masks.size() < 2) throw DataError("growth_stats: need at least 2 masks");
  GrowthStats st;
  for (const auto& m : masks) {
    if (m.width != masks.front().width || m.height != masks.front().height)
      throw ShapeError("growth_stats: masks differ in size");
    st.urban_fraction.push_back(static_cast<double>(m.count()) / static_cast<double>(m.bits.size()));
  }
  for (std::size_t t = 0; t + 1 < masks.size(); ++t) {
    std::size_t changed = 0;
    for (std::size_t i = 0; i < masks[t].bits.size(); ++i) changed += masks[t + 1].bits[i] && !masks[t].bits[i];
    st.changed_pixels.push_back(changed);
    const auto cand = synth_detail::boundary_candidates(masks[t]).size();
    st.measured_rate.push_back(cand ? static_cast<double>(changed) / static_cast<double>(cand) : 0.0);
  }
  return st;
}

}  // namespace growthcast
