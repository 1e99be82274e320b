// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.
//
// Binary mask cleanup: connected components, small-object removal and
// square-element morphology.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "growthcast/error.hpp"

namespace growthcast {

struct BinaryMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;  // row-major, values 0 or 1

  BinaryMask() = default;
  BinaryMask(std::size_t w, std::size_t h, std::uint8_t fill = 0)
      : width(w), height(h), bits(w * h, fill ? 1 : 0) {}

  std::uint8_t operator()(std::size_t x, std::size_t y) const { return bits[y * width + x]; }
  std::uint8_t& operator()(std::size_t x, std::size_t y) { return bits[y * width + x]; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

enum class Connectivity { four = 4, eight = 8 };

struct Component {
  int id = 0;
  std::size_t area = 0;
  std::size_t min_x = 0, min_y = 0, max_x = 0, max_y = 0;  // inclusive bbox
};

struct ComponentTable {
  std::vector<Component> components;  // components[i].id == i + 1
  std::vector<int> labels;            // per pixel, 0 = background
  std::size_t width = 0, height = 0;
};

namespace detail {

inline int uf_find(std::vector<int>& parent, int a) {
  while (parent[a] != a) {
    parent[a] = parent[parent[a]];
    a = parent[a];
  }
  return a;
}

inline void uf_union(std::vector<int>& parent, int a, int b) {
  a = uf_find(parent, a);
  b = uf_find(parent, b);
  if (a == b) return;
  if (a < b) parent[b] = a;
  else parent[a] = b;
}

}  // namespace detail

/// Two-pass union-find labeling. Ids are dense from 1 in raster-scan order of
/// each component's first pixel.
inline ComponentTable connected_components(const BinaryMask& mask,
                                           Connectivity conn = Connectivity::eight) {
  const std::size_t w = mask.width, h = mask.height;
  ComponentTable table;
  table.width = w;
  table.height = h;
  table.labels.assign(w * h, 0);
  std::vector<int> parent{0};

  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!mask(x, y)) continue;
      int neighbors[4];
      int n = 0;
      auto look = [&](std::ptrdiff_t nx, std::ptrdiff_t ny) {
        if (nx < 0 || ny < 0 || nx >= static_cast<std::ptrdiff_t>(w)) return;
        const int l = table.labels[static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx)];
        if (l) neighbors[n++] = l;
      };
      const auto sx = static_cast<std::ptrdiff_t>(x), sy = static_cast<std::ptrdiff_t>(y);
      look(sx - 1, sy);
      look(sx, sy - 1);
      if (conn == Connectivity::eight) {
        look(sx - 1, sy - 1);
        look(sx + 1, sy - 1);
      }
      int& label = table.labels[y * w + x];
      if (n == 0) {
        label = static_cast<int>(parent.size());
        parent.push_back(label);
      } else {
        label = *std::min_element(neighbors, neighbors + n);
        for (int i = 0; i < n; ++i) detail::uf_union(parent, label, neighbors[i]);
      }
    }
  }

  std::vector<int> dense(parent.size(), 0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      int& label = table.labels[y * w + x];
      if (!label) continue;
      const int root = detail::uf_find(parent, label);
      if (!dense[root]) {
        dense[root] = static_cast<int>(table.components.size()) + 1;
        table.components.push_back({dense[root], 0, x, y, x, y});
      }
      label = dense[root];
      auto& c = table.components[static_cast<std::size_t>(label - 1)];
      ++c.area;
      c.min_x = std::min(c.min_x, x);
      c.max_x = std::max(c.max_x, x);
      c.min_y = std::min(c.min_y, y);
      c.max_y = std::max(c.max_y, y);
    }
  }
  return table;
}

/// Zeroes every component whose area is below min_area.
inline BinaryMask remove_small_components(const BinaryMask& mask, std::size_t min_area,
                                          Connectivity conn = Connectivity::eight) {
  if (min_area < 1) throw ConfigError("remove_small_components: min_area must be >= 1");
  const auto table = connected_components(mask, conn);
  BinaryMask out = mask;
  for (std::size_t i = 0; i < out.bits.size(); ++i) {
    const int l = table.labels[i];
    if (l && table.components[static_cast<std::size_t>(l - 1)].area < min_area) out.bits[i] = 0;
  }
  return out;
}

namespace detail {

// Separable square dilation (is_max) or erosion over windows clipped to the
// image. Clipping means dilation sees outside pixels as 0 and erosion sees
// them as 1, which keeps the two operators adjoint.
inline BinaryMask square_filter(const BinaryMask& in, std::size_t radius, bool is_max) {
  const std::size_t w = in.width, h = in.height;
  BinaryMask rows(w, h), out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t lo = x >= radius ? x - radius : 0;
      const std::size_t hi = std::min(w - 1, x + radius);
      std::uint8_t v = is_max ? 0 : 1;
      for (std::size_t i = lo; i <= hi; ++i) {
        v = is_max ? std::max(v, in(i, y)) : std::min(v, in(i, y));
      }
      rows(x, y) = v;
    }
  }
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t lo = y >= radius ? y - radius : 0;
    const std::size_t hi = std::min(h - 1, y + radius);
    for (std::size_t x = 0; x < w; ++x) {
      std::uint8_t v = is_max ? 0 : 1;
      for (std::size_t j = lo; j <= hi; ++j) {
        v = is_max ? std::max(v, rows(x, j)) : std::min(v, rows(x, j));
      }
      out(x, y) = v;
    }
  }
  return out;
}

}  // namespace detail

inline BinaryMask dilate(const BinaryMask& m, std::size_t radius) {
  return detail::square_filter(m, radius, true);
}

inline BinaryMask erode(const BinaryMask& m, std::size_t radius) {
  return detail::square_filter(m, radius, false);
}

/// Closing then opening with a (2r+1)x(2r+1) square. Radius 0 is the identity.
inline BinaryMask morph_close_open(const BinaryMask& mask, std::size_t radius) {
  if (radius == 0 || mask.bits.empty()) return mask;
  const auto closed = erode(dilate(mask, radius), radius);
  return dilate(erode(closed, radius), radius);
}

}  // namespace growthcast
