// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.
//
// Rasters, non-overlapping tiling with right/bottom zero padding, stitching,
// and per-date dataset assembly.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "growthcast/mask_ops.hpp"
#include "growthcast/tensor.hpp"

namespace growthcast {

/// Multi-band image with pixels in [0,1], stored band-major as [bands,H,W].
struct Raster {
  Tensor<float> pixels;
  int source_bit_depth = 32;

  Raster() = default;
  explicit Raster(Tensor<float> p, int bit_depth = 32) : pixels(std::move(p)), source_bit_depth(bit_depth) {
    if (pixels.rank() != 3) throw ShapeError("raster pixels must be [bands,H,W], got " + to_string(pixels.shape()));
  }

  std::size_t bands() const { return pixels.dim(0); }
  std::size_t height() const { return pixels.dim(1); }
  std::size_t width() const { return pixels.dim(2); }

  friend bool operator==(const Raster& a, const Raster& b) { return a.pixels == b.pixels; }
};

inline Raster mask_to_raster(const BinaryMask& m) {
  Tensor<float> t({1, m.height, m.width});
  for (std::size_t i = 0; i < m.bits.size(); ++i) t[i] = m.bits[i] ? 1.0f : 0.0f;
  return Raster(std::move(t), 1);
}

/// Band 0 thresholded: value >= threshold becomes 1.
inline BinaryMask binarize(const Tensor<float>& band_major, float threshold = 0.5f) {
  if (band_major.rank() != 3) throw ShapeError("binarize expects [bands,H,W], got " + to_string(band_major.shape()));
  BinaryMask m(band_major.dim(2), band_major.dim(1));
  for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = band_major[i] >= threshold ? 1 : 0;
  return m;
}

inline BinaryMask raster_to_mask(const Raster& r, float threshold = 0.5f) {
  return binarize(r.pixels, threshold);
}

/// Copies the window [x0, x0+w) x [y0, y0+h), which must lie inside the raster.
inline Raster crop(const Raster& r, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) {
  if (w == 0 || h == 0 || x0 + w > r.width() || y0 + h > r.height()) {
    throw ShapeError("crop: window " + std::to_string(w) + "x" + std::to_string(h) + "+" + std::to_string(x0) +
                     "+" + std::to_string(y0) + " outside " + std::to_string(r.width()) + "x" +
                     std::to_string(r.height()));
  }
  Tensor<float> out({r.bands(), h, w});
  for (std::size_t b = 0; b < r.bands(); ++b)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out(b, y, x) = r.pixels(b, y0 + y, x0 + x);
  return Raster(std::move(out), r.source_bit_depth);
}

inline BinaryMask crop(const BinaryMask& m, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) {
  if (w == 0 || h == 0 || x0 + w > m.width || y0 + h > m.height) throw ShapeError("crop: window outside mask");
  BinaryMask out(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out(x, y) = m(x0 + x, y0 + y);
  return out;
}

struct TileSet {
  std::size_t tile_size = 0;
  std::size_t width = 0, height = 0, bands = 0;  // original extent
  std::size_t cols = 0, rows = 0;                // grid
  std::size_t pad_x = 0, pad_y = 0;
  std::vector<Tensor<float>> tiles;              // row-major grid, each [bands,ts,ts]

  std::size_t count() const { return tiles.size(); }
  bool same_grid(const TileSet& o) const {
    return tile_size == o.tile_size && width == o.width && height == o.height && cols == o.cols &&
           rows == o.rows;
  }
};

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

/// Cuts the raster into tile_size squares in row-major order, zero-padding
/// the right and bottom edges up to the next multiple of tile_size.
inline TileSet tile(const Raster& r, std::size_t tile_size) {
  if (tile_size < 8) throw ConfigError("tile: tile_size must be >= 8, got " + std::to_string(tile_size));
  TileSet ts;
  ts.tile_size = tile_size;
  ts.width = r.width();
  ts.height = r.height();
  ts.bands = r.bands();
  ts.cols = ceil_div(ts.width, tile_size);
  ts.rows = ceil_div(ts.height, tile_size);
  ts.pad_x = ts.cols * tile_size - ts.width;
  ts.pad_y = ts.rows * tile_size - ts.height;
  for (std::size_t gy = 0; gy < ts.rows; ++gy) {
    for (std::size_t gx = 0; gx < ts.cols; ++gx) {
      Tensor<float> t({ts.bands, tile_size, tile_size});
      for (std::size_t b = 0; b < ts.bands; ++b) {
        for (std::size_t y = 0; y < tile_size; ++y) {
          const std::size_t sy = gy * tile_size + y;
          if (sy >= ts.height) break;
          for (std::size_t x = 0; x < tile_size; ++x) {
            const std::size_t sx = gx * tile_size + x;
            if (sx >= ts.width) break;
            t(b, y, x) = r.pixels(b, sy, sx);
          }
        }
      }
      ts.tiles.push_back(std::move(t));
    }
  }
  return ts;
}

/// Reassembles a complete grid and crops the padding.
inline Raster stitch(const TileSet& ts) {
  if (ts.tiles.size() != ts.cols * ts.rows) {
    throw DataError("stitch: grid " + std::to_string(ts.cols) + "x" + std::to_string(ts.rows) +
                    " needs " + std::to_string(ts.cols * ts.rows) + " tiles, have " +
                    std::to_string(ts.tiles.size()));
  }
  Tensor<float> out({ts.bands, ts.height, ts.width});
  const std::size_t s = ts.tile_size;
  for (std::size_t j = 0; j < ts.tiles.size(); ++j) {
    const auto& t = ts.tiles[j];
    if (t.shape() != Shape{ts.bands, s, s}) {
      throw ShapeError("stitch: tile " + std::to_string(j) + " has shape " + to_string(t.shape()));
    }
    const std::size_t gx = j % ts.cols, gy = j / ts.cols;
    for (std::size_t b = 0; b < ts.bands; ++b) {
      for (std::size_t y = 0; y < s && gy * s + y < ts.height; ++y) {
        for (std::size_t x = 0; x < s && gx * s + x < ts.width; ++x) {
          out(b, gy * s + y, gx * s + x) = t(b, y, x);
        }
      }
    }
  }
  return Raster(std::move(out));
}

enum class DatasetRole { train, validate };

inline const char* to_string(DatasetRole r) { return r == DatasetRole::train ? "train" : "validate"; }

/// Paired tiles X_j = B_j^k, Y_j = B_j^m (1-based date indices).
struct Dataset {
  std::vector<Tensor<float>> x;
  std::vector<Tensor<float>> y;
  std::vector<std::size_t> grid_index;
  DatasetRole role = DatasetRole::train;
  std::size_t k = 0, m = 0;

  std::size_t size() const { return x.size(); }
};

inline Dataset make_dataset(const std::vector<TileSet>& dates, std::size_t k, std::size_t m,
                            DatasetRole role) {
  if (k < 1 || m < 1 || k > dates.size() || m > dates.size()) {
    throw ConfigError("make_dataset: date indices k=" + std::to_string(k) + ", m=" + std::to_string(m) +
                      " out of range for " + std::to_string(dates.size()) + " dates");
  }
  for (const auto& d : dates) {
    if (!d.same_grid(dates.front())) throw DataError("make_dataset: tile grids differ between dates");
  }
  Dataset ds;
  ds.role = role;
  ds.k = k;
  ds.m = m;
  const auto& src = dates[k - 1];
  const auto& dst = dates[m - 1];
  for (std::size_t j = 0; j < src.count(); ++j) {
    ds.x.push_back(src.tiles[j]);
    ds.y.push_back(dst.tiles[j]);
    ds.grid_index.push_back(j);
  }
  return ds;
}

/// Predicts "no change": each output tile is its input tile.
inline std::vector<Tensor<float>> persistence_baseline(const std::vector<Tensor<float>>& inputs) {
  return inputs;
}

}  // namespace growthcast
