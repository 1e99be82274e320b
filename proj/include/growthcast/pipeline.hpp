// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.
//
// End-to-end stages shared by the command-line tool and the benchmark:
// block-wise segmentation with urban-label selection and cleanup, training on
// a dated mask series, next-date prediction and side-by-side evaluation
// against the persistence baseline.

#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "growthcast/config.hpp"
#include "growthcast/convlstm.hpp"
#include "growthcast/mask_ops.hpp"
#include "growthcast/metrics.hpp"
#include "growthcast/segnet.hpp"

namespace growthcast {

inline BinaryMask clean_mask(const BinaryMask& mask, const CleanConfig& cfg) {
  if (cfg.min_area < 1) throw ConfigError("clean.min_area must be >= 1");
  return morph_close_open(remove_small_components(mask, cfg.min_area, cfg.connectivity), cfg.radius);
}

struct SegmentOutput {
  LabelMap labels;  // cluster ids, local to each block
  std::size_t blocks = 0;
  std::vector<std::size_t> iterations;  // per block
  bool urban_selected = false;
  std::vector<int> block_urban_label;  // per block; -1 when the block has no reference urban pixels
  BinaryMask raw;                      // selected label before cleanup
  BinaryMask cleaned;
};

inline std::string histogram_text(const LabelMap& labels) {
  std::string s;
  for (const auto& [label, n] : labels.histogram()) {
    if (!s.empty()) s += ", ";
    s += std::to_string(label) + ":" + std::to_string(n);
  }
  return s;
}

/// Segments `image` in non-overlapping block_size squares (edge blocks are
/// cropped, not padded), each with a freshly trained network. The urban label
/// of each block is the one best matching `reference` when given, else
/// cfg.urban_label; with neither, only the label map is produced.
inline SegmentOutput segment_raster(const Raster& image, const RunConfig& cfg, const BinaryMask* reference,
                                    const std::function<void(std::size_t, std::size_t)>& on_block = {}) {
  cfg.seg.validate();
  if (cfg.block_size < 8) throw ConfigError("block_size must be >= 8");
  if (reference && (reference->width != image.width() || reference->height != image.height()))
    throw ShapeError("segment: reference mask size differs from the image");
  if (cfg.urban_label >= static_cast<int>(cfg.seg.labels))
    throw ConfigError("urban_label " + std::to_string(cfg.urban_label) + " outside [0," +
                      std::to_string(cfg.seg.labels) + ")");

  const std::size_t w = image.width(), h = image.height(), bs = cfg.block_size;
  const std::size_t cols = ceil_div(w, bs), rows = ceil_div(h, bs);
  SegmentOutput out;
  out.blocks = cols * rows;
  out.labels = {w, h, static_cast<int>(cfg.seg.labels), std::vector<int>(w * h, 0)};
  out.urban_selected = reference != nullptr || cfg.urban_label >= 0;
  out.raw = BinaryMask(w, h);
  RngStream seeds(cfg.seed);
  for (std::size_t gy = 0; gy < rows; ++gy) {
    for (std::size_t gx = 0; gx < cols; ++gx) {
      const std::size_t x0 = gx * bs, y0 = gy * bs;
      const std::size_t bw = std::min(bs, w - x0), bh = std::min(bs, h - y0);
      RngStream rng(seeds.next_u64());
      const auto seg = train_segmentation<float>(crop(image, x0, y0, bw, bh), cfg.seg, rng);
      out.iterations.push_back(seg.iterations);
      for (std::size_t y = 0; y < bh; ++y)
        for (std::size_t x = 0; x < bw; ++x) out.labels.labels[(y0 + y) * w + x0 + x] = seg.labels(x, y);

      int urban = -1;
      if (reference) {
        const auto ref = crop(*reference, x0, y0, bw, bh);
        if (ref.count() > 0) urban = select_urban_label(seg.labels, ref);
      } else if (cfg.urban_label >= 0) {
        urban = cfg.urban_label;
      }
      out.block_urban_label.push_back(urban);
      if (urban >= 0) {
        const auto m = extract_class_mask(seg.labels, urban);
        for (std::size_t y = 0; y < bh; ++y)
          for (std::size_t x = 0; x < bw; ++x) out.raw(x0 + x, y0 + y) = m(x, y);
      }
      if (on_block) on_block(gy * cols + gx, out.blocks);
    }
  }
  out.cleaned = out.urban_selected ? clean_mask(out.raw, cfg.clean) : out.raw;
  return out;
}

inline TileSet tile_mask(const BinaryMask& m, std::size_t tile_size) { return tile(mask_to_raster(m), tile_size); }

struct TrainingRun {
  ConvLstmModel<float> model;
  TrainingLog log;
  Dataset train;
  Dataset validate;
  std::size_t batch_size = 0;  // after clamping to the training-set size
};

/// Trains on dates 1 -> 2 and validates on 2 -> 3 of a dated mask series.
inline TrainingRun train_on_dates(const std::vector<BinaryMask>& dates, const RunConfig& cfg,
                                  const std::function<void(const EpochLog&)>& on_epoch = {}) {
  if (dates.size() < 3) {
    throw DataError("validation requires k=2, m=3: need masks for at least 3 dates, got " +
                    std::to_string(dates.size()));
  }
  std::vector<TileSet> grids;
  for (const auto& d : dates) {
    if (d.width != dates.front().width || d.height != dates.front().height)
      throw DataError("grid mismatch: date masks differ in size");
    grids.push_back(tile_mask(d, cfg.tile_size));
  }
  auto train = make_dataset(grids, 1, 2, DatasetRole::train);
  auto validate = make_dataset(grids, 2, 3, DatasetRole::validate);

  ConvLstmConfig mc = cfg.model;
  mc.in_channels = 1;
  mc.out_channels = 1;
  mc.seq_len = 1;
  RngStream rng(cfg.seed);
  ConvLstmModel<float> model(mc, rng);
  TrainConfig tc = cfg.train;
  tc.seed = rng.next_u64();
  tc.threshold = cfg.threshold;
  tc.batch_size = std::min(tc.batch_size, train.size());
  auto log = train_model(model, train, &validate, tc, on_epoch);
  return {std::move(model), std::move(log), std::move(train), std::move(validate), tc.batch_size};
}

struct Prediction {
  Raster probability;  // [1,H,W] in (0,1)
  BinaryMask mask;
};

inline Prediction predict_next(ConvLstmModel<float>& model, const BinaryMask& current, std::size_t tile_size,
                               double threshold) {
  auto grid = tile_mask(current, tile_size);
  grid.tiles = predict(model, grid.tiles);
  Prediction p;
  p.probability = stitch(grid);
  p.mask = binarize(p.probability.pixels, static_cast<float>(threshold));
  return p;
}

/// Scores a probability map and the persistence baseline (the current mask)
/// against the truth: per-tile metrics on the tile grid, confusion on the
/// binarized full extent.
inline std::vector<MethodEvaluation> evaluate_against_truth(const Raster& probability, const BinaryMask& current,
                                                            const BinaryMask& truth, std::size_t tile_size,
                                                            double threshold) {
  if (probability.width() != truth.width || probability.height() != truth.height || current.width != truth.width ||
      current.height != truth.height) {
    throw DataError("grid mismatch: prediction, input and truth differ in size");
  }
  if (probability.bands() != 1) throw ShapeError("evaluate: prediction must have one band");
  const auto truth_tiles = tile_mask(truth, tile_size).tiles;
  MethodEvaluation model{"convlstm", evaluate_tiles(tile(probability, tile_size).tiles, truth_tiles),
                         confusion(truth, binarize(probability.pixels, static_cast<float>(threshold)))};
  MethodEvaluation persistence{"persistence",
                               evaluate_tiles(persistence_baseline(tile_mask(current, tile_size).tiles), truth_tiles),
                               confusion(truth, current)};
  return {std::move(model), std::move(persistence)};
}

}  // namespace growthcast
