// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.
//
// Library walk-through on a small synthetic series: segment each render into
// an urban mask, train the predictor on dates 1->2 (validating on 2->3) and
// score its prediction of date 3 against the persistence baseline.

#include <iostream>

#include "growthcast/growthcast.hpp"
#include "growthcast/pipeline.hpp"

int main() {
  using namespace growthcast;
  try {
    RunConfig cfg;
    cfg.synth.width = cfg.synth.height = 64;
    cfg.seg.filters = cfg.seg.labels = 16;
    cfg.seg.components = 2;
    cfg.seg.max_iters = 60;
    cfg.clean.min_area = 16;
    cfg.tile_size = 32;
    cfg.model.layers = 1;
    cfg.model.filters = 4;
    cfg.train.batch_size = 2;
    cfg.train.epochs_max = 5;
    cfg.train.adam.lr = 0.01;

    const auto series = generate_series(cfg.synth);
    std::vector<BinaryMask> masks;
    for (std::size_t t = 0; t < series.renders.size(); ++t) {
      const auto seg = segment_raster(series.renders[t], cfg, &series.masks[t]);
      std::cout << "date " << t + 1 << ": " << seg.cleaned.count() << " urban pixels (truth "
                << series.masks[t].count() << ")\n";
      masks.push_back(seg.cleaned);
    }

    auto run = train_on_dates(masks, cfg, [](const EpochLog& e) {
      std::cout << "epoch " << e.epoch << " val loss " << e.val_loss << '\n';
    });
    const auto pred = predict_next(run.model, masks[1], cfg.tile_size, cfg.threshold);
    std::cout << report_text(evaluate_against_truth(pred.probability, masks[1], masks[2], cfg.tile_size,
                                                    cfg.threshold));
  } catch (const Error& e) {
    std::cerr << e.kind() << ": " << e.what() << '\n';
    return e.exit_code();
  }
  return 0;
}
