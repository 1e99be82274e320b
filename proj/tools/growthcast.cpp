// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.
//
// growthcast: synth | segment | clean | tile | train | predict | evaluate.
// Settings come from defaults, then --config FILE, then flags (--set KEY=VALUE
// reaches any config key). Errors print one line "<Kind>: message" to stderr
// and exit 2 (config), 3 (data) or 4 (numeric).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "growthcast/checkpoint.hpp"
#include "growthcast/config.hpp"
#include "growthcast/image_io.hpp"
#include "growthcast/pipeline.hpp"
#include "growthcast/synth.hpp"

namespace fs = std::filesystem;
using namespace growthcast;

namespace {

struct Options {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::string> seed, out, tile_size, block_size, urban_label, threshold, epochs;
  std::vector<std::string> inputs;
  std::vector<std::string> masks;
  std::string reference, manifest, checkpoint, truth, pred;
};

RunConfig resolve(const Options& o) {
  RunConfig cfg;
  if (!o.config_file.empty()) cfg.load_file(o.config_file);
  const std::pair<const char*, const std::optional<std::string>*> flags[] = {
      {"seed", &o.seed},           {"out", &o.out},        {"tile_size", &o.tile_size},
      {"block_size", &o.block_size}, {"urban_label", &o.urban_label}, {"threshold", &o.threshold},
      {"train.epochs", &o.epochs}};
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    cfg.set(RunConfig::trim(kv.substr(0, eq)), RunConfig::trim(kv.substr(eq + 1)));
  }
  for (const auto& [key, value] : flags)
    if (*value) cfg.set(key, **value);
  if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) throw ConfigError("threshold must lie in (0,1)");
  return cfg;
}

fs::path out_dir(const RunConfig& cfg) {
  const fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory '" + cfg.out + "'");
  return dir;
}

std::string stem(const std::string& path) { return fs::path(path).stem().string(); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out || !(out << text)) throw DataError("cannot write '" + path.string() + "'");
}

const std::string& single_input(const Options& o, const char* what) {
  if (o.inputs.size() != 1) throw ConfigError(std::string(what) + " expects exactly one --input");
  return o.inputs.front();
}

int cmd_synth(const Options& o) {
  const auto cfg = resolve(o);
  const auto dir = out_dir(cfg);
  const auto series = generate_series(cfg.synth);
  for (std::size_t t = 0; t < series.masks.size(); ++t) {
    const auto id = std::to_string(t + 1);
    save_raster(series.renders[t], (dir / ("render_" + id + ".png")).string());
    save_mask(series.masks[t], (dir / ("mask_" + id + ".png")).string());
  }
  const auto st = growth_stats(series.masks);
  std::string csv = "date,urban_fraction,new_pixels,measured_rate\n";
  for (std::size_t t = 0; t < st.urban_fraction.size(); ++t) {
    csv += std::to_string(t + 1) + "," + format_fixed(st.urban_fraction[t], 6) + ",";
    csv += t == 0 ? std::string(",") : std::to_string(st.changed_pixels[t - 1]) + "," +
                                          format_fixed(st.measured_rate[t - 1], 6);
    csv += "\n";
  }
  write_text(dir / "growth_stats.csv", csv);
  spdlog::info("wrote {} dates of {}x{} to {}", series.masks.size(), cfg.synth.width, cfg.synth.height, dir.string());
  return 0;
}

int cmd_segment(const Options& o) {
  const auto cfg = resolve(o);
  const auto& input = single_input(o, "segment");
  const auto image = load_raster(input);
  std::optional<BinaryMask> reference;
  if (!o.reference.empty()) reference = load_mask(o.reference);
  const auto dir = out_dir(cfg);
  const auto result = segment_raster(image, cfg, reference ? &*reference : nullptr, [](std::size_t i, std::size_t n) {
    spdlog::debug("segmented block {}/{}", i + 1, n);
  });
  const auto base = stem(input);
  save_label_png(result.labels.labels, result.labels.width, result.labels.height, result.labels.label_count,
                 (dir / (base + ".labels.png")).string());
  spdlog::info("{} block(s), {} distinct labels", result.blocks, result.labels.distinct());
  if (!result.urban_selected) {
    throw ConfigError("segment needs --reference or --urban-label to pick the urban class; label histogram (label:pixels): " +
                      histogram_text(result.labels));
  }
  save_mask(result.raw, (dir / (base + ".urban_raw.png")).string());
  save_mask(result.cleaned, (dir / (base + ".urban.png")).string());
  if (reference) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < reference->bits.size(); ++i) {
      inter += reference->bits[i] && result.cleaned.bits[i];
      uni += reference->bits[i] || result.cleaned.bits[i];
    }
    spdlog::info("IoU with reference: {:.4f}", uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0);
  }
  return 0;
}

int cmd_clean(const Options& o) {
  const auto cfg = resolve(o);
  const auto& input = single_input(o, "clean");
  const auto mask = load_mask(input);
  const auto cleaned = clean_mask(mask, cfg.clean);
  const auto dir = out_dir(cfg);
  save_mask(cleaned, (dir / (stem(input) + ".clean.png")).string());
  spdlog::info("urban pixels {} -> {}", mask.count(), cleaned.count());
  return 0;
}

int cmd_tile(const Options& o) {
  const auto cfg = resolve(o);
  if (o.inputs.empty()) throw ConfigError("tile expects at least one --input");
  const auto dir = out_dir(cfg) / "tiles";
  fs::create_directories(dir);
  std::vector<std::vector<std::string>> paths;
  std::optional<TileSet> first;
  for (const auto& input : o.inputs) {
    const auto grid = tile(load_raster(input), cfg.tile_size);
    if (first && !grid.same_grid(*first)) throw DataError("grid mismatch: '" + input + "' tiles differently");
    if (!first) first = grid;
    paths.emplace_back();
    for (std::size_t j = 0; j < grid.count(); ++j) {
      const auto name = stem(input) + "_r" + std::to_string(j / grid.cols) + "_c" + std::to_string(j % grid.cols) + ".urtn";
      save_tensor(grid.tiles[j], (dir / name).string());
      paths.back().push_back((dir / name).string());
    }
    spdlog::info("{}: {}x{} grid of {} px tiles", input, grid.cols, grid.rows, grid.tile_size);
  }
  if (paths.size() >= 3) {
    std::vector<ManifestEntry> entries;
    for (std::size_t j = 0; j < paths[0].size(); ++j) entries.push_back({DatasetRole::train, paths[0][j], paths[1][j]});
    for (std::size_t j = 0; j < paths[0].size(); ++j)
      entries.push_back({DatasetRole::validate, paths[1][j], paths[2][j]});
    write_manifest(entries, (out_dir(cfg) / "manifest.txt").string());
  }
  return 0;
}

std::string train_log_csv(const TrainingLog& log) {
  std::string csv = "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
  for (const auto& e : log.epochs) {
    csv += std::to_string(e.epoch) + "," + format_fixed(e.train_loss, 8) + "," + format_fixed(e.train_accuracy, 6) +
           "," + format_fixed(e.val_loss, 8) + "," + format_fixed(e.val_accuracy, 6) + "\n";
  }
  return csv;
}

void log_epoch(const EpochLog& e) {
  spdlog::info("epoch {:>3}  train loss {:.6f} acc {:.4f}  val loss {:.6f} acc {:.4f}", e.epoch, e.train_loss,
               e.train_accuracy, e.val_loss, e.val_accuracy);
}

int cmd_train(const Options& o) {
  const auto cfg = resolve(o);
  const auto dir = out_dir(cfg);
  TrainingLog log;
  std::optional<ConvLstmModel<float>> model;
  if (!o.manifest.empty()) {
    if (!o.masks.empty()) throw ConfigError("train takes either --masks or --manifest, not both");
    Dataset train, validate;
    for (const auto& e : read_manifest(o.manifest)) {
      auto& ds = e.role == DatasetRole::train ? train : validate;
      ds.x.push_back(load_tensor(e.x_path));
      ds.y.push_back(load_tensor(e.y_path));
    }
    if (validate.size() == 0) throw DataError("validation requires k=2, m=3: manifest has no validate entries");
    if (train.size() == 0) throw DataError("manifest has no train entries");
    ConvLstmConfig mc = cfg.model;
    mc.in_channels = train.x.front().dim(0);
    mc.out_channels = train.y.front().dim(0);
    RngStream rng(cfg.seed);
    model.emplace(mc, rng);
    TrainConfig tc = cfg.train;
    tc.seed = rng.next_u64();
    tc.threshold = cfg.threshold;
    if (tc.batch_size > train.size()) {
      spdlog::info("batch size {} clamped to training-set size {}", tc.batch_size, train.size());
      tc.batch_size = train.size();
    }
    log = train_model(*model, train, &validate, tc, log_epoch);
  } else {
    std::vector<BinaryMask> dates;
    for (const auto& p : o.masks) dates.push_back(load_mask(p));
    auto run = train_on_dates(dates, cfg, log_epoch);
    if (run.batch_size < cfg.train.batch_size)
      spdlog::info("batch size {} was clamped to training-set size {}", cfg.train.batch_size, run.batch_size);
    log = std::move(run.log);
    model.emplace(std::move(run.model));
  }
  save_checkpoint(*model, (dir / "model.gckp").string());
  write_text(dir / "train_log.csv", train_log_csv(log));
  spdlog::info("best epoch {} of {}{}; checkpoint {}", log.best_epoch, log.epochs.size(),
               log.stopped_early ? " (early stop)" : "", (dir / "model.gckp").string());
  return 0;
}

int cmd_predict(const Options& o) {
  const auto cfg = resolve(o);
  if (o.checkpoint.empty()) throw ConfigError("predict needs --checkpoint");
  auto model = load_checkpoint(o.checkpoint);
  const auto& input = single_input(o, "predict");
  const auto p = predict_next(model, load_mask(input), cfg.tile_size, cfg.threshold);
  const auto dir = out_dir(cfg);
  save_tensor(p.probability.pixels, (dir / "prediction.urtn").string());
  save_raster(p.probability, (dir / "prediction.png").string());
  save_mask(p.mask, (dir / "prediction_mask.png").string());
  spdlog::info("predicted {} urban pixels", p.mask.count());
  return 0;
}

int cmd_evaluate(const Options& o) {
  const auto cfg = resolve(o);
  const auto& input = single_input(o, "evaluate");
  if (o.truth.empty()) throw ConfigError("evaluate needs --truth");
  if (o.checkpoint.empty() == o.pred.empty()) throw ConfigError("evaluate needs exactly one of --checkpoint or --pred");
  const auto current = load_mask(input);
  const auto truth = load_mask(o.truth);
  Raster probability;
  if (!o.checkpoint.empty()) {
    auto model = load_checkpoint(o.checkpoint);
    probability = predict_next(model, current, cfg.tile_size, cfg.threshold).probability;
  } else {
    probability = load_raster(o.pred);
  }
  const auto methods = evaluate_against_truth(probability, current, truth, cfg.tile_size, cfg.threshold);
  const auto dir = out_dir(cfg);
  write_text(dir / "report.csv", report_csv(methods));
  write_text(dir / "confusion.csv", confusion_csv(methods));
  const auto text = report_text(methods);
  write_text(dir / "report.txt", text);
  std::cout << text;
  return 0;
}

void init_logging() {
  auto logger = spdlog::stderr_color_mt("growthcast");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("GROWTHCAST_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off")
      throw ConfigError("GROWTHCAST_LOG: unknown level '" + std::string(env) + "'");
    spdlog::set_level(level);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Urban expansion mapping and next-date prediction"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_file, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", o.sets, "override any config key (KEY=VALUE, repeatable)");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--tile-size", o.tile_size, "prediction tile size");
    sub->add_option("--threshold", o.threshold, "binarization threshold");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic growth series");
  common(synth);

  auto* segment = app.add_subcommand("segment", "unsupervised block-wise segmentation to an urban mask");
  common(segment);
  segment->add_option("--input", o.inputs, "image (PNG or URTN1)")->required();
  segment->add_option("--block-size", o.block_size, "segmentation block size");
  segment->add_option("--urban-label", o.urban_label, "label id to keep as urban");
  segment->add_option("--reference", o.reference, "reference mask selecting the urban label by IoU");

  auto* clean = app.add_subcommand("clean", "remove small components and smooth a mask");
  common(clean);
  clean->add_option("--input", o.inputs, "mask")->required();

  auto* tilecmd = app.add_subcommand("tile", "cut rasters into tiles; 3+ inputs also get a dataset manifest");
  common(tilecmd);
  tilecmd->add_option("--input", o.inputs, "raster(s), in date order")->required();

  auto* train = app.add_subcommand("train", "train the predictor on dates 1->2, validate on 2->3");
  common(train);
  train->add_option("--masks", o.masks, "urban masks in date order");
  train->add_option("--manifest", o.manifest, "tile manifest written by 'tile'");
  train->add_option("--epochs", o.epochs, "maximum epochs");

  auto* predict = app.add_subcommand("predict", "predict the next-date mask");
  common(predict);
  predict->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
  predict->add_option("--input", o.inputs, "current mask")->required();

  auto* evaluate = app.add_subcommand("evaluate", "score model and persistence against the true next date");
  common(evaluate);
  evaluate->add_option("--input", o.inputs, "current mask")->required();
  evaluate->add_option("--truth", o.truth, "true next-date mask")->required();
  evaluate->add_option("--checkpoint", o.checkpoint, "model checkpoint");
  evaluate->add_option("--pred", o.pred, "precomputed probability map");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ConfigError: " << e.what() << '\n';
    return 2;
  }

  try {
    init_logging();
    if (*synth) return cmd_synth(o);
    if (*segment) return cmd_segment(o);
    if (*clean) return cmd_clean(o);
    if (*tilecmd) return cmd_tile(o);
    if (*train) return cmd_train(o);
    if (*predict) return cmd_predict(o);
    if (*evaluate) return cmd_evaluate(o);
  } catch (const Error& e) {
    std::cerr << e.kind() << ": " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "DataError: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
