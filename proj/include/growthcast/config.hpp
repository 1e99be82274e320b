// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.
//
// Run configuration: `key = value` files (blank lines and '#' comments
// allowed) layered over defaults, then command-line overrides through the
// same set(). Unknown keys and unparsable values are errors.

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <type_traits>
#include <string>
#include <vector>

#include "growthcast/convlstm.hpp"
#include "growthcast/segnet.hpp"
#include "growthcast/synth.hpp"

namespace growthcast {

struct CleanConfig {
  std::size_t min_area = 64;
  std::size_t radius = 1;
  Connectivity connectivity = Connectivity::eight;
};

struct RunConfig {
  std::uint64_t seed = 42;
  std::string out = "out";
  std::size_t tile_size = 256;
  std::size_t block_size = 1024;
  double threshold = 0.5;
  int urban_label = -1;  // -1: not given
  SegConfig seg;
  CleanConfig clean;
  TrainConfig train;
  ConvLstmConfig model;
  GrowthConfig synth;

  RunConfig() {
    synth.seed = seed;
    train.seed = seed;
  }

  void set(const std::string& key, const std::string& value) {
    auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->second(*this, value);
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto body = trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
      try {
        set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
      } catch (const ConfigError& e) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  static std::vector<std::string> keys() {
    std::vector<std::string> out;
    for (const auto& [k, _] : setters()) out.push_back(k);
    return out;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }

  template <typename N>
  static N parse_number(const std::string& v) {
    N out{};
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || v.empty()) throw ConfigError("invalid number '" + v + "'");
    return out;
  }

 private:
  using Setter = std::function<void(RunConfig&, const std::string&)>;

  static const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
      std::map<std::string, Setter> t;
      auto size = [](auto member) {
        return Setter([member](RunConfig& c, const std::string& v) {
          if (!v.empty() && v[0] == '-') throw ConfigError("must be non-negative, got '" + v + "'");
          c.*member = parse_number<std::size_t>(v);
        });
      };
      auto real = [](auto member) {
        return Setter([member](RunConfig& c, const std::string& v) { c.*member = parse_number<double>(v); });
      };
      t["seed"] = [](RunConfig& c, const std::string& v) {
        c.seed = parse_number<std::uint64_t>(v);
        c.synth.seed = c.seed;
        c.train.seed = c.seed;
      };
      t["out"] = [](RunConfig& c, const std::string& v) {
        if (v.empty()) throw ConfigError("must not be empty");
        c.out = v;
      };
      t["tile_size"] = size(&RunConfig::tile_size);
      t["block_size"] = size(&RunConfig::block_size);
      t["threshold"] = real(&RunConfig::threshold);
      t["urban_label"] = [](RunConfig& c, const std::string& v) { c.urban_label = parse_number<int>(v); };

      auto sub = [](auto outer, auto inner) {
        return Setter([=](RunConfig& c, const std::string& v) {
          auto& target = (c.*outer).*inner;
          if constexpr (std::is_same_v<std::decay_t<decltype(target)>, double>) {
            target = parse_number<double>(v);
          } else {
            if (!v.empty() && v[0] == '-') throw ConfigError("must be non-negative, got '" + v + "'");
            target = parse_number<std::decay_t<decltype(target)>>(v);
          }
        });
      };
      t["seg.components"] = sub(&RunConfig::seg, &SegConfig::components);
      t["seg.filters"] = sub(&RunConfig::seg, &SegConfig::filters);
      t["seg.labels"] = sub(&RunConfig::seg, &SegConfig::labels);
      t["seg.mu"] = sub(&RunConfig::seg, &SegConfig::continuity_weight);
      t["seg.lr"] = sub(&RunConfig::seg, &SegConfig::lr);
      t["seg.momentum"] = sub(&RunConfig::seg, &SegConfig::momentum);
      t["seg.max_iters"] = sub(&RunConfig::seg, &SegConfig::max_iters);
      t["seg.min_labels"] = sub(&RunConfig::seg, &SegConfig::min_labels);

      t["clean.min_area"] = sub(&RunConfig::clean, &CleanConfig::min_area);
      t["clean.radius"] = sub(&RunConfig::clean, &CleanConfig::radius);
      t["clean.connectivity"] = [](RunConfig& c, const std::string& v) {
        if (v == "4") c.clean.connectivity = Connectivity::four;
        else if (v == "8") c.clean.connectivity = Connectivity::eight;
        else throw ConfigError("must be 4 or 8, got '" + v + "'");
      };

      t["train.augment"] = [](RunConfig& c, const std::string& v) {
        if (v == "true" || v == "1") c.train.augment = true;
        else if (v == "false" || v == "0") c.train.augment = false;
        else throw ConfigError("must be true or false, got '" + v + "'");
      };
      t["train.batch_size"] = sub(&RunConfig::train, &TrainConfig::batch_size);
      t["train.epochs"] = sub(&RunConfig::train, &TrainConfig::epochs_max);
      t["train.patience"] = sub(&RunConfig::train, &TrainConfig::patience);
      t["train.lr"] = [](RunConfig& c, const std::string& v) { c.train.adam.lr = parse_number<double>(v); };
      t["train.beta1"] = [](RunConfig& c, const std::string& v) { c.train.adam.beta1 = parse_number<double>(v); };
      t["train.beta2"] = [](RunConfig& c, const std::string& v) { c.train.adam.beta2 = parse_number<double>(v); };
      t["train.epsilon"] = [](RunConfig& c, const std::string& v) { c.train.adam.epsilon = parse_number<double>(v); };
      t["train.layers"] = sub(&RunConfig::model, &ConvLstmConfig::layers);
      t["train.filters"] = sub(&RunConfig::model, &ConvLstmConfig::filters);
      t["train.output_gate"] = [](RunConfig& c, const std::string& v) {
        if (v == "previous") c.model.output_gate = OutputGatePeephole::previous;
        else if (v == "current") c.model.output_gate = OutputGatePeephole::current;
        else throw ConfigError("must be 'previous' or 'current', got '" + v + "'");
      };

      t["synth.width"] = sub(&RunConfig::synth, &GrowthConfig::width);
      t["synth.height"] = sub(&RunConfig::synth, &GrowthConfig::height);
      t["synth.dates"] = sub(&RunConfig::synth, &GrowthConfig::dates);
      t["synth.initial_fraction"] = sub(&RunConfig::synth, &GrowthConfig::initial_fraction);
      t["synth.growth_rate"] = sub(&RunConfig::synth, &GrowthConfig::growth_rate);
      t["synth.noise"] = sub(&RunConfig::synth, &GrowthConfig::noise);
      return t;
    }();
    return table;
  }
};

}  // namespace growthcast
