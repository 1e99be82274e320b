// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.
//
// GCKP1 model checkpoints:
//   "GCKP1" | u32 version | u32 entry count
//   per entry: u32 name length | name bytes | u32 rank | u32 dims[rank]
//   then every entry's float32 values, in manifest order.
// All integers and floats are little-endian. The first entry, "meta.config",
// carries the architecture so a checkpoint can be loaded without side inputs.

#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "growthcast/convlstm.hpp"
#include "growthcast/image_io.hpp"

namespace growthcast {

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace ckpt_detail {

inline Tensor<float> encode_config(const ConvLstmConfig& c) {
  return Tensor<float>({8}, {static_cast<float>(c.in_channels), static_cast<float>(c.out_channels),
                             static_cast<float>(c.layers), static_cast<float>(c.filters),
                             static_cast<float>(c.seq_len),
                             c.output_gate == OutputGatePeephole::current ? 1.0f : 0.0f,
                             static_cast<float>(c.bn_eps), static_cast<float>(c.bn_momentum)});
}

inline ConvLstmConfig decode_config(const Tensor<float>& t, const std::string& where) {
  if (t.shape() != Shape{8}) throw DataError(where + ": corrupt checkpoint (bad meta.config)");
  auto count = [&](std::size_t i) {
    const float v = t[i];
    if (!(v >= 1.0f && v <= 1e6f) || v != static_cast<float>(static_cast<std::size_t>(v)))
      throw DataError(where + ": corrupt checkpoint (bad meta.config)");
    return static_cast<std::size_t>(v);
  };
  ConvLstmConfig c;
  c.in_channels = count(0);
  c.out_channels = count(1);
  c.layers = count(2);
  c.filters = count(3);
  c.seq_len = count(4);
  c.output_gate = t[5] != 0.0f ? OutputGatePeephole::current : OutputGatePeephole::previous;
  c.bn_eps = t[6];
  c.bn_momentum = t[7];
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw DataError(where + ": corrupt checkpoint (" + e.what() + ")");
  }
  return c;
}

}  // namespace ckpt_detail

inline std::string checkpoint_bytes(ConvLstmModel<float>& model) {
  std::vector<std::pair<std::string, const Tensor<float>*>> entries;
  const auto meta = ckpt_detail::encode_config(model.config());
  entries.emplace_back("meta.config", &meta);
  for (auto& [name, t] : model.named_tensors()) entries.emplace_back(name, t);

  std::ostringstream os(std::ios::binary);
  os.write("GCKP1", 5);
  io_detail::put_u32(os, kCheckpointVersion);
  io_detail::put_u32(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    io_detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    io_detail::put_u32(os, static_cast<std::uint32_t>(t->rank()));
    for (auto d : t->shape()) io_detail::put_u32(os, static_cast<std::uint32_t>(d));
  }
  for (const auto& [name, t] : entries)
    for (float v : t->data()) io_detail::put_f32(os, v);
  return os.str();
}

inline ConvLstmModel<float> checkpoint_from_bytes(const std::string& bytes, const std::string& where = "checkpoint") {
  std::istringstream is(bytes, std::ios::binary);
  char magic[5] = {};
  if (!is.read(magic, 5) || std::string(magic, 5) != "GCKP1")
    throw DataError(where + ": not a GCKP1 checkpoint (bad magic)");
  const auto version = io_detail::get_u32(is, where);
  if (version != kCheckpointVersion)
    throw DataError(where + ": unsupported checkpoint version " + std::to_string(version));
  const auto count = io_detail::get_u32(is, where);
  if (count == 0 || count > 100000) throw DataError(where + ": corrupt checkpoint (entry count)");

  std::vector<std::pair<std::string, Shape>> manifest;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto len = io_detail::get_u32(is, where);
    if (len == 0 || len > 256) throw DataError(where + ": corrupt checkpoint (entry name)");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw DataError(where + ": truncated file");
    const auto rank = io_detail::get_u32(is, where);
    if (rank == 0 || rank > 8) throw DataError(where + ": corrupt checkpoint (rank of " + name + ")");
    Shape shape(rank);
    for (auto& d : shape) d = io_detail::get_u32(is, where);
    manifest.emplace_back(std::move(name), std::move(shape));
  }
  std::vector<Tensor<float>> blobs;
  for (const auto& [name, shape] : manifest) {
    const auto n = shape_size(shape);
    if (n == 0 || n > (std::size_t{1} << 30)) throw DataError(where + ": corrupt checkpoint (size of " + name + ")");
    std::vector<float> data(n);
    for (auto& v : data) v = io_detail::get_f32(is, where);
    blobs.emplace_back(shape, std::move(data));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw DataError(where + ": corrupt checkpoint (trailing bytes)");
  if (manifest.front().first != "meta.config") throw DataError(where + ": corrupt checkpoint (missing meta.config)");

  ConvLstmModel<float> model(ckpt_detail::decode_config(blobs.front(), where));
  auto named = model.named_tensors();
  if (named.size() + 1 != manifest.size())
    throw DataError(where + ": corrupt checkpoint (expected " + std::to_string(named.size() + 1) + " entries, found " +
                    std::to_string(manifest.size()) + ")");
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& [name, shape] = manifest[i + 1];
    if (name != named[i].first || shape != named[i].second->shape()) {
      throw DataError(where + ": corrupt checkpoint (entry " + name + " " + to_string(shape) + " does not match " +
                      named[i].first + " " + to_string(named[i].second->shape()) + ")");
    }
    *named[i].second = std::move(blobs[i + 1]);
  }
  return model;
}

inline void save_checkpoint(ConvLstmModel<float>& model, const std::string& path) {
  const auto bytes = checkpoint_bytes(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

inline ConvLstmModel<float> load_checkpoint(const std::string& path) {
  const auto raw = io_detail::read_bytes(path);
  return checkpoint_from_bytes(std::string(raw.begin(), raw.end()), path);
}

}  // namespace growthcast
