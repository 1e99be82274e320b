// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.
//
// File formats:
//   PNG    8-bit gray or RGB rasters, 0/255 masks, indexed label maps with a
//          "<path>.palette.txt" sidecar ("label r g b" per line).
//   URTN1  raw tensor: ASCII "URTN1", u32 rank, rank x u32 dims, then
//          little-endian float32 values in row-major order.
//   Manifest  one "role x_path y_path" record per line, '#' comments.

#pragma once

#include <png.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "growthcast/raster.hpp"

namespace growthcast {

namespace io_detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError(what + ": truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& os, float f) { put_u32(os, std::bit_cast<std::uint32_t>(f)); }

inline float get_f32(std::istream& is, const std::string& what) {
  return std::bit_cast<float>(get_u32(is, what));
}

inline std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline bool has_png_signature(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

inline bool has_urtn_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  char magic[5] = {};
  in.read(magic, 5);
  return in.gcount() == 5 && std::memcmp(magic, "URTN1", 5) == 0;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace io_detail

inline void save_tensor(const Tensor<float>& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write("URTN1", 5);
  io_detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) io_detail::put_u32(out, static_cast<std::uint32_t>(d));
  for (float v : t.data()) io_detail::put_f32(out, v);
  if (!out) throw DataError("write failed for '" + path + "'");
}

inline Tensor<float> load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  char magic[5] = {};
  if (!in.read(magic, 5) || std::memcmp(magic, "URTN1", 5) != 0) {
    throw DataError("'" + path + "' is not a URTN1 tensor file");
  }
  const std::uint32_t rank = io_detail::get_u32(in, path);
  if (rank == 0 || rank > 8) throw DataError("'" + path + "': unsupported tensor rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& d : shape) {
    d = io_detail::get_u32(in, path);
    if (d == 0) throw DataError("'" + path + "': zero extent");
  }
  std::vector<float> data(shape_size(shape));
  for (auto& v : data) v = io_detail::get_f32(in, path);
  return Tensor<float>(std::move(shape), std::move(data));
}

/// Loads a PNG (8-bit gray or RGB, scaled by 1/255) or a URTN1 tensor of rank
/// 2 ([H,W]) or 3 ([bands,H,W]).
inline Raster load_raster(const std::string& path) {
  if (io_detail::has_urtn_magic(path)) {
    auto t = load_tensor(path);
    if (t.rank() == 2) t = t.reshaped({1, t.dim(0), t.dim(1)});
    if (t.rank() != 3) throw DataError("'" + path + "': raster tensors must be rank 2 or 3");
    for (float v : t.data()) {
      if (!(v >= 0.0f && v <= 1.0f)) throw DataError("'" + path + "': pixel value outside [0,1]");
    }
    return Raster(std::move(t), 32);
  }
  if (!io_detail::has_png_signature(path)) throw DataError("'" + path + "': unrecognized raster format");

  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw DataError("'" + path + "': " + image.message);
  }
  const bool colormap = image.format & PNG_FORMAT_FLAG_COLORMAP;
  const bool linear = image.format & PNG_FORMAT_FLAG_LINEAR;
  const bool alpha = image.format & PNG_FORMAT_FLAG_ALPHA;
  if (linear || colormap || alpha) {
    png_image_free(&image);
    throw DataError("'" + path + "': unsupported PNG layout (need 8-bit gray or RGB)");
  }
  const bool color = image.format & PNG_FORMAT_FLAG_COLOR;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t bands = color ? 3 : 1;
  const std::size_t w = image.width, h = image.height;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    throw DataError("'" + path + "': " + image.message);
  }
  Tensor<float> t({bands, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t b = 0; b < bands; ++b) {
        t(b, y, x) = static_cast<float>(buf[(y * w + x) * bands + b]) / 255.0f;
      }
    }
  }
  return Raster(std::move(t), 8);
}

/// Writes a PNG (1 or 3 bands, values rounded to the 1/255 grid) or, for
/// ".urtn" paths, the raw tensor. Out-of-range values are rejected.
inline void save_raster(const Raster& r, const std::string& path) {
  for (float v : r.pixels.data()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw DataError("save_raster: pixel value " + std::to_string(v) + " outside [0,1]");
  }
  if (io_detail::ends_with(path, ".urtn")) {
    save_tensor(r.pixels, path);
    return;
  }
  const std::size_t bands = r.bands(), w = r.width(), h = r.height();
  if (bands != 1 && bands != 3) throw DataError("save_raster: PNG needs 1 or 3 bands, got " + std::to_string(bands));
  std::vector<png_byte> buf(w * h * bands);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t b = 0; b < bands; ++b) {
        buf[(y * w + x) * bands + b] = static_cast<png_byte>(std::lround(r.pixels(b, y, x) * 255.0f));
      }
    }
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = bands == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw DataError("cannot write '" + path + "': " + image.message);
  }
}

inline void save_mask(const BinaryMask& m, const std::string& path) { save_raster(mask_to_raster(m), path); }

inline BinaryMask load_mask(const std::string& path) {
  const auto r = load_raster(path);
  if (r.bands() != 1) throw DataError("'" + path + "': masks must be single-band");
  return raster_to_mask(r, 0.5f);
}

/// Deterministic, well-separated palette color for a label id.
inline std::array<std::uint8_t, 3> label_color(int label) {
  const double hue = std::fmod(label * 0.618033988749895, 1.0) * 6.0;
  const double value = label % 2 ? 0.75 : 1.0;
  const int sector = static_cast<int>(hue);
  const double f = hue - sector;
  const double p = 0.15 * value, q = value * (1.0 - 0.85 * f), t = value * (0.15 + 0.85 * f);
  double rgb[3];
  switch (sector) {
    case 0: rgb[0] = value; rgb[1] = t; rgb[2] = p; break;
    case 1: rgb[0] = q; rgb[1] = value; rgb[2] = p; break;
    case 2: rgb[0] = p; rgb[1] = value; rgb[2] = t; break;
    case 3: rgb[0] = p; rgb[1] = q; rgb[2] = value; break;
    case 4: rgb[0] = t; rgb[1] = p; rgb[2] = value; break;
    default: rgb[0] = value; rgb[1] = p; rgb[2] = q; break;
  }
  return {static_cast<std::uint8_t>(std::lround(rgb[0] * 255)),
          static_cast<std::uint8_t>(std::lround(rgb[1] * 255)),
          static_cast<std::uint8_t>(std::lround(rgb[2] * 255))};
}

/// Writes per-pixel label ids (< 256) as an indexed PNG plus the palette sidecar.
inline void save_label_png(const std::vector<int>& labels, std::size_t width, std::size_t height,
                           int label_count, const std::string& path) {
  if (label_count < 1 || label_count > 256) {
    throw DataError("save_label_png: indexed PNG holds at most 256 labels, got " + std::to_string(label_count));
  }
  std::vector<png_byte> index(width * height);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= label_count) throw DataError("save_label_png: label out of range");
    index[i] = static_cast<png_byte>(labels[i]);
  }
  std::vector<png_byte> colormap(static_cast<std::size_t>(label_count) * 3);
  std::ofstream palette(path + ".palette.txt", std::ios::trunc);
  if (!palette) throw DataError("cannot write '" + path + ".palette.txt'");
  palette << "# label r g b\n";
  for (int l = 0; l < label_count; ++l) {
    const auto c = label_color(l);
    for (int k = 0; k < 3; ++k) colormap[static_cast<std::size_t>(l) * 3 + static_cast<std::size_t>(k)] = c[static_cast<std::size_t>(k)];
    palette << l << ' ' << int{c[0]} << ' ' << int{c[1]} << ' ' << int{c[2]} << '\n';
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB_COLORMAP;
  image.colormap_entries = static_cast<png_uint_32>(label_count);
  if (!png_image_write_to_file(&image, path.c_str(), 0, index.data(), 0, colormap.data())) {
    throw DataError("cannot write '" + path + "': " + image.message);
  }
}

struct ManifestEntry {
  DatasetRole role = DatasetRole::train;
  std::string x_path;
  std::string y_path;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "# role x_path y_path\n";
  for (const auto& e : entries) out << to_string(e.role) << ' ' << e.x_path << ' ' << e.y_path << '\n';
}

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string role, extra;
    ManifestEntry e;
    if (!(ls >> role >> e.x_path >> e.y_path) || (ls >> extra)) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 'role x_path y_path'");
    }
    if (role == "train") e.role = DatasetRole::train;
    else if (role == "validate") e.role = DatasetRole::validate;
    else throw DataError(path + ":" + std::to_string(lineno) + ": unknown role '" + role + "'");
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace growthcast
