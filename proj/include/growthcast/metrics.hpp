// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.
//
// Image-quality and classification metrics for predicted maps.

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "growthcast/mask_ops.hpp"
#include "growthcast/tensor.hpp"

namespace growthcast {

template <typename T>
double mse(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mse");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

template <typename T>
double rmse(const Tensor<T>& a, const Tensor<T>& b) {
  return std::sqrt(mse(a, b));
}

/// 10 log10(max^2 / mse) in dB; +infinity when mse is zero.
inline double psnr_from_mse(double mse_value, double max_value = 1.0) {
  if (mse_value <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / mse_value);
}

template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double max_value = 1.0) {
  return psnr_from_mse(mse(a, b), max_value);
}

/// Formats a dB value, printing the identical-input sentinel as "inf".
inline std::string format_db(double v, int precision = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

struct SsimConfig {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

namespace detail {

inline std::vector<double> gaussian_window(std::size_t n, double sigma) {
  std::vector<double> w(n);
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Separable "valid" filtering of an h x w plane.
inline std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                        const std::vector<double>& k) {
  const std::size_t n = k.size(), ow = w - n + 1, oh = h - n + 1;
  std::vector<double> rows(h * ow), out(oh * ow);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += k[i] * img[y * w + x + i];
      rows[y * ow + x] = s;
    }
  }
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += k[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

}  // namespace detail

/// Mean single-scale SSIM over every full window position. Accepts [H,W] or
/// [bands,H,W]; bands are averaged.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b, const SsimConfig& cfg = {}) {
  require_same_shape(a, b, "ssim");
  if (a.rank() != 2 && a.rank() != 3) throw ShapeError("ssim expects [H,W] or [bands,H,W], got " + to_string(a.shape()));
  const std::size_t bands = a.rank() == 3 ? a.dim(0) : 1;
  const std::size_t h = a.dim(a.rank() - 2), w = a.dim(a.rank() - 1);
  if (h < cfg.window || w < cfg.window) {
    throw ShapeError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                     " smaller than window " + std::to_string(cfg.window));
  }
  const double c1 = std::pow(cfg.k1 * cfg.dynamic_range, 2);
  const double c2 = std::pow(cfg.k2 * cfg.dynamic_range, 2);
  const auto k = detail::gaussian_window(cfg.window, cfg.sigma);

  double total = 0.0;
  for (std::size_t band = 0; band < bands; ++band) {
    std::vector<double> x(h * w), y(h * w), xx(h * w), yy(h * w), xy(h * w);
    for (std::size_t i = 0; i < h * w; ++i) {
      x[i] = a[band * h * w + i];
      y[i] = b[band * h * w + i];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::filter_valid(x, h, w, k);
    const auto my = detail::filter_valid(y, h, w, k);
    const auto sxx = detail::filter_valid(xx, h, w, k);
    const auto syy = detail::filter_valid(yy, h, w, k);
    const auto sxy = detail::filter_valid(xy, h, w, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
      sum += num / den;
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / static_cast<double>(bands);
}

/// 2x2 counts, rows = truth, columns = prediction, index 0 = urban (1),
/// index 1 = non-urban (0).
struct ConfusionMatrix {
  std::array<std::array<std::size_t, 2>, 2> counts{};

  std::size_t total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }

  double accuracy() const {
    const auto n = total();
    if (n == 0) throw DataError("confusion matrix is empty");
    return static_cast<double>(counts[0][0] + counts[1][1]) / static_cast<double>(n);
  }

  /// Cohen's kappa (p_o - p_e) / (1 - p_e); 1 when p_e == 1 and p_o == 1.
  double kappa() const {
    const auto n = static_cast<double>(total());
    if (n == 0) throw DataError("confusion matrix is empty");
    const double po = accuracy();
    double pe = 0.0;
    for (int c = 0; c < 2; ++c) {
      const double row = static_cast<double>(counts[c][0] + counts[c][1]);
      const double col = static_cast<double>(counts[0][c] + counts[1][c]);
      pe += (row / n) * (col / n);
    }
    if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
    return (po - pe) / (1.0 - pe);
  }

  /// Row-normalized rates; a truth class with no pixels yields a zero row.
  std::array<std::array<double, 2>, 2> normalized() const {
    std::array<std::array<double, 2>, 2> out{};
    for (int r = 0; r < 2; ++r) {
      const double row = static_cast<double>(counts[r][0] + counts[r][1]);
      for (int c = 0; c < 2; ++c) out[r][c] = row > 0 ? static_cast<double>(counts[r][c]) / row : 0.0;
    }
    return out;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) counts[r][c] += o.counts[r][c];
    return *this;
  }
};

inline ConfusionMatrix confusion(const BinaryMask& truth, const BinaryMask& pred) {
  if (truth.width != pred.width || truth.height != pred.height) {
    throw ShapeError("confusion: truth " + std::to_string(truth.width) + "x" + std::to_string(truth.height) +
                     " vs prediction " + std::to_string(pred.width) + "x" + std::to_string(pred.height));
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.bits.size(); ++i) {
    ++cm.counts[truth.bits[i] ? 0 : 1][pred.bits[i] ? 0 : 1];
  }
  if (cm.total() == 0) throw DataError("confusion: no pixels");
  return cm;
}

struct TileMetrics {
  double mse = 0, rmse = 0, psnr = 0, ssim = 0;
};

/// Per-tile metrics and their arithmetic means over tiles. The pooled fields
/// give the other convention (metric of the mean MSE) for comparison.
struct MetricReport {
  std::vector<TileMetrics> tiles;
  double mean_mse = 0, mean_rmse = 0, mean_psnr = 0, mean_ssim = 0;
  std::size_t infinite_psnr_tiles = 0;  // identical tiles, left out of mean_psnr
  double pooled_rmse = 0, pooled_psnr = 0;

  std::size_t tile_count() const { return tiles.size(); }
};

inline MetricReport evaluate_tiles(const std::vector<Tensor<float>>& preds,
                                   const std::vector<Tensor<float>>& truths,
                                   const SsimConfig& ssim_cfg = {}) {
  if (preds.size() != truths.size() || preds.empty()) {
    throw DataError("evaluate_tiles: " + std::to_string(preds.size()) + " predictions vs " +
                    std::to_string(truths.size()) + " truths");
  }
  MetricReport r;
  double psnr_sum = 0.0;
  std::size_t finite = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    TileMetrics m;
    m.mse = mse(preds[i], truths[i]);
    m.rmse = std::sqrt(m.mse);
    m.psnr = psnr_from_mse(m.mse);
    m.ssim = ssim(preds[i], truths[i], ssim_cfg);
    r.tiles.push_back(m);
    r.mean_mse += m.mse;
    r.mean_rmse += m.rmse;
    r.mean_ssim += m.ssim;
    if (std::isfinite(m.psnr)) {
      psnr_sum += m.psnr;
      ++finite;
    } else {
      ++r.infinite_psnr_tiles;
    }
  }
  const double n = static_cast<double>(preds.size());
  r.mean_mse /= n;
  r.mean_rmse /= n;
  r.mean_ssim /= n;
  r.mean_psnr = finite ? psnr_sum / static_cast<double>(finite) : std::numeric_limits<double>::infinity();
  r.pooled_rmse = std::sqrt(r.mean_mse);
  r.pooled_psnr = psnr_from_mse(r.mean_mse);
  return r;
}

struct MethodEvaluation {
  std::string name;
  MetricReport report;
  ConfusionMatrix confusion;
};

inline std::string format_fixed(double v, int precision = 4) {
  if (!std::isfinite(v)) return format_db(v, precision);
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

/// CSV: one row per tile per method, then "mean" and "pooled" summary rows.
inline std::string report_csv(const std::vector<MethodEvaluation>& methods) {
  std::ostringstream os;
  os << "method,tile,mse,rmse,psnr,ssim\n";
  for (const auto& m : methods) {
    const auto& r = m.report;
    for (std::size_t i = 0; i < r.tiles.size(); ++i) {
      const auto& t = r.tiles[i];
      os << m.name << ',' << i << ',' << format_fixed(t.mse, 6) << ',' << format_fixed(t.rmse, 6) << ','
         << format_db(t.psnr, 6) << ',' << format_fixed(t.ssim, 6) << '\n';
    }
    os << m.name << ",mean," << format_fixed(r.mean_mse, 6) << ',' << format_fixed(r.mean_rmse, 6) << ','
       << format_db(r.mean_psnr, 6) << ',' << format_fixed(r.mean_ssim, 6) << '\n';
    os << m.name << ",pooled," << format_fixed(r.mean_mse, 6) << ',' << format_fixed(r.pooled_rmse, 6)
       << ',' << format_db(r.pooled_psnr, 6) << ",\n";
  }
  return os.str();
}

/// Confusion CSV with raw counts, row-normalized rates, accuracy and kappa.
inline std::string confusion_csv(const std::vector<MethodEvaluation>& methods) {
  std::ostringstream os;
  os << "method,truth,pred_urban,pred_non_urban,rate_urban,rate_non_urban,accuracy,kappa\n";
  for (const auto& m : methods) {
    const auto norm = m.confusion.normalized();
    const char* names[2] = {"urban", "non_urban"};
    for (int r = 0; r < 2; ++r) {
      os << m.name << ',' << names[r] << ',' << m.confusion.counts[r][0] << ',' << m.confusion.counts[r][1]
         << ',' << format_fixed(norm[r][0], 6) << ',' << format_fixed(norm[r][1], 6) << ','
         << format_fixed(m.confusion.accuracy(), 6) << ',' << format_fixed(m.confusion.kappa(), 6) << '\n';
    }
  }
  return os.str();
}

/// Human-readable summary: a method x (SSIM, PSNR, RMSE, MSE) table of tile
/// means, followed by one row-normalized confusion matrix per method.
inline std::string report_text(const std::vector<MethodEvaluation>& methods) {
  std::ostringstream os;
  auto cell = [&](const std::string& s, int width) { os << std::setw(width) << s; };
  os << std::left << std::setw(16) << "" << std::right;
  cell("SSIM", 10);
  cell("PSNR", 10);
  cell("RMSE", 10);
  cell("MSE", 10);
  os << '\n';
  for (const auto& m : methods) {
    os << std::left << std::setw(16) << m.name << std::right;
    cell(format_fixed(m.report.mean_ssim), 10);
    cell(format_db(m.report.mean_psnr), 10);
    cell(format_fixed(m.report.mean_rmse), 10);
    cell(format_fixed(m.report.mean_mse), 10);
    os << '\n';
  }
  os << "(means over " << (methods.empty() ? 0 : methods.front().report.tile_count()) << " tiles";
  for (const auto& m : methods) {
    if (m.report.infinite_psnr_tiles) {
      os << "; " << m.name << ": " << m.report.infinite_psnr_tiles << " identical tiles excluded from PSNR";
    }
  }
  os << ")\n";
  for (const auto& m : methods) {
    const auto norm = m.confusion.normalized();
    os << "\nNormalized confusion matrix: " << m.name << " (rows = truth)\n";
    os << std::left << std::setw(18) << "" << std::right << std::setw(12) << "urban" << std::setw(12)
       << "non-urban" << '\n';
    const char* names[2] = {"urban", "non-urban"};
    for (int r = 0; r < 2; ++r) {
      os << std::left << std::setw(18) << names[r] << std::right << std::setw(12) << format_fixed(norm[r][0])
         << std::setw(12) << format_fixed(norm[r][1]) << '\n';
    }
    os << "accuracy " << format_fixed(m.confusion.accuracy() * 100.0, 2) << "%  kappa "
       << format_fixed(m.confusion.kappa(), 3) << '\n';
  }
  return os.str();
}

}  // namespace growthcast
