// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.
//
// Unsupervised segmentation by differentiable feature clustering.
//
// Network: M components of (3x3 conv, p filters, edge-replicated border) ->
// ReLU -> batch norm give a p-dimensional feature per pixel; a 1x1 classifier
// maps it to q responses, which are standardized per channel over the image
// by a final batch norm (affine starts at identity). The label of a pixel is the argmax response. Training
// minimizes
//
//   L = L_sim + mu * L_con
//   L_sim = mean over pixels of softmax cross-entropy against the pixel's own
//           argmax label (labels held fixed in the backward pass)
//   L_con = mean |r'(y+1,x) - r'(y,x)| + mean |r'(y,x+1) - r'(y,x)|
//
// with SGD plus momentum until the number of distinct labels drops to
// min_labels or max_iters is reached.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "growthcast/mask_ops.hpp"
#include "growthcast/ops.hpp"
#include "growthcast/optim.hpp"
#include "growthcast/raster.hpp"

namespace growthcast {

struct SegConfig {
  std::size_t components = 3;  // M
  std::size_t filters = 100;   // p
  std::size_t labels = 100;    // q
  double continuity_weight = 5.0;  // mu
  double lr = 0.1;
  double momentum = 0.9;
  std::size_t max_iters = 500;
  std::size_t min_labels = 3;
  double bn_eps = 1e-5;

  void validate() const {
    if (components < 1) throw ConfigError("seg.components must be >= 1");
    if (filters < 1) throw ConfigError("seg.filters must be >= 1");
    if (labels < 1 || labels > filters) throw ConfigError("seg.labels must lie in [1, seg.filters]");
    if (!(continuity_weight >= 0.0)) throw ConfigError("seg.mu must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("seg.lr must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("seg.momentum must lie in [0,1)");
    if (max_iters < 1) throw ConfigError("seg.max_iters must be >= 1");
    if (min_labels < 1) throw ConfigError("seg.min_labels must be >= 1");
  }
};

/// Per-pixel cluster ids in [0, label_count).
struct LabelMap {
  std::size_t width = 0, height = 0;
  int label_count = 0;
  std::vector<int> labels;

  int operator()(std::size_t x, std::size_t y) const { return labels[y * width + x]; }

  std::map<int, std::size_t> histogram() const {
    std::map<int, std::size_t> h;
    for (int l : labels) ++h[l];
    return h;
  }
  std::size_t distinct() const { return histogram().size(); }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

namespace seg_detail {

// Edge-replicating 1-pixel border, so a spatially constant input stays
// constant through the 3x3 convolutions.
template <typename T>
Tensor<T> pad_edges(const Tensor<T>& x) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> out({c, h + 2, w + 2});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h + 2; ++y) {
      const std::size_t sy = std::clamp<std::size_t>(y, 1, h) - 1;
      for (std::size_t xx = 0; xx < w + 2; ++xx) out(k, y, xx) = x(k, sy, std::clamp<std::size_t>(xx, 1, w) - 1);
    }
  return out;
}

// Adjoint of pad_edges: border gradients fold back onto the edge pixels.
template <typename T>
Tensor<T> fold_edges(const Tensor<T>& g) {
  const std::size_t c = g.dim(0), h = g.dim(1) - 2, w = g.dim(2) - 2;
  Tensor<T> out({c, h, w});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h + 2; ++y) {
      const std::size_t sy = std::clamp<std::size_t>(y, 1, h) - 1;
      for (std::size_t xx = 0; xx < w + 2; ++xx) out(k, sy, std::clamp<std::size_t>(xx, 1, w) - 1) += g(k, y, xx);
    }
  return out;
}

template <typename T>
Tensor<T> interior(const Tensor<T>& x) {
  const std::size_t c = x.dim(0), h = x.dim(1) - 2, w = x.dim(2) - 2;
  Tensor<T> out({c, h, w});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) out(k, y, xx) = x(k, y + 1, xx + 1);
  return out;
}

template <typename T>
Tensor<T> embed(const Tensor<T>& x) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> out({c, h + 2, w + 2});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) out(k, y + 1, xx + 1) = x(k, y, xx);
  return out;
}

}  // namespace seg_detail

template <typename T>
class SegNetModel {
 public:
  struct Component {
    Parameter<T> kernel;  // [p, Cin, 3, 3]
    Parameter<T> bias;    // [p]
    Parameter<T> gamma;   // [p]
    Parameter<T> beta;    // [p]
  };

  SegNetModel(std::size_t in_channels, const SegConfig& cfg, RngStream& rng)
      : in_channels_(in_channels), cfg_(cfg) {
    cfg.validate();
    std::size_t cin = in_channels;
    for (std::size_t m = 0; m < cfg.components; ++m) {
      const std::string n = "component" + std::to_string(m);
      components_.push_back(
          {Parameter<T>(n + ".kernel", xavier_init<T>({cfg.filters, cin, 3, 3}, cin * 9, cfg.filters * 9, rng)),
           Parameter<T>(n + ".bias", Tensor<T>({cfg.filters})),
           Parameter<T>(n + ".gamma", Tensor<T>({cfg.filters}, T{1})),
           Parameter<T>(n + ".beta", Tensor<T>({cfg.filters}))});
      cin = cfg.filters;
    }
    classifier_kernel_ = Parameter<T>(
        "classifier.kernel", xavier_init<T>({cfg.labels, cfg.filters, 1, 1}, cfg.filters, cfg.labels, rng));
    classifier_bias_ = Parameter<T>("classifier.bias", Tensor<T>({cfg.labels}));
    response_gamma_ = Parameter<T>("response.gamma", Tensor<T>({cfg.labels}, T{1}));
    response_beta_ = Parameter<T>("response.beta", Tensor<T>({cfg.labels}));
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    for (auto& c : components_) {
      out.insert(out.end(), {&c.kernel, &c.bias, &c.gamma, &c.beta});
    }
    out.push_back(&classifier_kernel_);
    out.push_back(&classifier_bias_);
    out.push_back(&response_gamma_);
    out.push_back(&response_beta_);
    return out;
  }

  const SegConfig& config() const { return cfg_; }
  std::size_t in_channels() const { return in_channels_; }
  std::size_t label_count() const { return cfg_.labels; }

  struct Cache {
    std::vector<Tensor<T>> inputs;     // edge-padded input to each component
    std::vector<Tensor<T>> activated;  // ReLU outputs
    std::vector<BatchNormCache<T>> bn;
    Tensor<T> features;
    BatchNormCache<T> response_bn;
  };

  /// Normalized responses r' of shape [q,H,W].
  Tensor<T> forward(const Tensor<T>& input, Cache* cache = nullptr) const {
    if (input.rank() != 3 || input.dim(0) != in_channels_) {
      throw ShapeError("segnet: expected [" + std::to_string(in_channels_) + ",H,W] input, got " +
                       to_string(input.shape()));
    }
    if (input.dim(1) < 3 || input.dim(2) < 3) {
      throw ShapeError("segnet: block " + to_string(input.shape()) + " is smaller than the 3x3 kernel");
    }
    const T eps = static_cast<T>(cfg_.bn_eps);
    Tensor<T> x = input;
    for (const auto& c : components_) {
      auto padded = seg_detail::pad_edges(x);
      auto act = activate(seg_detail::interior(conv2d(padded, c.kernel.value, c.bias.value)), Activation::relu);
      BatchNormCache<T> bn;
      auto y = batch_norm(act, c.gamma.value, c.beta.value, eps, 0, cache ? &bn : nullptr);
      if (cache) {
        cache->inputs.push_back(std::move(padded));
        cache->activated.push_back(std::move(act));
        cache->bn.push_back(std::move(bn));
      }
      x = std::move(y);
    }
    auto raw = conv2d(x, classifier_kernel_.value, classifier_bias_.value);
    auto responses = batch_norm(raw, response_gamma_.value, response_beta_.value, eps, 0,
                                cache ? &cache->response_bn : nullptr);
    if (cache) cache->features = std::move(x);
    return responses;
  }

  /// Accumulates parameter gradients given d(loss)/d(responses).
  void backward(const Cache& cache, const Tensor<T>& grad_responses) {
    auto rg = batch_norm_backward(grad_responses, cache.response_bn, response_gamma_.value);
    response_gamma_.grad += rg.gamma;
    response_beta_.grad += rg.beta;
    auto g = std::move(rg.input);
    auto cg = conv2d_backward(g, cache.features, classifier_kernel_.value);
    classifier_kernel_.grad += cg.kernels;
    classifier_bias_.grad += cg.bias;
    g = std::move(cg.input);
    for (std::size_t m = components_.size(); m-- > 0;) {
      auto& c = components_[m];
      auto bg = batch_norm_backward(g, cache.bn[m], c.gamma.value);
      c.gamma.grad += bg.gamma;
      c.beta.grad += bg.beta;
      auto ag = activation_backward(bg.input, cache.activated[m], Activation::relu);
      auto kg = conv2d_backward(seg_detail::embed(ag), cache.inputs[m], c.kernel.value);
      c.kernel.grad += kg.kernels;
      c.bias.grad += kg.bias;
      g = seg_detail::fold_edges(kg.input);
    }
  }

 private:
  std::size_t in_channels_;
  SegConfig cfg_;
  std::vector<Component> components_;
  Parameter<T> classifier_kernel_;
  Parameter<T> classifier_bias_;
  Parameter<T> response_gamma_;
  Parameter<T> response_beta_;
};

template <typename T>
Tensor<T> response_map(const SegNetModel<T>& model, const Raster& block) {
  for (float v : block.pixels.data()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw DataError("response_map: block pixels must lie in [0,1]");
  }
  return model.forward(block.pixels.cast<T>());
}

/// Per-pixel argmax over channels; ties go to the lowest channel index.
template <typename T>
LabelMap assign_labels(const Tensor<T>& responses) {
  if (responses.rank() != 3) throw ShapeError("assign_labels expects [q,H,W], got " + to_string(responses.shape()));
  const std::size_t q = responses.dim(0), h = responses.dim(1), w = responses.dim(2);
  LabelMap lm{w, h, static_cast<int>(q), std::vector<int>(h * w, 0)};
  for (std::size_t i = 0; i < h * w; ++i) {
    T best = responses[i];
    int arg = 0;
    for (std::size_t c = 1; c < q; ++c) {
      const T v = responses[c * h * w + i];
      if (v > best) {
        best = v;
        arg = static_cast<int>(c);
      }
    }
    lm.labels[i] = arg;
  }
  return lm;
}

struct SegLossValue {
  double similarity = 0;
  double continuity = 0;
  double total = 0;
};

namespace seg_detail {

template <typename T>
void check_loss_shapes(const Tensor<T>& r, const LabelMap& labels) {
  if (r.rank() != 3 || r.dim(1) != labels.height || r.dim(2) != labels.width ||
      static_cast<int>(r.dim(0)) != labels.label_count) {
    throw ShapeError("seg_loss: responses " + to_string(r.shape()) + " vs label map " +
                     std::to_string(labels.label_count) + "x" + std::to_string(labels.height) + "x" +
                     std::to_string(labels.width));
  }
}

}  // namespace seg_detail

template <typename T>
SegLossValue seg_loss(const Tensor<T>& r, const LabelMap& labels, double mu) {
  seg_detail::check_loss_shapes(r, labels);
  const std::size_t q = r.dim(0), h = r.dim(1), w = r.dim(2), n = h * w;
  SegLossValue v;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = r[i];
    for (std::size_t c = 1; c < q; ++c) mx = std::max(mx, static_cast<double>(r[c * n + i]));
    double z = 0.0;
    for (std::size_t c = 0; c < q; ++c) z += std::exp(static_cast<double>(r[c * n + i]) - mx);
    const double picked = r[static_cast<std::size_t>(labels.labels[i]) * n + i];
    v.similarity += (mx + std::log(z)) - picked;
  }
  v.similarity /= static_cast<double>(n);
  double vert = 0.0, horiz = 0.0;
  for (std::size_t c = 0; c < q; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double here = r(c, y, x);
        if (y + 1 < h) vert += std::abs(static_cast<double>(r(c, y + 1, x)) - here);
        if (x + 1 < w) horiz += std::abs(static_cast<double>(r(c, y, x + 1)) - here);
      }
    }
  }
  if (h > 1) v.continuity += vert / static_cast<double>(q * (h - 1) * w);
  if (w > 1) v.continuity += horiz / static_cast<double>(q * h * (w - 1));
  v.total = v.similarity + mu * v.continuity;
  return v;
}

template <typename T>
Tensor<T> seg_loss_backward(const Tensor<T>& r, const LabelMap& labels, double mu) {
  seg_detail::check_loss_shapes(r, labels);
  const std::size_t q = r.dim(0), h = r.dim(1), w = r.dim(2), n = h * w;
  Tensor<T> g(r.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double mx = r[i];
    for (std::size_t c = 1; c < q; ++c) mx = std::max(mx, static_cast<double>(r[c * n + i]));
    double z = 0.0;
    for (std::size_t c = 0; c < q; ++c) z += std::exp(static_cast<double>(r[c * n + i]) - mx);
    for (std::size_t c = 0; c < q; ++c) {
      double p = std::exp(static_cast<double>(r[c * n + i]) - mx) / z;
      if (static_cast<int>(c) == labels.labels[i]) p -= 1.0;
      g[c * n + i] = static_cast<T>(p / static_cast<double>(n));
    }
  }
  auto sign = [](double d) { return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0); };
  const double sv = h > 1 ? mu / static_cast<double>(q * (h - 1) * w) : 0.0;
  const double sh = w > 1 ? mu / static_cast<double>(q * h * (w - 1)) : 0.0;
  for (std::size_t c = 0; c < q; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        if (y + 1 < h) {
          const double s = sv * sign(static_cast<double>(r(c, y + 1, x)) - r(c, y, x));
          g(c, y + 1, x) += static_cast<T>(s);
          g(c, y, x) -= static_cast<T>(s);
        }
        if (x + 1 < w) {
          const double s = sh * sign(static_cast<double>(r(c, y, x + 1)) - r(c, y, x));
          g(c, y, x + 1) += static_cast<T>(s);
          g(c, y, x) -= static_cast<T>(s);
        }
      }
    }
  }
  return g;
}

template <typename T>
struct SegmentationResult {
  SegNetModel<T> model;
  LabelMap labels;
  std::size_t iterations = 0;        // parameter updates performed
  std::vector<double> loss_history;  // total loss per update
  std::vector<std::size_t> label_history;
};

/// Trains a fresh network on one block and returns its final labeling.
template <typename T = float>
SegmentationResult<T> train_segmentation(const Raster& block, const SegConfig& cfg, RngStream& rng) {
  cfg.validate();
  SegNetModel<T> model(block.bands(), cfg, rng);
  const auto input = block.pixels.cast<T>();
  for (float v : block.pixels.data()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw DataError("train_segmentation: block pixels must lie in [0,1]");
  }
  auto params = model.parameters();
  std::vector<double> losses;
  std::vector<std::size_t> label_counts;
  LabelMap labels;
  std::size_t iter = 0;
  for (;; ++iter) {
    typename SegNetModel<T>::Cache cache;
    const auto responses = model.forward(input, &cache);
    labels = assign_labels(responses);
    const std::size_t distinct = labels.distinct();
    label_counts.push_back(distinct);
    if (distinct <= cfg.min_labels || iter == cfg.max_iters) break;

    const auto loss = seg_loss(responses, labels, cfg.continuity_weight);
    if (!std::isfinite(loss.total)) {
      throw NumericError("train_segmentation: non-finite loss at iteration " + std::to_string(iter));
    }
    losses.push_back(loss.total);
    for (auto* p : params) p->zero_grad();
    model.backward(cache, seg_loss_backward(responses, labels, cfg.continuity_weight));
    for (auto* p : params) {
      sgd_momentum_step(*p, static_cast<T>(cfg.lr), static_cast<T>(cfg.momentum));
    }
  }
  return {std::move(model), std::move(labels), iter, std::move(losses), std::move(label_counts)};
}

inline BinaryMask extract_class_mask(const LabelMap& labels, int target) {
  if (target < 0 || target >= labels.label_count) {
    throw ConfigError("extract_class_mask: label " + std::to_string(target) + " outside [0," +
                      std::to_string(labels.label_count) + ")");
  }
  BinaryMask m(labels.width, labels.height);
  for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = labels.labels[i] == target ? 1 : 0;
  return m;
}

/// Label whose support has the highest IoU with the reference; ties -> lowest id.
inline int select_urban_label(const LabelMap& labels, const BinaryMask& reference) {
  if (reference.width != labels.width || reference.height != labels.height) {
    throw ShapeError("select_urban_label: reference size differs from label map");
  }
  if (reference.count() == 0) throw DataError("select_urban_label: reference mask is empty");
  const auto q = static_cast<std::size_t>(labels.label_count);
  std::vector<std::size_t> inter(q, 0), support(q, 0);
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    const auto l = static_cast<std::size_t>(labels.labels[i]);
    ++support[l];
    if (reference.bits[i]) ++inter[l];
  }
  const double ref = static_cast<double>(reference.count());
  int best = 0;
  double best_iou = -1.0;
  for (std::size_t l = 0; l < q; ++l) {
    const double uni = static_cast<double>(support[l]) + ref - static_cast<double>(inter[l]);
    const double iou = static_cast<double>(inter[l]) / uni;
    if (iou > best_iou) {
      best_iou = iou;
      best = static_cast<int>(l);
    }
  }
  return best;
}

}  // namespace growthcast
