// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.
//
// Layer primitives with hand-written backward passes: 2D convolution,
// pointwise activations, batch normalization and binary cross-entropy.
//
// Convolution convention: cross-correlation (kernels are not flipped) with
// zero "same" padding, so out(co,y,x) = b(co) + sum_{ci,dy,dx}
// k(co,ci,dy,dx) * in(ci, y+dy-kh/2, x+dx-kw/2), out-of-range input = 0.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "growthcast/tensor.hpp"

namespace growthcast {

namespace detail {

inline void check_conv_shapes(const Shape& in, const Shape& k, const Shape& b) {
  const bool ok = in.size() == 3 && k.size() == 4 && b.size() == 1 &&
                  k[1] == in[0] && b[0] == k[0] && k[2] % 2 == 1 && k[3] % 2 == 1;
  if (!ok) {
    throw ShapeError("conv2d: input " + to_string(in) + " kernels " + to_string(k) +
                     " bias " + to_string(b) +
                     " (expected [Cin,H,W], [Cout,Cin,kh,kw] with odd kh/kw, [Cout])");
  }
}

// Valid x range [lo, hi) of output columns for kernel offset d (already centered).
inline void clip_range(std::ptrdiff_t offset, std::ptrdiff_t extent, std::ptrdiff_t& lo,
                       std::ptrdiff_t& hi) {
  lo = std::max<std::ptrdiff_t>(0, -offset);
  hi = std::min<std::ptrdiff_t>(extent, extent - offset);
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias) {
  detail::check_conv_shapes(input.shape(), kernels.shape(), bias.shape());
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2), pw = static_cast<std::ptrdiff_t>(kw / 2);
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);

  Tensor<T> out({cout, h, w});
  const T* in = input.data().data();
  const T* k = kernels.data().data();
  T* o = out.data().data();
  for (std::size_t co = 0; co < cout; ++co) {
    T* oc = o + co * h * w;
    std::fill(oc, oc + h * w, bias[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* ic = in + ci * h * w;
      const T* kc = k + (co * cin + ci) * kh * kw;
      for (std::ptrdiff_t dy = 0; dy < static_cast<std::ptrdiff_t>(kh); ++dy) {
        std::ptrdiff_t ylo, yhi;
        detail::clip_range(dy - ph, H, ylo, yhi);
        for (std::ptrdiff_t dx = 0; dx < static_cast<std::ptrdiff_t>(kw); ++dx) {
          std::ptrdiff_t xlo, xhi;
          detail::clip_range(dx - pw, W, xlo, xhi);
          const T kv = kc[dy * static_cast<std::ptrdiff_t>(kw) + dx];
          if (kv == T{0}) continue;
          for (std::ptrdiff_t y = ylo; y < yhi; ++y) {
            T* orow = oc + y * W;
            const T* irow = ic + (y + dy - ph) * W + (dx - pw);
            for (std::ptrdiff_t x = xlo; x < xhi; ++x) orow[x] += kv * irow[x];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;
  Tensor<T> kernels;
  Tensor<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& upstream, const Tensor<T>& input,
                               const Tensor<T>& kernels) {
  const std::size_t cout = kernels.dim(0);
  detail::check_conv_shapes(input.shape(), kernels.shape(), Shape{cout});
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t kh = kernels.dim(2), kw = kernels.dim(3);
  if (upstream.shape() != Shape{cout, h, w}) {
    throw ShapeError("conv2d_backward: upstream " + to_string(upstream.shape()) +
                     " does not match forward output " + to_string(Shape{cout, h, w}));
  }
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2), pw = static_cast<std::ptrdiff_t>(kw / 2);
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);

  Conv2dGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(kernels.shape()), Tensor<T>({cout})};
  const T* up = upstream.data().data();
  const T* in = input.data().data();
  const T* k = kernels.data().data();
  T* gi = g.input.data().data();
  T* gk = g.kernels.data().data();
  std::vector<T> partial(w);

  for (std::size_t co = 0; co < cout; ++co) {
    const T* uc = up + co * h * w;
    T sum{0};
    for (std::size_t i = 0; i < h * w; ++i) sum += uc[i];
    g.bias[co] = sum;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* ic = in + ci * h * w;
      T* gic = gi + ci * h * w;
      const T* kc = k + (co * cin + ci) * kh * kw;
      T* gkc = gk + (co * cin + ci) * kh * kw;
      for (std::ptrdiff_t dy = 0; dy < static_cast<std::ptrdiff_t>(kh); ++dy) {
        std::ptrdiff_t ylo, yhi;
        detail::clip_range(dy - ph, H, ylo, yhi);
        for (std::ptrdiff_t dx = 0; dx < static_cast<std::ptrdiff_t>(kw); ++dx) {
          std::ptrdiff_t xlo, xhi;
          detail::clip_range(dx - pw, W, xlo, xhi);
          const T kv = kc[dy * static_cast<std::ptrdiff_t>(kw) + dx];
          // Column-wise partial sums keep the inner loops free of a serial reduction.
          std::fill(partial.begin(), partial.end(), T{0});
          for (std::ptrdiff_t y = ylo; y < yhi; ++y) {
            const T* urow = uc + y * W;
            const std::ptrdiff_t off = (y + dy - ph) * W + (dx - pw);
            const T* irow = ic + off;
            T* girow = gic + off;
            for (std::ptrdiff_t x = xlo; x < xhi; ++x) partial[x] += urow[x] * irow[x];
            for (std::ptrdiff_t x = xlo; x < xhi; ++x) girow[x] += kv * urow[x];
          }
          T acc{0};
          for (std::ptrdiff_t x = xlo; x < xhi; ++x) acc += partial[x];
          gkc[dy * static_cast<std::ptrdiff_t>(kw) + dx] = acc;
        }
      }
    }
  }
  return g;
}

enum class Activation { sigmoid, tanh, relu };

template <typename T>
T sigmoid(T x) {
  // Split by sign so exp never overflows.
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Activation kind) {
  Tensor<T> out(x.shape());
  auto src = x.data();
  auto dst = out.data();
  switch (kind) {
    case Activation::sigmoid:
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = sigmoid(src[i]);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::tanh(src[i]);
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > T{0} ? src[i] : T{0};
      break;
  }
  return out;
}

/// Backward of activate(). Takes the forward *output*, which is enough for
/// all three kinds.
template <typename T>
Tensor<T> activation_backward(const Tensor<T>& upstream, const Tensor<T>& output,
                              Activation kind) {
  require_same_shape(upstream, output, "activation_backward");
  Tensor<T> g(output.shape());
  auto u = upstream.data();
  auto y = output.data();
  auto d = g.data();
  switch (kind) {
    case Activation::sigmoid:
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = u[i] * y[i] * (T{1} - y[i]);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = u[i] * (T{1} - y[i] * y[i]);
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = y[i] > T{0} ? u[i] : T{0};
      break;
  }
  return g;
}

/// Saved forward state for batch_norm_backward.
template <typename T>
struct BatchNormCache {
  Tensor<T> normalized;     // (x - mean) / sqrt(var + eps)
  std::vector<T> inv_std;   // per channel
  std::vector<T> mean;      // per channel
  std::vector<T> variance;  // per channel, biased
  std::size_t channel_axis = 0;
};

namespace detail {

// Views a tensor as [outer, C, inner] around the channel axis.
struct ChannelLayout {
  std::size_t outer = 1, channels = 1, inner = 1;
};

inline ChannelLayout channel_layout(const Shape& s, std::size_t axis) {
  if (axis >= s.size()) throw ShapeError("batch_norm: channel axis out of range for " + to_string(s));
  ChannelLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= s[i];
  l.channels = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) l.inner *= s[i];
  return l;
}

}  // namespace detail

/// Batch normalization: per channel, statistics over every other axis.
/// gamma and beta have shape [C]. The variance is the biased (population)
/// variance of the batch.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps,
                     std::size_t channel_axis = 0, BatchNormCache<T>* cache = nullptr) {
  const auto l = detail::channel_layout(x.shape(), channel_axis);
  if (gamma.shape() != Shape{l.channels} || beta.shape() != Shape{l.channels}) {
    throw ShapeError("batch_norm: " + std::to_string(l.channels) + " channels in input " +
                     to_string(x.shape()) + " but gamma " + to_string(gamma.shape()) +
                     " beta " + to_string(beta.shape()));
  }
  if (!(eps > T{0})) throw ConfigError("batch_norm: eps must be positive");

  const double count = static_cast<double>(l.outer * l.inner);
  Tensor<T> out(x.shape());
  Tensor<T> normalized(x.shape());
  std::vector<T> means(l.channels), vars(l.channels), inv_stds(l.channels);
  auto src = x.data();
  for (std::size_t c = 0; c < l.channels; ++c) {
    // Accumulate in double: float sums over 10^5 pixels lose the 1e-6 mean target.
    double sum = 0.0;
    for (std::size_t o = 0; o < l.outer; ++o) {
      const std::size_t base = (o * l.channels + c) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) sum += src[base + i];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t o = 0; o < l.outer; ++o) {
      const std::size_t base = (o * l.channels + c) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) {
        const double d = src[base + i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / count;
    const double inv_std = 1.0 / std::sqrt(var + static_cast<double>(eps));
    means[c] = static_cast<T>(mean);
    vars[c] = static_cast<T>(var);
    inv_stds[c] = static_cast<T>(inv_std);
    for (std::size_t o = 0; o < l.outer; ++o) {
      const std::size_t base = (o * l.channels + c) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) {
        const T n = static_cast<T>((src[base + i] - mean) * inv_std);
        normalized[base + i] = n;
        out[base + i] = gamma[c] * n + beta[c];
      }
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_stds);
    cache->mean = std::move(means);
    cache->variance = std::move(vars);
    cache->channel_axis = channel_axis;
  }
  return out;
}

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  Tensor<T> gamma;
  Tensor<T> beta;
};

template <typename T>
BatchNormGrads<T> batch_norm_backward(const Tensor<T>& upstream, const BatchNormCache<T>& cache,
                                      const Tensor<T>& gamma) {
  require_same_shape(upstream, cache.normalized, "batch_norm_backward");
  const auto l = detail::channel_layout(upstream.shape(), cache.channel_axis);
  BatchNormGrads<T> g{Tensor<T>(upstream.shape()), Tensor<T>({l.channels}),
                      Tensor<T>({l.channels})};
  const double count = static_cast<double>(l.outer * l.inner);
  for (std::size_t c = 0; c < l.channels; ++c) {
    double sum_u = 0.0, sum_un = 0.0;
    for (std::size_t o = 0; o < l.outer; ++o) {
      const std::size_t base = (o * l.channels + c) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) {
        sum_u += upstream[base + i];
        sum_un += static_cast<double>(upstream[base + i]) * cache.normalized[base + i];
      }
    }
    g.beta[c] = static_cast<T>(sum_u);
    g.gamma[c] = static_cast<T>(sum_un);
    const double scale = static_cast<double>(gamma[c]) * cache.inv_std[c];
    const double mean_u = sum_u / count, mean_un = sum_un / count;
    for (std::size_t o = 0; o < l.outer; ++o) {
      const std::size_t base = (o * l.channels + c) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) {
        g.input[base + i] = static_cast<T>(
            scale * (upstream[base + i] - mean_u - cache.normalized[base + i] * mean_un));
      }
    }
  }
  return g;
}

/// Probability clamp used by the log losses.
inline constexpr double kProbabilityClamp = 1e-7;

/// Mean binary cross-entropy -[t ln p + (1-t) ln(1-p)] over all elements,
/// with p clamped to [1e-7, 1-1e-7]. For two classes this is the categorical
/// cross-entropy.
template <typename T>
T cross_entropy_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "cross_entropy_loss");
  const double lo = kProbabilityClamp, hi = 1.0 - kProbabilityClamp;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(static_cast<double>(pred[i]), lo, hi);
    const double t = target[i];
    sum -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return static_cast<T>(sum / static_cast<double>(pred.size()));
}

/// d(loss)/d(pred). Zero where the clamp is active.
template <typename T>
Tensor<T> cross_entropy_backward(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "cross_entropy_backward");
  const double lo = kProbabilityClamp, hi = 1.0 - kProbabilityClamp;
  const double n = static_cast<double>(pred.size());
  Tensor<T> g(pred.shape());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i];
    if (p < lo || p > hi) continue;
    const double t = target[i];
    g[i] = static_cast<T>((p - t) / (p * (1.0 - p)) / n);
  }
  return g;
}

/// Gradient of cross_entropy_loss(sigmoid(z), t) with respect to the logits z,
/// summed over `count` elements: (p - t) / count. Used by the models, where the
/// fused form avoids the p(1-p) cancellation.
template <typename T>
Tensor<T> sigmoid_cross_entropy_logit_grad(const Tensor<T>& pred, const Tensor<T>& target,
                                           double count) {
  require_same_shape(pred, target, "sigmoid_cross_entropy_logit_grad");
  Tensor<T> g(pred.shape());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    g[i] = static_cast<T>((static_cast<double>(pred[i]) - target[i]) / count);
  }
  return g;
}

}  // namespace growthcast
