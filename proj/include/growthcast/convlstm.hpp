// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.
//
// Convolutional LSTM predictor.
//
// Cell (all kernels 3x3, '*' = same-padded convolution, 'o' = Hadamard):
//   i_t  = sigmoid(W_xi * X_t + W_hi * H_{t-1} + w_ci o C_{t-1} + b_i)
//   f_t  = sigmoid(W_xf * X_t + W_hf * H_{t-1} + w_cf o C_{t-1} + b_f)
//   o_t  = sigmoid(W_xo * X_t + W_ho * H_{t-1} + w_co o C_{t-1} + b_o)
//   C~_t = tanh(W_xc * X_t + W_hc * H_{t-1} + b_c)
//   C_t  = f_t o C_{t-1} + i_t o C~_t
//   H_t  = o_t o tanh(C_t)
// The output-gate peephole reads C_{t-1} by default; OutputGatePeephole::current
// switches it to C_t. Peephole weights are per-channel vectors broadcast over
// space. Input and recurrent kernels are stored stacked in gate order
// (i, f, o, c) along the output-channel axis.
//
// Model: L stacked cells (layer l's hidden sequence feeds layer l+1), batch
// norm on the hidden outputs of layers 1..L-1, then a 3x3 convolution over the
// last layer's hidden states of all T steps (concatenated along channels, i.e.
// a depth-T kernel) followed by a sigmoid.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "growthcast/ops.hpp"
#include "growthcast/optim.hpp"
#include "growthcast/raster.hpp"

namespace growthcast {

enum class OutputGatePeephole { previous, current };

template <typename T>
struct CellState {
  Tensor<T> h;
  Tensor<T> c;

  static CellState zeros(std::size_t filters, std::size_t height, std::size_t width) {
    return {Tensor<T>({filters, height, width}), Tensor<T>({filters, height, width})};
  }
};

template <typename T>
struct CellCache {
  Tensor<T> x, h_prev, c_prev;
  Tensor<T> i, f, o, g;  // gate activations
  Tensor<T> c, tanh_c;
  bool valid = false;
};

template <typename T>
struct CellInputGrads {
  Tensor<T> x, h_prev, c_prev;
};

template <typename T>
class ConvLstmCell {
 public:
  ConvLstmCell() = default;

  /// Zero-initialized cell.
  ConvLstmCell(const std::string& prefix, std::size_t in_channels, std::size_t filters,
               OutputGatePeephole gate = OutputGatePeephole::previous)
      : w_x(prefix + ".w_x", Tensor<T>({4 * filters, in_channels, 3, 3})),
        w_h(prefix + ".w_h", Tensor<T>({4 * filters, filters, 3, 3})),
        bias(prefix + ".bias", Tensor<T>({4 * filters})),
        peep_i(prefix + ".w_ci", Tensor<T>({filters})),
        peep_f(prefix + ".w_cf", Tensor<T>({filters})),
        peep_o(prefix + ".w_co", Tensor<T>({filters})),
        in_channels_(in_channels),
        filters_(filters),
        gate_(gate) {}

  /// Xavier-initialized kernels, zero biases and peepholes.
  ConvLstmCell(const std::string& prefix, std::size_t in_channels, std::size_t filters,
               OutputGatePeephole gate, RngStream& rng)
      : ConvLstmCell(prefix, in_channels, filters, gate) {
    w_x.value = xavier_init<T>(w_x.value.shape(), in_channels * 9, 4 * filters * 9, rng);
    w_h.value = xavier_init<T>(w_h.value.shape(), filters * 9, 4 * filters * 9, rng);
  }

  std::vector<Parameter<T>*> parameters() { return {&w_x, &w_h, &bias, &peep_i, &peep_f, &peep_o}; }
  std::vector<const Parameter<T>*> parameters() const {
    return {&w_x, &w_h, &bias, &peep_i, &peep_f, &peep_o};
  }

  std::size_t in_channels() const { return in_channels_; }
  std::size_t filters() const { return filters_; }
  OutputGatePeephole output_gate() const { return gate_; }

  Parameter<T> w_x, w_h, bias, peep_i, peep_f, peep_o;

 private:
  std::size_t in_channels_ = 0, filters_ = 0;
  OutputGatePeephole gate_ = OutputGatePeephole::previous;
};

namespace lstm_detail {

// Adds w[c] * src(c,·) to dst(c,·) for every channel c.
template <typename T>
void add_channel_scaled(T* dst, const Tensor<T>& src, const Tensor<T>& w, std::size_t plane) {
  for (std::size_t c = 0; c < w.size(); ++c) {
    const T wc = w[c];
    const T* s = src.data().data() + c * plane;
    T* d = dst + c * plane;
    for (std::size_t i = 0; i < plane; ++i) d[i] += wc * s[i];
  }
}

// Per-channel sum over space of a(c,·) * b(c,·), accumulated into out[c].
template <typename T>
void accumulate_channel_dot(Tensor<T>& out, const T* a, const Tensor<T>& b, std::size_t plane) {
  for (std::size_t c = 0; c < out.size(); ++c) {
    T s{0};
    const T* ac = a + c * plane;
    const T* bc = b.data().data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) s += ac[i] * bc[i];
    out[c] += s;
  }
}

}  // namespace lstm_detail

template <typename T>
CellState<T> cell_forward(const ConvLstmCell<T>& cell, const Tensor<T>& x, const CellState<T>& state,
                          CellCache<T>* cache = nullptr) {
  const std::size_t f = cell.filters();
  if (x.rank() != 3 || x.dim(0) != cell.in_channels()) {
    throw ShapeError("cell_forward: input " + to_string(x.shape()) + " but cell expects " +
                     std::to_string(cell.in_channels()) + " channels");
  }
  const Shape state_shape{f, x.dim(1), x.dim(2)};
  if (state.h.shape() != state_shape || state.c.shape() != state_shape) {
    throw ShapeError("cell_forward: state " + to_string(state.h.shape()) + "/" + to_string(state.c.shape()) +
                     " does not match " + to_string(state_shape));
  }
  const std::size_t plane = x.dim(1) * x.dim(2), n = f * plane;

  auto pre = conv2d(x, cell.w_x.value, cell.bias.value);
  pre += conv2d(state.h, cell.w_h.value, Tensor<T>({4 * f}));
  T* a = pre.data().data();
  lstm_detail::add_channel_scaled(a, state.c, cell.peep_i.value, plane);
  lstm_detail::add_channel_scaled(a + n, state.c, cell.peep_f.value, plane);
  const bool current = cell.output_gate() == OutputGatePeephole::current;
  if (!current) lstm_detail::add_channel_scaled(a + 2 * n, state.c, cell.peep_o.value, plane);

  Tensor<T> i(state_shape), fg(state_shape), o(state_shape), g(state_shape);
  CellState<T> next{Tensor<T>(state_shape), Tensor<T>(state_shape)};
  for (std::size_t k = 0; k < n; ++k) {
    i[k] = sigmoid(a[k]);
    fg[k] = sigmoid(a[n + k]);
    g[k] = std::tanh(a[3 * n + k]);
    next.c[k] = fg[k] * state.c[k] + i[k] * g[k];
  }
  if (current) lstm_detail::add_channel_scaled(a + 2 * n, next.c, cell.peep_o.value, plane);
  Tensor<T> tanh_c(state_shape);
  for (std::size_t k = 0; k < n; ++k) {
    o[k] = sigmoid(a[2 * n + k]);
    tanh_c[k] = std::tanh(next.c[k]);
    next.h[k] = o[k] * tanh_c[k];
  }
  if (cache) {
    *cache = {x, state.h, state.c, std::move(i), std::move(fg), std::move(o), std::move(g),
              next.c, std::move(tanh_c), true};
  }
  return next;
}

/// Backward through one step given d(loss)/d(H_t) and d(loss)/d(C_t) from
/// later consumers. Parameter gradients are accumulated into the cell.
template <typename T>
CellInputGrads<T> cell_backward(ConvLstmCell<T>& cell, const CellCache<T>& cache, const Tensor<T>& grad_h,
                                const Tensor<T>& grad_c) {
  if (!cache.valid) throw DataError("cell_backward: forward activations were not saved");
  require_same_shape(grad_h, cache.c, "cell_backward (grad H)");
  require_same_shape(grad_c, cache.c, "cell_backward (grad C)");
  const std::size_t f = cell.filters(), plane = cache.c.dim(1) * cache.c.dim(2), n = f * plane;
  const bool current = cell.output_gate() == OutputGatePeephole::current;

  Tensor<T> da({4 * f, cache.c.dim(1), cache.c.dim(2)});
  T* dai = da.data().data();
  T* daf = dai + n;
  T* dao = dai + 2 * n;
  T* dag = dai + 3 * n;
  Tensor<T> dc(cache.c.shape());
  for (std::size_t k = 0; k < n; ++k) {
    const T tc = cache.tanh_c[k], o = cache.o[k];
    dao[k] = grad_h[k] * tc * o * (T{1} - o);
    dc[k] = grad_c[k] + grad_h[k] * o * (T{1} - tc * tc);
  }
  if (current) {
    for (std::size_t ch = 0; ch < f; ++ch) {
      const T w = cell.peep_o.value[ch];
      for (std::size_t k = ch * plane; k < (ch + 1) * plane; ++k) dc[k] += dao[k] * w;
    }
    lstm_detail::accumulate_channel_dot(cell.peep_o.grad, dao, cache.c, plane);
  }

  CellInputGrads<T> out{Tensor<T>(), Tensor<T>(), Tensor<T>(cache.c.shape())};
  for (std::size_t k = 0; k < n; ++k) {
    const T i = cache.i[k], fg = cache.f[k], g = cache.g[k];
    dai[k] = dc[k] * g * i * (T{1} - i);
    daf[k] = dc[k] * cache.c_prev[k] * fg * (T{1} - fg);
    dag[k] = dc[k] * i * (T{1} - g * g);
    out.c_prev[k] = dc[k] * fg;
  }
  T* dcp = out.c_prev.data().data();
  for (std::size_t ch = 0; ch < f; ++ch) {
    const T wi = cell.peep_i.value[ch], wf = cell.peep_f.value[ch], wo = cell.peep_o.value[ch];
    for (std::size_t k = ch * plane; k < (ch + 1) * plane; ++k) {
      dcp[k] += dai[k] * wi + daf[k] * wf;
      if (!current) dcp[k] += dao[k] * wo;
    }
  }
  lstm_detail::accumulate_channel_dot(cell.peep_i.grad, dai, cache.c_prev, plane);
  lstm_detail::accumulate_channel_dot(cell.peep_f.grad, daf, cache.c_prev, plane);
  if (!current) lstm_detail::accumulate_channel_dot(cell.peep_o.grad, dao, cache.c_prev, plane);

  auto gx = conv2d_backward(da, cache.x, cell.w_x.value);
  auto gh = conv2d_backward(da, cache.h_prev, cell.w_h.value);
  cell.w_x.grad += gx.kernels;
  cell.w_h.grad += gh.kernels;
  cell.bias.grad += gx.bias;
  out.x = std::move(gx.input);
  out.h_prev = std::move(gh.input);
  return out;
}

struct ConvLstmConfig {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t layers = 4;
  std::size_t filters = 40;
  std::size_t seq_len = 1;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
  OutputGatePeephole output_gate = OutputGatePeephole::previous;

  void validate() const {
    if (in_channels < 1 || out_channels < 1) throw ConfigError("model: channel counts must be >= 1");
    if (layers < 1) throw ConfigError("train.layers must be >= 1");
    if (filters < 1) throw ConfigError("train.filters must be >= 1");
    if (seq_len < 1) throw ConfigError("model: sequence length must be >= 1");
    if (!(bn_eps > 0.0)) throw ConfigError("model: bn_eps must be positive");
    if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) throw ConfigError("model: bn_momentum must lie in (0,1]");
  }
};

enum class Mode { train, eval };

template <typename T>
class ConvLstmModel {
 public:
  struct Norm {
    Parameter<T> gamma, beta;
    Tensor<T> running_mean, running_var;
  };

  /// Zero-initialized model (BN gamma = 1, running variance = 1).
  explicit ConvLstmModel(const ConvLstmConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    build(nullptr);
  }

  ConvLstmModel(const ConvLstmConfig& cfg, RngStream& rng) : cfg_(cfg) {
    cfg.validate();
    build(&rng);
  }

  const ConvLstmConfig& config() const { return cfg_; }

  std::vector<ConvLstmCell<T>>& cells() { return cells_; }
  std::vector<Norm>& norms() { return norms_; }
  Parameter<T>& out_kernel() { return out_kernel_; }
  Parameter<T>& out_bias() { return out_bias_; }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    for (std::size_t l = 0; l < cells_.size(); ++l) {
      for (auto* p : cells_[l].parameters()) out.push_back(p);
      if (l < norms_.size()) {
        out.push_back(&norms_[l].gamma);
        out.push_back(&norms_[l].beta);
      }
    }
    out.push_back(&out_kernel_);
    out.push_back(&out_bias_);
    return out;
  }

  /// Every persistent tensor (parameters and BN running statistics) in a fixed
  /// order with stable names.
  std::vector<std::pair<std::string, Tensor<T>*>> named_tensors() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (std::size_t l = 0; l < cells_.size(); ++l) {
      for (auto* p : cells_[l].parameters()) out.emplace_back(p->name, &p->value);
      if (l < norms_.size()) {
        auto& nm = norms_[l];
        out.emplace_back(nm.gamma.name, &nm.gamma.value);
        out.emplace_back(nm.beta.name, &nm.beta.value);
        out.emplace_back("bn" + std::to_string(l) + ".running_mean", &nm.running_mean);
        out.emplace_back("bn" + std::to_string(l) + ".running_var", &nm.running_var);
      }
    }
    out.emplace_back(out_kernel_.name, &out_kernel_.value);
    out.emplace_back(out_bias_.name, &out_bias_.value);
    return out;
  }

  struct Cache {
    // [layer][sample][step]
    std::vector<std::vector<std::vector<CellCache<T>>>> cells;
    std::vector<BatchNormCache<T>> norms;
    std::vector<Tensor<T>> head_inputs;  // concatenated last-layer hidden states per sample
    std::size_t batch = 0;
  };

  /// Runs a batch of sequences [T,Cin,H,W] and returns sigmoid outputs
  /// [Cout,H,W]. In train mode BN uses batch statistics (over samples, steps
  /// and space) and updates the running averages; eval mode uses the running
  /// averages.
  std::vector<Tensor<T>> forward(const std::vector<Tensor<T>>& batch, Mode mode, Cache* cache = nullptr) {
    if (batch.empty()) throw DataError("model forward: empty batch");
    const std::size_t steps = cfg_.seq_len, f = cfg_.filters;
    for (const auto& s : batch) {
      if (s.rank() != 4 || s.dim(0) != steps || s.dim(1) != cfg_.in_channels) {
        throw ShapeError("model forward: expected [" + std::to_string(steps) + "," +
                         std::to_string(cfg_.in_channels) + ",H,W] sequence, got " + to_string(s.shape()));
      }
      if (s.shape() != batch.front().shape()) throw ShapeError("model forward: batch shapes differ");
    }
    const std::size_t n = batch.size(), h = batch.front().dim(2), w = batch.front().dim(3);
    if (cache) {
      cache->cells.assign(cells_.size(), std::vector<std::vector<CellCache<T>>>(n, std::vector<CellCache<T>>(steps)));
      cache->norms.assign(norms_.size(), {});
      cache->head_inputs.clear();
      cache->batch = n;
    }

    std::vector<std::vector<Tensor<T>>> inputs(n);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = 0; t < steps; ++t) inputs[s].push_back(slice_leading(batch[s], t));

    for (std::size_t l = 0; l < cells_.size(); ++l) {
      std::vector<std::vector<Tensor<T>>> hidden(n);
      for (std::size_t s = 0; s < n; ++s) {
        auto state = CellState<T>::zeros(f, h, w);
        for (std::size_t t = 0; t < steps; ++t) {
          state = cell_forward(cells_[l], inputs[s][t], state, cache ? &cache->cells[l][s][t] : nullptr);
          hidden[s].push_back(state.h);
        }
      }
      if (l < norms_.size()) hidden = normalize(l, hidden, mode, cache);
      inputs = std::move(hidden);
    }

    std::vector<Tensor<T>> outputs;
    for (std::size_t s = 0; s < n; ++s) {
      auto head = concat_steps(inputs[s]);
      auto logits = conv2d(head, out_kernel_.value, out_bias_.value);
      outputs.push_back(activate(logits, Activation::sigmoid));
      if (cache) cache->head_inputs.push_back(std::move(head));
    }
    return outputs;
  }

  /// Backpropagates d(loss)/d(output logits) through a train-mode forward and
  /// accumulates every parameter gradient. Returns d(loss)/d(input sequence).
  std::vector<Tensor<T>> backward(const Cache& cache, const std::vector<Tensor<T>>& grad_logits) {
    const std::size_t n = cache.batch, steps = cfg_.seq_len, f = cfg_.filters;
    if (grad_logits.size() != n) throw ShapeError("model backward: gradient count differs from batch");
    std::vector<std::vector<Tensor<T>>> grad_hidden(n);
    for (std::size_t s = 0; s < n; ++s) {
      auto g = conv2d_backward(grad_logits[s], cache.head_inputs[s], out_kernel_.value);
      out_kernel_.grad += g.kernels;
      out_bias_.grad += g.bias;
      const std::size_t h = g.input.dim(1), w = g.input.dim(2);
      for (std::size_t t = 0; t < steps; ++t) {
        const auto first = g.input.data().begin() + static_cast<std::ptrdiff_t>(t * f * h * w);
        grad_hidden[s].emplace_back(Shape{f, h, w},
                                    std::vector<T>(first, first + static_cast<std::ptrdiff_t>(f * h * w)));
      }
    }
    std::vector<std::vector<Tensor<T>>> grad_inputs(n);
    for (std::size_t l = cells_.size(); l-- > 0;) {
      if (l < norms_.size()) grad_hidden = normalize_backward(l, grad_hidden, cache);
      for (std::size_t s = 0; s < n; ++s) {
        grad_inputs[s].assign(steps, Tensor<T>());
        const auto& shape = grad_hidden[s].front().shape();
        Tensor<T> carry_h(shape), carry_c(shape);
        for (std::size_t t = steps; t-- > 0;) {
          Tensor<T> gh = grad_hidden[s][t];
          gh += carry_h;
          auto g = cell_backward(cells_[l], cache.cells[l][s][t], gh, carry_c);
          carry_h = std::move(g.h_prev);
          carry_c = std::move(g.c_prev);
          grad_inputs[s][t] = std::move(g.x);
        }
      }
      grad_hidden = grad_inputs;
    }
    std::vector<Tensor<T>> out;
    for (auto& seq : grad_inputs) out.push_back(stack(std::span<const Tensor<T>>(seq)));
    return out;
  }

 private:
  void build(RngStream* rng) {
    std::size_t cin = cfg_.in_channels;
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      const std::string prefix = "lstm" + std::to_string(l);
      if (rng) cells_.emplace_back(prefix, cin, cfg_.filters, cfg_.output_gate, *rng);
      else cells_.emplace_back(prefix, cin, cfg_.filters, cfg_.output_gate);
      cin = cfg_.filters;
      if (l + 1 < cfg_.layers) {
        const std::string b = "bn" + std::to_string(l);
        norms_.push_back({Parameter<T>(b + ".gamma", Tensor<T>({cfg_.filters}, T{1})),
                          Parameter<T>(b + ".beta", Tensor<T>({cfg_.filters})), Tensor<T>({cfg_.filters}),
                          Tensor<T>({cfg_.filters}, T{1})});
      }
    }
    const std::size_t head = cfg_.filters * cfg_.seq_len;
    Tensor<T> k({cfg_.out_channels, head, 3, 3});
    if (rng) k = xavier_init<T>(k.shape(), head * 9, cfg_.out_channels * 9, *rng);
    out_kernel_ = Parameter<T>("head.kernel", std::move(k));
    out_bias_ = Parameter<T>("head.bias", Tensor<T>({cfg_.out_channels}));
  }

  static Tensor<T> concat_steps(const std::vector<Tensor<T>>& steps) {
    if (steps.size() == 1) return steps.front();
    const auto& s0 = steps.front().shape();
    std::vector<T> data;
    for (const auto& s : steps) data.insert(data.end(), s.data().begin(), s.data().end());
    return Tensor<T>({s0[0] * steps.size(), s0[1], s0[2]}, std::move(data));
  }

  std::vector<std::vector<Tensor<T>>> normalize(std::size_t l, const std::vector<std::vector<Tensor<T>>>& hidden,
                                                Mode mode, Cache* cache) {
    auto& nm = norms_[l];
    const std::size_t n = hidden.size(), steps = hidden.front().size();
    std::vector<Tensor<T>> flat;
    for (const auto& seq : hidden) flat.insert(flat.end(), seq.begin(), seq.end());
    auto stacked = stack(std::span<const Tensor<T>>(flat));
    Tensor<T> normed;
    if (mode == Mode::train) {
      BatchNormCache<T> bn;
      normed = batch_norm(stacked, nm.gamma.value, nm.beta.value, static_cast<T>(cfg_.bn_eps), 1, &bn);
      const double count = static_cast<double>(stacked.size() / cfg_.filters);
      const double unbias = count > 1 ? count / (count - 1) : 1.0;
      const double mom = cfg_.bn_momentum;
      for (std::size_t c = 0; c < cfg_.filters; ++c) {
        nm.running_mean[c] = static_cast<T>((1 - mom) * nm.running_mean[c] + mom * bn.mean[c]);
        nm.running_var[c] = static_cast<T>((1 - mom) * nm.running_var[c] + mom * bn.variance[c] * unbias);
      }
      if (cache) cache->norms[l] = std::move(bn);
    } else {
      normed = Tensor<T>(stacked.shape());
      const std::size_t plane = stacked.dim(2) * stacked.dim(3);
      for (std::size_t k = 0; k < stacked.dim(0); ++k) {
        for (std::size_t c = 0; c < cfg_.filters; ++c) {
          const double scale = nm.gamma.value[c] / std::sqrt(static_cast<double>(nm.running_var[c]) + cfg_.bn_eps);
          const double shift = nm.beta.value[c] - scale * nm.running_mean[c];
          const std::size_t base = (k * cfg_.filters + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) normed[base + i] = static_cast<T>(scale * stacked[base + i] + shift);
        }
      }
    }
    std::vector<std::vector<Tensor<T>>> out(n);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = 0; t < steps; ++t) out[s].push_back(slice_leading(normed, s * steps + t));
    return out;
  }

  std::vector<std::vector<Tensor<T>>> normalize_backward(std::size_t l,
                                                         const std::vector<std::vector<Tensor<T>>>& grad,
                                                         const Cache& cache) {
    auto& nm = norms_[l];
    const std::size_t n = grad.size(), steps = grad.front().size();
    std::vector<Tensor<T>> flat;
    for (const auto& seq : grad) flat.insert(flat.end(), seq.begin(), seq.end());
    auto g = batch_norm_backward(stack(std::span<const Tensor<T>>(flat)), cache.norms[l], nm.gamma.value);
    nm.gamma.grad += g.gamma;
    nm.beta.grad += g.beta;
    std::vector<std::vector<Tensor<T>>> out(n);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = 0; t < steps; ++t) out[s].push_back(slice_leading(g.input, s * steps + t));
    return out;
  }

  ConvLstmConfig cfg_;
  std::vector<ConvLstmCell<T>> cells_;
  std::vector<Norm> norms_;
  Parameter<T> out_kernel_;
  Parameter<T> out_bias_;
};

/// Single-sequence inference: [T,Cin,H,W] -> [Cout,H,W] in (0,1).
template <typename T>
Tensor<T> model_forward(ConvLstmModel<T>& model, const Tensor<T>& sequence) {
  return model.forward({sequence}, Mode::eval).front();
}

/// Mean cross-entropy of a batch of predictions and its gradient with respect
/// to the output logits.
template <typename T>
double batch_cross_entropy(const std::vector<Tensor<T>>& preds, const std::vector<Tensor<T>>& targets,
                           std::vector<Tensor<T>>* grad_logits = nullptr) {
  double total = 0.0, count = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double n = static_cast<double>(preds[i].size());
    total += static_cast<double>(cross_entropy_loss(preds[i], targets[i])) * n;
    count += n;
  }
  if (grad_logits) {
    grad_logits->clear();
    for (std::size_t i = 0; i < preds.size(); ++i)
      grad_logits->push_back(sigmoid_cross_entropy_logit_grad(preds[i], targets[i], count));
  }
  return total / count;
}

struct TrainConfig {
  std::size_t batch_size = 10;
  AdamConfig adam{};
  std::size_t epochs_max = 32;
  std::size_t patience = 5;  // epochs without validation improvement before stopping
  std::uint64_t seed = 0;
  double threshold = 0.5;
  bool restore_best = true;
  bool augment = false;  // each epoch visits all 8 flips/transposes of every pair

  void validate(std::size_t dataset_size) const {
    if (dataset_size == 0) throw DataError("train: empty dataset");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (batch_size > dataset_size)
      throw ConfigError("train.batch_size (" + std::to_string(batch_size) + ") exceeds dataset size (" +
                        std::to_string(dataset_size) + ")");
    if (!(adam.lr > 0.0)) throw ConfigError("train.lr must be positive");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("train.beta1 must lie in [0,1)");
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("train.beta2 must lie in [0,1)");
    if (!(adam.epsilon > 0.0)) throw ConfigError("train.epsilon must be positive");
    if (epochs_max < 1) throw ConfigError("epochs must be >= 1");
    if (patience < 1) throw ConfigError("train.patience must be >= 1");
  }
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0, train_accuracy = 0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double val_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  long updates = 0;
};

namespace lstm_detail {

template <typename T>
std::size_t count_correct(const Tensor<T>& pred, const Tensor<T>& target, double threshold) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += (pred[i] >= threshold) == (target[i] >= 0.5);
  return ok;
}

// One of the 8 symmetries of the square, applied to every channel of
// [C,H,W]: bit 0 mirrors x, bit 1 mirrors y, bit 2 transposes (square only).
inline Tensor<float> dihedral(const Tensor<float>& t, unsigned k) {
  const std::size_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  if (h != w) k &= 3u;
  Tensor<float> out(t.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        std::size_t sx = (k & 1u) ? w - 1 - x : x, sy = (k & 2u) ? h - 1 - y : y;
        if (k & 4u) std::swap(sx, sy);
        out(ch, y, x) = t(ch, sy, sx);
      }
  return out;
}

template <typename T>
Tensor<T> as_sequence(const Tensor<float>& tile, std::size_t steps) {
  // Dataset tiles are single frames [C,H,W]; a length-T sequence repeats the
  // leading axis only when the caller supplies [T*C,H,W].
  const std::size_t c = tile.dim(0) / steps;
  return tile.cast<T>().reshaped({steps, c, tile.dim(1), tile.dim(2)});
}

}  // namespace lstm_detail

/// Mean cross-entropy and pixel accuracy of the model (eval mode) on a dataset.
template <typename T>
std::pair<double, double> evaluate_dataset(ConvLstmModel<T>& model, const Dataset& ds, double threshold) {
  double loss = 0.0, count = 0.0;
  std::size_t correct = 0;
  for (std::size_t j = 0; j < ds.size(); ++j) {
    const auto pred = model_forward(model, lstm_detail::as_sequence<T>(ds.x[j], model.config().seq_len));
    const auto target = ds.y[j].cast<T>();
    loss += static_cast<double>(cross_entropy_loss(pred, target)) * static_cast<double>(pred.size());
    count += static_cast<double>(pred.size());
    correct += lstm_detail::count_correct(pred, target, threshold);
  }
  return {loss / count, static_cast<double>(correct) / count};
}

/// Mini-batch Adam training on cross-entropy, shuffling each epoch with a
/// seeded stream. Stops after epochs_max or when the validation loss (the
/// training loss when no validation set is given) has not improved for
/// `patience` epochs; optionally restores the best epoch's weights.
template <typename T>
TrainingLog train_model(ConvLstmModel<T>& model, const Dataset& train, const Dataset* validation,
                        const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate(train.size());
  if (train.x.size() != train.y.size()) throw DataError("train: X/Y tile counts differ");
  for (std::size_t j = 0; j < train.size(); ++j) {
    if (train.x[j].shape() != train.x.front().shape() || train.y[j].shape() != train.y.front().shape())
      throw ShapeError("train: tiles are not homogeneous");
  }
  const bool has_val = validation && validation->size() > 0;

  RngStream rng(cfg.seed);
  const std::size_t views = cfg.augment ? 8 : 1;
  std::vector<std::size_t> order(train.size() * views);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto params = model.parameters();
  auto named = model.named_tensors();
  std::vector<Tensor<T>> best;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  TrainingLog log;

  for (std::size_t epoch = 1; epoch <= cfg.epochs_max; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0, px = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += cfg.batch_size, ++b) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Tensor<T>> xs, ys;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t j = order[k] / views;
        const auto sym = static_cast<unsigned>(order[k] % views);
        if (sym == 0) {
          xs.push_back(lstm_detail::as_sequence<T>(train.x[j], model.config().seq_len));
          ys.push_back(train.y[j].template cast<T>());
        } else {
          xs.push_back(lstm_detail::as_sequence<T>(lstm_detail::dihedral(train.x[j], sym), model.config().seq_len));
          ys.push_back(lstm_detail::dihedral(train.y[j], sym).template cast<T>());
        }
      }
      typename ConvLstmModel<T>::Cache cache;
      const auto preds = model.forward(xs, Mode::train, &cache);
      std::vector<Tensor<T>> grads;
      const double loss = batch_cross_entropy(preds, ys, &grads);
      if (!std::isfinite(loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b));
      }
      for (auto* p : params) p->zero_grad();
      model.backward(cache, grads);
      ++log.updates;
      for (auto* p : params) adam_step(*p, cfg.adam, log.updates);
      double n = 0.0;
      for (std::size_t k = 0; k < preds.size(); ++k) {
        n += static_cast<double>(preds[k].size());
        correct += lstm_detail::count_correct(preds[k], ys[k], cfg.threshold);
      }
      loss_sum += loss * n;
      px += n;
    }
    EpochLog e;
    e.epoch = epoch;
    e.train_loss = loss_sum / px;
    e.train_accuracy = static_cast<double>(correct) / px;
    if (has_val) std::tie(e.val_loss, e.val_accuracy) = evaluate_dataset(model, *validation, cfg.threshold);
    log.epochs.push_back(e);
    if (on_epoch) on_epoch(e);

    const double monitored = has_val ? e.val_loss : e.train_loss;
    if (monitored < best_loss) {
      best_loss = monitored;
      log.best_epoch = epoch;
      stale = 0;
      if (cfg.restore_best) {
        best.clear();
        for (auto& [name, t] : named) best.push_back(*t);
      }
    } else if (++stale >= cfg.patience) {
      log.stopped_early = true;
      break;
    }
  }
  if (cfg.restore_best && !best.empty()) {
    for (std::size_t i = 0; i < named.size(); ++i) *named[i].second = best[i];
  }
  return log;
}

/// Per-tile inference on [C,H,W] tiles.
template <typename T>
std::vector<Tensor<float>> predict(ConvLstmModel<T>& model, const std::vector<Tensor<float>>& tiles) {
  std::vector<Tensor<float>> out;
  const std::size_t expected = model.config().in_channels * model.config().seq_len;
  for (const auto& t : tiles) {
    if (t.rank() != 3 || t.dim(0) != expected) {
      throw ShapeError("predict: tile " + to_string(t.shape()) + " does not match model input channels " +
                       std::to_string(expected));
    }
    out.push_back(model_forward(model, lstm_detail::as_sequence<T>(t, model.config().seq_len)).template cast<float>());
  }
  return out;
}

}  // namespace growthcast
