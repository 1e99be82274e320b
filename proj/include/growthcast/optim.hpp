// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.

#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "growthcast/tensor.hpp"

namespace growthcast {

/// A learnable tensor with its gradient and optimizer state. `moment1` is the
/// velocity for SGD-momentum and the first moment for Adam; `moment2` is only
/// used by Adam. All three share the value's shape and start at zero.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> moment1;
  Tensor<T> moment2;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(value.shape()),
        moment1(value.shape()),
        moment2(value.shape()) {}

  void zero_grad() { grad.fill(T{0}); }
  void reset_state() {
    moment1.fill(T{0});
    moment2.fill(T{0});
  }
};

/// Glorot/Xavier uniform: U[-a, a] with a = sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T> xavier_init(Shape shape, std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
  if (fan_in == 0 || fan_out == 0) {
    throw ConfigError("xavier_init: fan_in and fan_out must be >= 1");
  }
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-a, a));
  return t;
}

/// Heavy-ball momentum: v <- momentum*v + grad; value <- value - lr*v.
template <typename T>
void sgd_momentum_step(Parameter<T>& p, T lr, T momentum) {
  auto v = p.moment1.data();
  auto g = p.grad.data();
  auto w = p.value.data();
  for (std::size_t i = 0; i < w.size(); ++i) {
    v[i] = momentum * v[i] + g[i];
    w[i] -= lr * v[i];
  }
}

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update; `step` is the 1-based update count.
template <typename T>
void adam_step(Parameter<T>& p, const AdamConfig& cfg, long step) {
  if (step < 1) throw ConfigError("adam_step: step index must be >= 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  auto m = p.moment1.data();
  auto v = p.moment2.data();
  auto g = p.grad.data();
  auto w = p.value.data();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double gi = g[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double m_hat = mi / c1;
    const double v_hat = vi / c2;
    w[i] = static_cast<T>(w[i] - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
  }
}

}  // namespace growthcast
