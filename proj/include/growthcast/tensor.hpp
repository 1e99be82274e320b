// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.
//
// Dense row-major tensors and the seeded random stream used across the
// library. Tensor<T> is instantiated with float for training and double
// for gradient checking.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "growthcast/error.hpp"

namespace growthcast {

using Shape = std::vector<std::size_t>;

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    check_extents();
  }

  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (data_.size() != shape_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape_));
    }
  }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  // Rank-3 [C,H,W] accessors.
  T& operator()(std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  const T& operator()(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  Tensor reshaped(Shape shape) const {
    return Tensor(std::move(shape), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  Tensor& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  friend void require_same_shape(const Tensor& a, const Tensor& b,
                                 const char* where) {
    if (a.shape_ != b.shape_) {
      throw ShapeError(std::string(where) + ": shape mismatch " +
                       to_string(a.shape_) + " vs " + to_string(b.shape_));
    }
  }

 private:
  void check_extents() const {
    for (auto d : shape_) {
      if (d == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

/// Stacks equally shaped tensors along a new leading axis.
template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("stack: no tensors");
  Shape shape = parts.front().shape();
  shape.insert(shape.begin(), parts.size());
  std::vector<T> data;
  data.reserve(shape_size(shape));
  for (const auto& p : parts) {
    require_same_shape(p, parts.front(), "stack");
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  return Tensor<T>(std::move(shape), std::move(data));
}

/// Inverse of stack: slice i of the leading axis.
template <typename T>
Tensor<T> slice_leading(const Tensor<T>& t, std::size_t i) {
  Shape shape(t.shape().begin() + 1, t.shape().end());
  const std::size_t n = shape_size(shape);
  auto first = t.data().begin() + static_cast<std::ptrdiff_t>(i * n);
  return Tensor<T>(std::move(shape), std::vector<T>(first, first + static_cast<std::ptrdiff_t>(n)));
}

/// Seeded pseudo-random stream. Bits come from std::mt19937_64, whose output
/// sequence is fixed by the C++ standard; all conversions to reals, integer
/// ranges and permutations are done here rather than by std distributions,
/// which are implementation-defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer on [0, n) by rejection; n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return r % n;
  }

  /// Standard normal via Box-Muller (one draw per call).
  double normal() {
    double u1;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::swap(first[static_cast<std::ptrdiff_t>(i - 1)], first[static_cast<std::ptrdiff_t>(j)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace growthcast
