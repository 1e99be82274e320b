// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.

#include <gtest/gtest.h>

#include <cmath>

#include "growthcast/gradcheck.hpp"
#include "growthcast/ops.hpp"
#include "test_util.hpp"

using namespace growthcast;
using gct::random_tensor;

namespace {

// Direct cross-correlation with zero padding, written independently of conv2d.
Tensor<double> naive_conv(const Tensor<double>& in, const Tensor<double>& k, const Tensor<double>& b) {
  const long cin = static_cast<long>(in.dim(0)), h = static_cast<long>(in.dim(1)), w = static_cast<long>(in.dim(2));
  const long cout = static_cast<long>(k.dim(0)), kh = static_cast<long>(k.dim(2)), kw = static_cast<long>(k.dim(3));
  Tensor<double> out({k.dim(0), in.dim(1), in.dim(2)});
  for (long o = 0; o < cout; ++o)
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        double s = b[static_cast<std::size_t>(o)];
        for (long c = 0; c < cin; ++c)
          for (long i = 0; i < kh; ++i)
            for (long j = 0; j < kw; ++j) {
              const long yy = y + i - kh / 2, xx = x + j - kw / 2;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              s += k[static_cast<std::size_t>(((o * cin + c) * kh + i) * kw + j)] *
                   in[static_cast<std::size_t>((c * h + yy) * w + xx)];
            }
        out[static_cast<std::size_t>((o * h + y) * w + x)] = s;
      }
  return out;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(Conv2d, IdentityKernel) {
  RngStream rng(1);
  const auto x = random_tensor({1, 5, 6}, rng);
  const auto y = conv2d(x, Tensor<double>({1, 1, 1, 1}, 1.0), Tensor<double>({1}));
  EXPECT_EQ(y, x);
}

TEST(Conv2d, AllOnesCountsOverlap) {
  const auto y = conv2d(Tensor<double>({1, 3, 3}, 1.0), Tensor<double>({1, 1, 3, 3}, 1.0), Tensor<double>({1}));
  EXPECT_EQ(y(0, 1, 1), 9.0);
  EXPECT_EQ(y(0, 0, 0), 4.0);
  EXPECT_EQ(y(0, 2, 2), 4.0);
  EXPECT_EQ(y(0, 0, 1), 6.0);
}

TEST(Conv2d, ChannelSum) {
  const auto y = conv2d(Tensor<double>({2, 4, 4}, 1.0), Tensor<double>({1, 2, 1, 1}, 1.0), Tensor<double>({1}));
  for (double v : y.data()) EXPECT_EQ(v, 2.0);
}

TEST(Conv2d, MatchesNaiveOracle) {
  RngStream rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t cin = 1 + rng.below(3), cout = 1 + rng.below(3), k = 1 + 2 * rng.below(3);
    const std::size_t h = 1 + rng.below(9), w = 1 + rng.below(9);
    const auto x = random_tensor({cin, h, w}, rng);
    const auto kern = random_tensor({cout, cin, k, k}, rng);
    const auto b = random_tensor({cout}, rng);
    const auto got = conv2d(x, kern, b), want = naive_conv(x, kern, b);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Conv2d, LinearInInputAndKernel) {
  RngStream rng(3);
  const auto x = random_tensor({2, 6, 5}, rng), y = random_tensor({2, 6, 5}, rng);
  const auto k = random_tensor({3, 2, 3, 3}, rng), k2 = random_tensor({3, 2, 3, 3}, rng);
  const Tensor<double> zero({3});
  const double a = 0.7, b = -1.3;
  Tensor<double> mix = x;
  mix *= a;
  Tensor<double> yb = y;
  yb *= b;
  mix += yb;
  auto lhs = conv2d(mix, k, zero);
  auto r1 = conv2d(x, k, zero), r2 = conv2d(y, k, zero);
  for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], a * r1[i] + b * r2[i], 1e-6 * (1 + std::abs(lhs[i])));
  Tensor<double> kmix = k;
  kmix += k2;
  auto lk = conv2d(x, kmix, zero), s1 = conv2d(x, k, zero), s2 = conv2d(x, k2, zero);
  for (std::size_t i = 0; i < lk.size(); ++i) EXPECT_NEAR(lk[i], s1[i] + s2[i], 1e-6 * (1 + std::abs(lk[i])));
}

TEST(Conv2d, RejectsBadShapes) {
  EXPECT_THROW(conv2d(Tensor<double>({2, 4, 4}), Tensor<double>({1, 3, 3, 3}), Tensor<double>({1})), ShapeError);
  EXPECT_THROW(conv2d(Tensor<double>({1, 4, 4}), Tensor<double>({1, 1, 2, 2}), Tensor<double>({1})), ShapeError);
  EXPECT_THROW(conv2d(Tensor<double>({1, 4, 4}), Tensor<double>({2, 1, 3, 3}), Tensor<double>({1})), ShapeError);
}

TEST(Conv2dBackward, ScalarProductRule) {
  const Tensor<double> x({1, 1, 1}, 3.0), k({1, 1, 1, 1}, -2.0), up({1, 1, 1}, 0.5);
  const auto g = conv2d_backward(up, x, k);
  EXPECT_DOUBLE_EQ(g.kernels[0], 0.5 * 3.0);
  EXPECT_DOUBLE_EQ(g.input[0], 0.5 * -2.0);
  EXPECT_DOUBLE_EQ(g.bias[0], 0.5);
}

TEST(Conv2dBackward, ZeroUpstreamGivesZeroGradients) {
  RngStream rng(4);
  const auto g = conv2d_backward(Tensor<double>({2, 4, 4}), random_tensor({1, 4, 4}, rng), random_tensor({2, 1, 3, 3}, rng));
  for (const auto* t : {&g.input, &g.kernels, &g.bias})
    for (double v : t->data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2dBackward, AdjointIdentity) {
  // <conv(x), u> == <x, conv_backward(u).input> for the linear map in x.
  RngStream rng(5);
  const auto x = random_tensor({2, 5, 7}, rng), k = random_tensor({3, 2, 3, 3}, rng), u = random_tensor({3, 5, 7}, rng);
  const auto g = conv2d_backward(u, x, k);
  EXPECT_NEAR(dot(conv2d(x, k, Tensor<double>({3})), u), dot(x, g.input), 1e-10);
  EXPECT_NEAR(dot(conv2d(x, k, Tensor<double>({3})), u), dot(k, g.kernels), 1e-10);
}

TEST(Conv2dBackward, FiniteDifferencesTenSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream rng(100 + seed);
    Parameter<double> x("x", random_tensor({1, 4, 4}, rng));
    Parameter<double> k("k", random_tensor({2, 1, 3, 3}, rng));
    Parameter<double> b("b", random_tensor({2}, rng));
    const auto w = random_tensor({2, 4, 4}, rng);
    auto f = [&] { return dot(conv2d(x.value, k.value, b.value), w); };
    const auto g = conv2d_backward(w, x.value, k.value);
    x.grad = g.input;
    k.grad = g.kernels;
    b.grad = g.bias;
    Parameter<double>* ps[] = {&x, &k, &b};
    const auto r = finite_diff_check(f, ps, 1e-4);
    EXPECT_LT(r.max_relative_error, 1e-6) << "seed " << seed << " " << r.worst_parameter;
  }
}

TEST(Activation, Values) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  const Tensor<double> x({3}, {0.0, -2.0, 2.0});
  EXPECT_EQ(activate(x, Activation::tanh)[0], 0.0);
  EXPECT_EQ(activate(x, Activation::relu)[1], 0.0);
  EXPECT_EQ(activate(x, Activation::relu)[2], 2.0);
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
  EXPECT_EQ(sigmoid(800.0), 1.0);
}

TEST(Activation, Ranges) {
  RngStream rng(6);
  const auto x = random_tensor({1000}, rng, -20, 20);
  for (double v : activate(x, Activation::sigmoid).data()) EXPECT_TRUE(v > 0.0 && v <= 1.0);
  for (double v : activate(x, Activation::tanh).data()) EXPECT_TRUE(v >= -1.0 && v <= 1.0);
  for (double v : activate(x, Activation::relu).data()) EXPECT_GE(v, 0.0);
}

TEST(Activation, SigmoidDerivativeAtZero) {
  const Tensor<double> x({1}, 0.0);
  const auto g = activation_backward(Tensor<double>({1}, 1.0), activate(x, Activation::sigmoid), Activation::sigmoid);
  const double h = 1e-5;
  const double numeric = (sigmoid(h) - sigmoid(-h)) / (2 * h);
  EXPECT_DOUBLE_EQ(g[0], 0.25);
  EXPECT_NEAR(g[0], numeric, 1e-8);
}

TEST(Activation, FiniteDifferencesTenSeeds) {
  for (auto kind : {Activation::sigmoid, Activation::tanh, Activation::relu}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      RngStream rng(200 + seed);
      Parameter<double> x("x", random_tensor({2, 3, 3}, rng, -3, 3));
      if (kind == Activation::relu)
        for (auto& v : x.value.data()) v = std::abs(v) < 1e-3 ? 0.5 : v;  // stay away from the kink
      const auto w = random_tensor({2, 3, 3}, rng);
      auto f = [&] { return dot(activate(x.value, kind), w); };
      x.grad = activation_backward(w, activate(x.value, kind), kind);
      Parameter<double>* ps[] = {&x};
      EXPECT_LT(finite_diff_check(f, ps).max_relative_error, 1e-4);
    }
  }
}

TEST(BatchNorm, ConstantInputGivesBeta) {
  const auto y = batch_norm(Tensor<double>({2, 3, 3}, 4.0), Tensor<double>({2}, {1.5, 2.0}),
                            Tensor<double>({2}, {0.25, -1.0}), 1e-5);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(y[i], 0.25);
  for (std::size_t i = 9; i < 18; ++i) EXPECT_EQ(y[i], -1.0);
}

TEST(BatchNorm, PlusMinusOne) {
  const auto y = batch_norm(Tensor<double>({1, 1, 2}, {-1.0, 1.0}), Tensor<double>({1}, 1.0), Tensor<double>({1}), 1e-12);
  EXPECT_NEAR(y[0], -1.0, 1e-11);
  EXPECT_NEAR(y[1], 1.0, 1e-11);
}

TEST(BatchNorm, AffineOnStandardizedInput) {
  const Tensor<double> x({1, 2, 2}, {-1.0, 1.0, -1.0, 1.0});
  const auto y = batch_norm(x, Tensor<double>({1}, 2.0), Tensor<double>({1}, 3.0), 1e-12);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y[i], 2 * x[i] + 3, 1e-10);
}

TEST(BatchNorm, OutputStatisticsAndInverse) {
  RngStream rng(7);
  for (std::size_t axis : {0u, 1u}) {
    const auto x = random_tensor({3, 4, 5, 6}, rng, -2, 5);
    const std::size_t c = x.dim(axis);
    BatchNormCache<double> cache;
    const auto y = batch_norm(x, Tensor<double>({c}, 1.0), Tensor<double>({c}), 1e-5, axis, &cache);
    const std::size_t outer = axis == 0 ? 1 : 3, inner = x.size() / outer / c;
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0, s2 = 0;
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
          const double v = y[(o * c + ch) * inner + i];
          s += v;
          s2 += v * v;
        }
      const double n = static_cast<double>(outer * inner), mean = s / n;
      EXPECT_NEAR(mean, 0.0, 1e-6);
      EXPECT_NEAR(s2 / n - mean * mean, 1.0, 1e-4);
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t k = (o * c + ch) * inner + i;
          const double back = y[k] * std::sqrt(cache.variance[ch] + 1e-5) + cache.mean[ch];
          EXPECT_NEAR(back, x[k], 1e-4);
        }
    }
  }
}

TEST(BatchNorm, ChannelMismatch) {
  EXPECT_THROW(batch_norm(Tensor<double>({2, 3, 3}), Tensor<double>({3}), Tensor<double>({3}), 1e-5), ShapeError);
}

TEST(BatchNorm, FiniteDifferencesTenSeeds) {
  for (std::size_t axis : {0u, 1u}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      RngStream rng(300 + seed);
      const Shape shape = axis == 0 ? Shape{3, 4, 4} : Shape{2, 3, 3, 3};
      const std::size_t c = shape[axis];
      Parameter<double> x("x", random_tensor(shape, rng, -2, 2));
      Parameter<double> gamma("gamma", random_tensor({c}, rng, 0.5, 1.5));
      Parameter<double> beta("beta", random_tensor({c}, rng));
      const auto w = random_tensor(shape, rng);
      auto f = [&] { return dot(batch_norm(x.value, gamma.value, beta.value, 1e-5, axis), w); };
      BatchNormCache<double> cache;
      batch_norm(x.value, gamma.value, beta.value, 1e-5, axis, &cache);
      const auto g = batch_norm_backward(w, cache, gamma.value);
      x.grad = g.input;
      gamma.grad = g.gamma;
      beta.grad = g.beta;
      Parameter<double>* ps[] = {&x, &gamma, &beta};
      const auto r = finite_diff_check(f, ps);
      EXPECT_LT(r.max_relative_error, 1e-4) << "axis " << axis << " seed " << seed << " " << r.worst_parameter;
    }
  }
}

TEST(CrossEntropy, ConfidentCorrect) {
  const Tensor<double> t({4}, {0.0, 1.0, 1.0, 0.0});
  EXPECT_LE(cross_entropy_loss(t, t), 2e-7);
}

TEST(CrossEntropy, HalfIsLn2) {
  const Tensor<double> p({2, 2}, 0.5), t({2, 2}, {0.0, 1.0, 1.0, 1.0});
  EXPECT_NEAR(cross_entropy_loss(p, t), std::log(2.0), 1e-12);
  EXPECT_NEAR(cross_entropy_loss(p, t), 0.693147, 1e-6);
}

TEST(CrossEntropy, ShapeMismatch) {
  EXPECT_THROW(cross_entropy_loss(Tensor<double>({2}, 0.5), Tensor<double>({3}, 0.5)), ShapeError);
}

TEST(CrossEntropy, FiniteDifferences2x2) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream rng(400 + seed);
    Parameter<double> p("p", random_tensor({2, 2}, rng, 0.05, 0.95));
    const auto t = random_tensor({2, 2}, rng, 0, 1);
    auto f = [&] { return static_cast<double>(cross_entropy_loss(p.value, t)); };
    p.grad = cross_entropy_backward(p.value, t);
    Parameter<double>* ps[] = {&p};
    EXPECT_LT(finite_diff_check(f, ps).max_relative_error, 1e-6);
  }
}

TEST(CrossEntropy, FusedLogitGradientMatchesChainRule) {
  RngStream rng(8);
  const auto z = random_tensor({3, 3}, rng, -3, 3);
  const auto t = random_tensor({3, 3}, rng, 0, 1);
  const auto p = activate(z, Activation::sigmoid);
  const auto chain = activation_backward(cross_entropy_backward(p, t), p, Activation::sigmoid);
  const auto fused = sigmoid_cross_entropy_logit_grad(p, t, static_cast<double>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(fused[i], chain[i], 1e-12);
}

TEST(GradCheck, Quadratic) {
  Parameter<double> w("w", Tensor<double>({1}, 3.0));
  w.grad[0] = 6.0;
  auto f = [&] { return w.value[0] * w.value[0]; };
  Parameter<double>* ps[] = {&w};
  const auto r = finite_diff_check(f, ps);
  EXPECT_NEAR(r.numeric, 6.0, 1e-6);
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(GradCheck, DetectsWrongGradient) {
  Parameter<double> w("w", Tensor<double>({1}, 3.0));
  w.grad[0] = 5.0;
  auto f = [&] { return w.value[0] * w.value[0]; };
  Parameter<double>* ps[] = {&w};
  EXPECT_GT(finite_diff_check(f, ps).max_relative_error, 0.1);
}

TEST(GradCheck, NonFiniteObjective) {
  Parameter<double> w("w", Tensor<double>({1}, 0.0));
  auto f = [&] { return std::log(w.value[0] > 0 ? w.value[0] : -1.0); };
  Parameter<double>* ps[] = {&w};
  EXPECT_THROW(finite_diff_check(f, ps), NumericError);
}

TEST(GradCheck, RoundingFloorOnlyForgivesRoundOff) {
  // f does not depend on w[0], but rounding in (5 + w0) - w0 makes its difference quotient noisy.
  Parameter<double> w("w", Tensor<double>({2}, {0.3, -0.7}));
  auto f = [&] { return (5.0 + w.value[0]) - w.value[0] + 0.1 * w.value[1]; };
  Parameter<double>* ps[] = {&w};
  w.grad[1] = 0.1;
  EXPECT_LT(finite_diff_check(f, ps, 1e-6).max_relative_error, 1e-4);
  w.grad[0] = 1e-5;  // well above the rounding floor
  EXPECT_GT(finite_diff_check(f, ps, 1e-6).max_relative_error, 0.5);
}
