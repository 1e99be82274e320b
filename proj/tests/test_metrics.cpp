// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "growthcast/metrics.hpp"
#include "test_util.hpp"

using namespace growthcast;

namespace {

ConfusionMatrix counts(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
  ConfusionMatrix cm;
  cm.counts = {{{a, b}, {c, d}}};
  return cm;
}

// Direct evaluation of the SSIM formula for a window with the given moments.
double ssim_formula(double mx, double my, double vx, double vy, double cov) {
  const double c1 = 1e-4, c2 = 9e-4;
  return ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

}  // namespace

TEST(Mse, Examples) {
  RngStream rng(1);
  const auto x = gct::random_tensor({16, 16}, rng, 0, 1);
  EXPECT_EQ(mse(x, x), 0.0);
  const Tensor<double> zeros({8, 8}), ones({8, 8}, 1.0);
  EXPECT_EQ(mse(zeros, ones), 1.0);
  EXPECT_EQ(rmse(zeros, ones), 1.0);
  Tensor<double> half({8, 8});
  for (std::size_t i = 0; i < half.size(); i += 2) half[i] = 1.0;
  EXPECT_NEAR(mse(zeros, half), 0.5, 1e-9);
  EXPECT_NEAR(rmse(zeros, half), 0.70710678118654752, 1e-9);
  EXPECT_THROW(mse(zeros, Tensor<double>({4, 4})), ShapeError);
}

TEST(Psnr, Examples) {
  EXPECT_NEAR(psnr_from_mse(0.01), 20.0, 1e-9);
  EXPECT_NEAR(psnr_from_mse(1.0), 0.0, 1e-9);
  const Tensor<double> a({4, 4}, 0.3);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_EQ(format_db(psnr(a, a)), "inf");
}

TEST(Psnr, StrictlyDecreasingInMse) {
  double prev = psnr_from_mse(1e-6);
  for (double m = 2e-6; m <= 1.0; m *= 1.7) {
    const double p = psnr_from_mse(m);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Ssim, IdentityAndConstantPair) {
  RngStream rng(2);
  const auto x = gct::random_tensor({24, 20}, rng, 0, 1);
  EXPECT_EQ(ssim(x, x), 1.0);
  const Tensor<double> zeros({16, 16}), ones({16, 16}, 1.0);
  EXPECT_NEAR(ssim(zeros, ones), 1e-4 / (1.0 + 1e-4), 1e-6);
  EXPECT_NEAR(ssim(zeros, ones), ssim_formula(0, 1, 0, 0, 0), 1e-12);
}

TEST(Ssim, SymmetricAndBounded) {
  RngStream rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = gct::random_tensor({11, 11}, rng, 0, 1);
    const auto b = gct::random_tensor({11, 11}, rng, 0, 1);
    const double s = ssim(a, b);
    ASSERT_LE(std::abs(s), 1.0);
    ASSERT_NEAR(s, ssim(b, a), 1e-15);
  }
}

// On an 11x11 image there is a single window; compare to hand-computed
// Gaussian-weighted moments.
TEST(Ssim, SingleWindowMatchesFormula) {
  RngStream rng(4);
  const auto a = gct::random_tensor({11, 11}, rng, 0, 1);
  const auto b = gct::random_tensor({11, 11}, rng, 0, 1);
  double g[11], gs = 0;
  for (int i = 0; i < 11; ++i) gs += g[i] = std::exp(-(i - 5.0) * (i - 5.0) / (2 * 1.5 * 1.5));
  double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t y = 0; y < 11; ++y)
    for (std::size_t x = 0; x < 11; ++x) {
      const double w = g[y] * g[x] / (gs * gs), p = a[y * 11 + x], q = b[y * 11 + x];
      mx += w * p;
      my += w * q;
      sxx += w * p * p;
      syy += w * q * q;
      sxy += w * p * q;
    }
  EXPECT_NEAR(ssim(a, b), ssim_formula(mx, my, sxx - mx * mx, syy - my * my, sxy - mx * my), 1e-12);
}

TEST(Ssim, MultiBandAveragesAndSmallImageRejected) {
  RngStream rng(5);
  const auto a = gct::random_tensor({2, 12, 12}, rng, 0, 1);
  const auto b = gct::random_tensor({2, 12, 12}, rng, 0, 1);
  const double s0 = ssim(slice_leading(a, 0), slice_leading(b, 0));
  const double s1 = ssim(slice_leading(a, 1), slice_leading(b, 1));
  EXPECT_NEAR(ssim(a, b), (s0 + s1) / 2, 1e-15);
  EXPECT_THROW(ssim(Tensor<double>({10, 20}), Tensor<double>({10, 20})), ShapeError);
}

TEST(Confusion, Examples) {
  const auto perfect = counts(50, 0, 0, 50);
  EXPECT_EQ(perfect.accuracy(), 1.0);
  EXPECT_EQ(perfect.kappa(), 1.0);
  const auto one_class = counts(50, 0, 50, 0);
  EXPECT_NEAR(one_class.accuracy(), 0.5, 1e-9);
  EXPECT_NEAR(one_class.kappa(), 0.0, 1e-9);
  const auto mixed = counts(40, 10, 5, 45);
  EXPECT_NEAR(mixed.accuracy(), 0.85, 1e-9);
  EXPECT_NEAR(mixed.kappa(), 0.70, 1e-9);
  EXPECT_THROW(ConfusionMatrix{}.accuracy(), DataError);
}

TEST(Confusion, KappaOneIffOffDiagonalZero) {
  RngStream rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t a = 1 + rng.below(50), d = 1 + rng.below(50);
    const std::size_t b = rng.below(3), c = rng.below(3);
    const double k = counts(a, b, c, d).kappa();
    if (b == 0 && c == 0) EXPECT_EQ(k, 1.0);
    else EXPECT_LT(k, 1.0);
  }
}

TEST(Confusion, IndependentPredictionGivesZeroKappa) {
  // counts[r][c] = n * P(truth=r) * P(pred=c).
  for (auto [pt, pp] : {std::pair{0.5, 0.5}, {0.2, 0.7}, {0.9, 0.4}, {0.25, 0.1}}) {
    const double n = 10000;
    auto cell = [&](double p) { return static_cast<std::size_t>(std::llround(n * p)); };
    const auto cm = counts(cell(pt * pp), cell(pt * (1 - pp)), cell((1 - pt) * pp), cell((1 - pt) * (1 - pp)));
    EXPECT_NEAR(cm.kappa(), 0.0, 1e-9) << pt << " " << pp;
  }
}

TEST(Confusion, FromMasksAndNormalizedRows) {
  BinaryMask truth(4, 1), pred(4, 1);
  truth.bits = {1, 1, 0, 0};
  pred.bits = {1, 0, 0, 1};
  const auto cm = confusion(truth, pred);
  EXPECT_EQ(cm.counts[0][0], 1u);
  EXPECT_EQ(cm.counts[0][1], 1u);
  EXPECT_EQ(cm.counts[1][0], 1u);
  EXPECT_EQ(cm.counts[1][1], 1u);
  EXPECT_THROW(confusion(truth, BinaryMask(3, 1)), ShapeError);
  RngStream rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = counts(rng.below(1000) + 1, rng.below(1000), rng.below(1000), rng.below(1000) + 1).normalized();
    for (const auto& row : n) EXPECT_NEAR(row[0] + row[1], 1.0, 1e-9);
  }
}

TEST(EvaluateTiles, PerTileAndMeanConventions) {
  RngStream rng(8);
  std::vector<Tensor<float>> preds, truths;
  for (int j = 0; j < 5; ++j) {
    preds.push_back(gct::random_tensor<float>({1, 16, 16}, rng, 0, 1));
    truths.push_back(gct::random_tensor<float>({1, 16, 16}, rng, 0, 1));
  }
  preds.push_back(truths.back());
  truths.push_back(truths.back());
  const auto r = evaluate_tiles(preds, truths);
  ASSERT_EQ(r.tile_count(), 6u);
  double sum_rmse = 0, sum_mse = 0;
  for (std::size_t j = 0; j < 6; ++j) {
    EXPECT_EQ(r.tiles[j].rmse, std::sqrt(r.tiles[j].mse));
    sum_rmse += r.tiles[j].rmse;
    sum_mse += r.tiles[j].mse;
  }
  EXPECT_NEAR(r.mean_rmse, sum_rmse / 6, 1e-12);
  EXPECT_NEAR(r.mean_mse, sum_mse / 6, 1e-12);
  EXPECT_NEAR(r.pooled_rmse, std::sqrt(sum_mse / 6), 1e-12);
  EXPECT_EQ(r.infinite_psnr_tiles, 1u);
  EXPECT_TRUE(std::isfinite(r.mean_psnr));
  EXPECT_THROW(evaluate_tiles({}, {}), DataError);
}

TEST(Report, TableAndConfusionLayout) {
  RngStream rng(9);
  std::vector<Tensor<float>> preds, truths;
  for (int j = 0; j < 3; ++j) {
    preds.push_back(gct::random_tensor<float>({1, 12, 12}, rng, 0, 1));
    truths.push_back(gct::random_tensor<float>({1, 12, 12}, rng, 0, 1));
  }
  const std::vector<MethodEvaluation> methods{{"convlstm", evaluate_tiles(preds, truths), counts(40, 10, 5, 45)},
                                              {"persistence", evaluate_tiles(truths, truths), counts(30, 20, 0, 50)}};
  const auto text = report_text(methods);
  std::istringstream is(text);
  std::string header;
  std::getline(is, header);
  for (const char* col : {"SSIM", "PSNR", "RMSE", "MSE"}) EXPECT_NE(header.find(col), std::string::npos);
  EXPECT_NE(text.find("Normalized confusion matrix: convlstm"), std::string::npos);
  EXPECT_NE(text.find("kappa 0.700"), std::string::npos);
  EXPECT_NE(text.find("inf"), std::string::npos);

  const auto csv = confusion_csv(methods);
  std::istringstream cs(csv);
  std::string line;
  std::getline(cs, line);
  EXPECT_EQ(line, "method,truth,pred_urban,pred_non_urban,rate_urban,rate_non_urban,accuracy,kappa");
  int rows = 0;
  while (std::getline(cs, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    ASSERT_EQ(f.size(), 8u);
    EXPECT_NEAR(std::stod(f[4]) + std::stod(f[5]), 1.0, 1e-9);
    ++rows;
  }
  EXPECT_EQ(rows, 4);

  const auto rep = report_csv(methods);
  EXPECT_EQ(rep.substr(0, rep.find('\n')), "method,tile,mse,rmse,psnr,ssim");
  EXPECT_NE(rep.find("persistence,mean,0.000000,0.000000,inf,1.000000"), std::string::npos);
}
