#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "pgff/sgfilter.hpp"

using namespace pgff;
using namespace pgff::sgfilter;

TEST(SavGol, FivePointQuadraticCoefficients) {
  const SavGolFilter f = design_savgol(2, 5);
  const double expect[] = {-3.0, 12.0, 17.0, 12.0, -3.0};
  ASSERT_EQ(f.coeffs.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(f.coeffs[static_cast<std::size_t>(i)], expect[i] / 35.0, 1e-14);
  // Cubic fit shares the smoothing row with the quadratic one.
  const SavGolFilter c = design_savgol(3, 5);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(c.coeffs[static_cast<std::size_t>(i)], expect[i] / 35.0, 1e-14);
}

TEST(SavGol, SymmetricAndUnitSum) {
  for (int window : {7, 31, 141}) {
    const SavGolFilter f = design_savgol(3, window);
    EXPECT_NEAR(std::accumulate(f.coeffs.begin(), f.coeffs.end(), 0.0), 1.0, 1e-12);
    for (int i = 0; i < window; ++i)
      EXPECT_EQ(f.coeffs[static_cast<std::size_t>(i)], f.coeffs[static_cast<std::size_t>(window - 1 - i)]);
  }
}

TEST(SavGol, ReproducesCubicsAwayFromEdges) {
  const SavGolFilter f = design_savgol(3, 141);
  Sequence x(600);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double t = static_cast<double>(k) / 600.0;
    x[k] = 0.3 - 1.2 * t + 2.0 * t * t - 0.7 * t * t * t;
  }
  const Sequence y = apply_centered(f, x);
  for (std::size_t k = 70; k < x.size() - 70; ++k) EXPECT_NEAR(y[k], x[k], 1e-10);
}

TEST(SavGol, ConstantsPreservedIncludingEdges) {
  const SavGolFilter f = design_savgol(3, 31, 2);
  const Sequence y = apply_centered(f, Sequence(100, -2.5));
  for (double v : y) EXPECT_NEAR(v, -2.5, 1e-12);
}

TEST(SavGol, PassesComposeAndPreserveLength) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  Sequence x(300);
  for (double& v : x) v = n(rng);
  const SavGolFilter once = design_savgol(3, 21, 1);
  const SavGolFilter twice = design_savgol(3, 21, 2);
  const Sequence a = apply_centered(twice, x);
  const Sequence b = apply_centered(once, apply_centered(once, x));
  ASSERT_EQ(a.size(), x.size());
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-14);
}

TEST(SavGol, AttenuatesWhiteNoise) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n;
  Sequence x(4000);
  for (double& v : x) v = n(rng);
  const Sequence y = apply_centered(design_savgol(3, 141), x);
  double sx = 0.0, sy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx += x[k] * x[k];
    sy += y[k] * y[k];
  }
  EXPECT_LT(sy, 0.05 * sx);
}

TEST(SavGol, ArgumentChecks) {
  EXPECT_THROW(design_savgol(3, 140), ConfigError);
  EXPECT_THROW(design_savgol(5, 5), ConfigError);
  EXPECT_THROW(design_savgol(3, 5, 0), ConfigError);
  EXPECT_THROW(apply_centered(design_savgol(3, 31), Sequence(10, 0.0)), ConfigError);
}
