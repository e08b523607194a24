#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bethe/disorder.hpp"
#include "bethe/stats.hpp"

using namespace bethe;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double cauchy_cdf(double x) { return 0.5 + std::atan(x) / std::numbers::pi; }

std::vector<DisorderModel> all_families() {
  return {DisorderModel::gaussian(0.0, 1.0, 1.0), DisorderModel::cauchy(0.0, 1.0, 1.0),
          DisorderModel::uniform(1.0), DisorderModel::piecewise({-1, 0, 1}, {0.2, 1.8}, 1.0),
          DisorderModel::piecewise({-2, -0.5, 0.3, 1.5}, {1.0, 0.1, 3.0}, 0.7)};
}

}  // namespace

TEST(Density, KnownValues) {
  EXPECT_DOUBLE_EQ(DisorderModel::uniform(1).density(0.0), 0.5);
  EXPECT_NEAR(DisorderModel::cauchy(0, 1, 1).density(0.0), 1.0 / std::numbers::pi, 1e-15);
  // heights {0.2, 1.8} on unit cells have mass 2, so they normalize to {0.1, 0.9}.
  const auto pw = DisorderModel::piecewise({-1, 0, 1}, {0.2, 1.8}, 1.0);
  EXPECT_NEAR(pw.density(0.5), 0.9, 1e-15);
  EXPECT_NEAR(pw.density(-0.5), 0.1, 1e-15);
  EXPECT_EQ(pw.density(1.5), 0.0);
  EXPECT_EQ(DisorderModel::uniform(1).density(-1.01), 0.0);
}

TEST(Density, IntegratesToOne) {
  // Full-line families: integrate over a wide window and add the closed-form tail mass.
  const auto g = DisorderModel::gaussian(0.3, 0.7, 1.0);
  EXPECT_NEAR(g.mass(0.3 - 12 * 0.7, 0.3 + 12 * 0.7), 1.0, 1e-9);
  const auto c = DisorderModel::cauchy(0.0, 1.0, 1.0);
  EXPECT_NEAR(c.mass(-200, 200) + 2.0 * (1.0 - cauchy_cdf(200)), 1.0, 1e-9);
  EXPECT_NEAR(DisorderModel::uniform(1).mass(-2, 2), 1.0, 1e-12);
  for (const auto& m : all_families()) {
    if (m.support().bounded) EXPECT_NEAR(m.mass(m.support().lo - 1, m.support().hi + 1), 1.0, 1e-9);
  }
}

TEST(Density, MassMatchesClosedFormCdf) {
  const auto g = DisorderModel::gaussian(0.0, 1.0, 1.0);
  const auto c = DisorderModel::cauchy(0.0, 1.0, 1.0);
  for (double a : {-3.0, -0.4, 0.0, 1.2}) {
    for (double w : {0.01, 0.5, 2.0}) {
      EXPECT_NEAR(g.mass(a, a + w), normal_cdf(a + w) - normal_cdf(a), 1e-12);
      EXPECT_NEAR(c.mass(a, a + w), cauchy_cdf(a + w) - cauchy_cdf(a), 1e-12);
    }
  }
}

TEST(Density, SupNormIsMaximum) {
  for (const auto& m : all_families()) {
    double best = 0.0;
    for (double v : stats::linspace(-5, 5, 100001)) best = std::max(best, m.density(v));
    EXPECT_NEAR(m.sup_norm(), best, 1e-9) << m.family_name();
  }
}

TEST(MinimalFunction, Examples) {
  EXPECT_NEAR(DisorderModel::uniform(1).minimal_function(0.0, {0.1, 0.5, 1.0}), 0.5, 1e-12);
  // (1/2) * (2/π) * atan(1) = 1/4
  EXPECT_NEAR(DisorderModel::cauchy(0, 1, 1).minimal_function(0.0, {1.0}), 0.25, 1e-12);
  const auto g = DisorderModel::gaussian(0, 1, 1);
  // Smallest window alone approaches the density at the peak.
  EXPECT_NEAR(g.minimal_function(0.0, {1e-4}), 1.0 / std::sqrt(2 * std::numbers::pi), 1e-8);
  // The infimum over the default grid sits at ν = 1 for a single hump centred at v.
  EXPECT_NEAR(g.minimal_function(0.0), (normal_cdf(1) - normal_cdf(-1)) / 2.0, 1e-10);
}

TEST(MinimalFunction, BoundedBySupNorm) {
  for (const auto& m : all_families()) {
    for (double v : m.default_v_grid()) EXPECT_LE(m.minimal_function(v), m.sup_norm() + 1e-12);
  }
}

TEST(MinimalFunction, RejectsBadGrid) {
  const auto m = DisorderModel::uniform(1);
  EXPECT_THROW((void)m.minimal_function(0.0, {}), DisorderError);
  EXPECT_THROW((void)m.minimal_function(0.0, {1.5}), DisorderError);
}

TEST(Regularity, DensityBelowCTimesMinimalFunction) {
  for (const auto& m : all_families()) {
    const double c = m.regularity_c();
    EXPECT_TRUE(std::isfinite(c));
    for (double v : m.default_v_grid()) {
      EXPECT_LE(m.density(v), c * m.minimal_function(v) + 1e-12) << m.family_name() << " v=" << v;
    }
  }
}

TEST(Regularity, UniformIsFlatInTheInterior) {
  const auto m = DisorderModel::uniform(1);
  EXPECT_NEAR(m.regularity_constant({0.0}), 1.0, 1e-12);
  EXPECT_LE(m.regularity_constant(stats::linspace(-0.05, 0.05, 11)), 1.03);
  // At the support edges only half of every window carries mass.
  EXPECT_NEAR(m.regularity_c(), 2.0, 1e-9);
}

TEST(Regularity, CauchySingleHumpBound) {
  // Single hump at 0 with ν0 = 1: c0 = ρ(0)/ρ(1) = 2, so c <= 2 max{1, c0/ν0} = 4.
  const auto m = DisorderModel::cauchy(0, 1, 1);
  const double c0 = m.density(0.0) / m.density(1.0);
  EXPECT_NEAR(c0, 2.0, 1e-12);
  EXPECT_LE(m.regularity_constant(stats::linspace(-50, 50, 201)), 2.0 * std::max(1.0, c0 / 1.0));
}

TEST(Regularity, GaussianFinite) {
  const auto m = DisorderModel::gaussian(0, 1, 1);
  const double c = m.regularity_constant(stats::linspace(-8, 8, 161));
  EXPECT_TRUE(std::isfinite(c));
  EXPECT_GE(c, 1.0 - 1e-9);
}

TEST(Regularity, UnboundedRatioReported) {
  // A tall narrow spike next to a wide plateau makes ρ/M̂ large at the spike.
  EXPECT_THROW(DisorderModel::piecewise({0.0, 1e-9, 1.0}, {1e9, 1e-9}, 1.0), DisorderError);
}

TEST(FractionalMoment, ClosedForms) {
  const double s = 0.5;
  EXPECT_NEAR(DisorderModel::uniform(1).fractional_moment(s), 1.0 / (1.0 + s), 1e-9);
  EXPECT_NEAR(DisorderModel::gaussian(0, 1, 1).fractional_moment(s),
              std::pow(2.0, s / 2) * std::tgamma((s + 1) / 2) / std::sqrt(std::numbers::pi), 1e-8);
  EXPECT_NEAR(DisorderModel::cauchy(0, 1, 1).fractional_moment(s), 1.0 / std::cos(std::numbers::pi * s / 2),
              1e-6);
  EXPECT_TRUE(std::isinf(DisorderModel::cauchy(0, 1, 1).fractional_moment(1.0)));
}

TEST(Construction, Validation) {
  EXPECT_THROW(DisorderModel::gaussian(0, -1, 1), DisorderError);
  EXPECT_THROW(DisorderModel::cauchy(0, 0, 1), DisorderError);
  EXPECT_THROW(DisorderModel::uniform(-0.1), DisorderError);
  EXPECT_THROW(DisorderModel::piecewise({0, 1}, {1, 2}, 1), DisorderError);
  EXPECT_THROW(DisorderModel::piecewise({1, 0}, {1}, 1), DisorderError);
  EXPECT_THROW(DisorderModel(Cauchy{}, 1.0, 1.0), DisorderError);
  EXPECT_TRUE(DisorderModel::gaussian(0, 1, 1).assumption_E());
  EXPECT_TRUE(DisorderModel::cauchy(0, 1, 1).assumption_E());
  EXPECT_FALSE(DisorderModel::uniform(1).assumption_E());
  EXPECT_DOUBLE_EQ(DisorderModel::cauchy(0, 1, 1).moment_exponent(), 0.5);
}

TEST(Sampling, UniformMoments) {
  const auto v = sample_potential(DisorderModel::uniform(1), RealizationSeed(11), 100000);
  EXPECT_NEAR(stats::mean(v), 0.0, 0.01);
  EXPECT_LE(*std::max_element(v.begin(), v.end()), 1.0);
  EXPECT_GE(*std::min_element(v.begin(), v.end()), -1.0);
}

TEST(Sampling, CauchyMedian) {
  const auto v = sample_potential(DisorderModel::cauchy(0, 1, 1), RealizationSeed(12), 100000);
  EXPECT_NEAR(stats::median(v), 0.0, 0.02);
}

TEST(Sampling, GaussianOneSigmaFraction) {
  const auto v = sample_potential(DisorderModel::gaussian(0, 1, 1), RealizationSeed(13), 100000);
  const double frac =
      static_cast<double>(std::count_if(v.begin(), v.end(), [](double x) { return std::abs(x) <= 1.0; })) /
      static_cast<double>(v.size());
  const double expected = DisorderModel::gaussian(0, 1, 1).mass(-1, 1);
  EXPECT_NEAR(expected, normal_cdf(1) - normal_cdf(-1), 1e-12);
  EXPECT_NEAR(frac, expected, 0.01);
}

TEST(Sampling, PiecewiseCellFrequencies) {
  const auto m = DisorderModel::piecewise({-1, 0, 1}, {0.2, 1.8}, 1.0);
  const auto v = sample_potential(m, RealizationSeed(14), 100000);
  const double right =
      static_cast<double>(std::count_if(v.begin(), v.end(), [](double x) { return x >= 0.0; })) / 1e5;
  EXPECT_NEAR(right, 0.9, 5 * stats::binomial_stderr(0.9, 100000));
}

TEST(Seeds, DeterministicAndDistinct) {
  const auto m = DisorderModel::gaussian(0, 1, 1);
  const RealizationSeed a(99, {1, 2}), b(99, {1, 3}), c(98, {1, 2});
  EXPECT_EQ(sample_potential(m, a, 1000), sample_potential(m, a, 1000));
  EXPECT_NE(sample_potential(m, a, 10), sample_potential(m, b, 10));
  EXPECT_NE(sample_potential(m, a, 10), sample_potential(m, c, 10));
  EXPECT_NE(a.derive(), RealizationSeed(99, {2, 1}).derive());
}

TEST(Seeds, SiblingStreamsUncorrelated) {
  // Chi-square test of independence on a 4x4 contingency table of quartiles.
  const auto m = DisorderModel::uniform(1);
  const std::size_t n = 40000;
  const auto x = sample_potential(m, RealizationSeed(5, {0}), n);
  const auto y = sample_potential(m, RealizationSeed(5, {1}), n);
  double table[4][4] = {};
  auto bin = [](double v) { return std::min(3, static_cast<int>((v + 1.0) * 2.0)); };
  for (std::size_t i = 0; i < n; ++i) table[bin(x[i])][bin(y[i])] += 1.0;
  double chi2 = 0.0;
  const double expected = static_cast<double>(n) / 16.0;
  for (auto& row : table) {
    for (double o : row) chi2 += (o - expected) * (o - expected) / expected;
  }
  // 15 degrees of freedom; 37.7 is the 0.999 quantile.
  EXPECT_LT(chi2, 37.7);
  // Lag-0 cross correlation within 5 standard errors of zero.
  double cross = 0.0;
  for (std::size_t i = 0; i < n; ++i) cross += x[i] * y[i];
  cross /= static_cast<double>(n) / 3.0;
  EXPECT_LT(std::abs(cross), 5.0 / std::sqrt(static_cast<double>(n)));
}
