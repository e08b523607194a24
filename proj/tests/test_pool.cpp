#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bethe/dos.hpp"
#include "bethe/greens.hpp"
#include "bethe/phase.hpp"
#include "bethe/pool.hpp"

using namespace bethe;

namespace {

// Root of K Γ² + ζΓ + 1 = 0 with Im Γ > 0, by the textbook quadratic formula.
cplx quadratic_root(int K, cplx zeta) {
  const cplx d = std::sqrt(zeta * zeta - 4.0 * static_cast<double>(K));
  const cplx a = (-zeta + d) / (2.0 * K), b = (-zeta - d) / (2.0 * K);
  return a.imag() > b.imag() ? a : b;
}

}  // namespace

TEST(PoolFixedPoint, NoDisorderMatchesQuadraticBranch) {
  for (int K : {2, 3}) {
    for (const ComplexEnergy z : {ComplexEnergy{-3.5, 0.1}, ComplexEnergy{-1.0, 0.01}, ComplexEnergy{0.0, 1.0},
                                  ComplexEnergy{0.7, 0.05}, ComplexEnergy{2.5, 0.2}}) {
      const GammaPool p = pool_equilibrate(DisorderModel::none(), K, z, 200, 60, RealizationSeed(1));
      for (const cplx& g : p.values) EXPECT_LT(std::abs(g - quadratic_root(K, z.zeta())), 1e-8);
    }
  }
}

TEST(PoolFixedPoint, ContractsToHalfIFromAnyStart) {
  const std::vector<cplx> warm(100, cplx{0.3, 0.1});
  const GammaPool p = pool_equilibrate(DisorderModel::none(), 2, {0.0, 1.0}, 100, 60, RealizationSeed(2), &warm);
  for (const cplx& g : p.values) EXPECT_LT(std::abs(g - cplx{0.0, 0.5}), 1e-8);
}

TEST(PoolFixedPoint, MembersStayInUpperHalfPlane) {
  const GammaPool p = pool_equilibrate(DisorderModel::cauchy(0, 1, 0.5), 2, {0.3, 1e-3}, 5000, 20, RealizationSeed(3));
  for (const cplx& g : p.values) EXPECT_GT(g.imag(), 0.0);
}

TEST(PoolFixedPoint, SameSeedSamePool) {
  const auto m = DisorderModel::gaussian(0, 1, 0.7);
  const GammaPool a = pool_equilibrate(m, 2, {0.5, 1e-2}, 1000, 10, RealizationSeed(4, {1, 2}));
  const GammaPool b = pool_equilibrate(m, 2, {0.5, 1e-2}, 1000, 10, RealizationSeed(4, {1, 2}));
  const GammaPool c = pool_equilibrate(m, 2, {0.5, 1e-2}, 1000, 10, RealizationSeed(4, {1, 3}));
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
}

TEST(PoolFixedPoint, DriftDiagnosticFlagsTooFewSweeps) {
  const GammaPool fresh = pool_equilibrate(DisorderModel::cauchy(0, 1, 0.3), 2, {0.0, 1e-4}, 5000, 3, RealizationSeed(5));
  EXPECT_EQ(fresh.diagnostics.sweep_mean_log.size(), 3u);
  const GammaPool settled = pool_equilibrate(DisorderModel::none(), 2, {0.0, 0.5}, 100, 50, RealizationSeed(5));
  EXPECT_TRUE(settled.diagnostics.equilibrated);
  EXPECT_LT(settled.diagnostics.drift, 1e-12);
}

TEST(Lyapunov, FreeClosedForm) {
  const auto p = pool_equilibrate(DisorderModel::none(), 2, {1.0, 1e-9}, 100, 60, RealizationSeed(6));
  const auto L = estimate_lyapunov(p);
  EXPECT_NEAR(L.value, std::log(std::sqrt(2.0)), 1e-6);
  EXPECT_LT(L.stderr_, 1e-12);
  const auto q = pool_equilibrate(DisorderModel::none(), 2, {3.0, 1e-9}, 100, 400, RealizationSeed(6));
  // Γ₀(3 + i0) = -1/2 exactly on the real branch.
  EXPECT_NEAR(estimate_lyapunov(q).value, std::log(2.0), 1e-3);
}

TEST(Lyapunov, CauchyIdentityWithinThreeSigma) {
  // Averaging the Cauchy potential shifts ζ to ζ + iλ for every pool member.
  const double lambda = 0.3, E = 1.0;
  const auto lb = lyapunov_boundary(DisorderModel::cauchy(0, 1, lambda), 2, E, {1e-2, 1e-3}, {50000, 40},
                                    RealizationSeed(7));
  const double exact = -std::log(std::abs(quadratic_root(2, cplx{E, lambda})));
  EXPECT_LE(lb.L.stderr_, 5e-3);
  EXPECT_NEAR(lb.L.value, exact, 3.0 * lb.L.stderr_ + 1e-3);
}

TEST(Lyapunov, EtaLadderValidation) {
  EXPECT_THROW(lyapunov_boundary(DisorderModel::cauchy(0, 1, 0.3), 2, 0.0, {}, {100, 2}, RealizationSeed(1)),
               std::invalid_argument);
}

TEST(PercentileXi, DegenerateSampleReturnsTheAtom) {
  EXPECT_EQ(percentile_xi(std::vector<double>(50, 0.25), 0.3), 0.25);
}

TEST(PercentileXi, UpperQuantileConvention) {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  // ⌈αN⌉-th largest.
  EXPECT_EQ(percentile_xi(v, 0.1), 91.0);
  EXPECT_EQ(percentile_xi(v, 0.01), 100.0);
  EXPECT_EQ(percentile_xi(v, 0.999), 1.0);
  EXPECT_THROW(percentile_xi(v, 0.0), std::invalid_argument);
  EXPECT_THROW(percentile_xi({}, 0.5), std::invalid_argument);
}

TEST(PercentileXi, MonotoneAndBoundedOnRandomPools) {
  const auto m = DisorderModel::cauchy(0, 1, 0.5);
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const double eta = 0.05;
    const auto p = pool_equilibrate(m, 2, {-1.0 + 0.002 * static_cast<double>(t), eta}, 200, 3, RealizationSeed(8, {t}));
    const auto im = imag_parts(p);
    const double a = percentile_xi(im, 0.1), b = percentile_xi(im, 0.5);
    ASSERT_GE(a, b);
    ASSERT_GT(b, 0.0);
    ASSERT_LE(a, 1.0 / eta);
  }
}

TEST(Chains, ChainFromPartsMatchesFiniteTree) {
  // A K = 2 ball of depth 6: walk the leftmost path and read off the side
  // subtrees; the chain's partial products must equal G(0, x_m).
  const Tree t({2, 6, false});
  const auto r = make_realization(t, DisorderModel::cauchy(0, 1, 0.8), RealizationSeed(9));
  const ComplexEnergy z{0.4, 0.03};
  const TreeGreens g(t, r, z.zeta());
  std::vector<std::size_t> path{0};
  while (t.child_count(path.back()) > 0) path.push_back(t.child_begin(path.back()));
  std::vector<double> pot;
  std::vector<cplx> side;
  for (std::size_t j = 0; j + 1 < path.size(); ++j) {
    pot.push_back(r.potential[path[j]]);
    cplx acc{};
    for (std::size_t c = 0; c < t.child_count(path[j]); ++c) {
      const std::size_t u = t.child_begin(path[j]) + c;
      if (u != path[j + 1]) acc += g.gamma(u);
    }
    side.push_back(acc);
  }
  const auto chain = chain_from_parts(pot, side, g.gamma(path.back()), z.zeta());
  ASSERT_EQ(chain.size(), path.size());
  cplx prod{1.0, 0.0};
  for (std::size_t m = 0; m < path.size(); ++m) {
    EXPECT_LT(std::abs(chain[m] - g.gamma(path[m])), 1e-12 * std::abs(g.gamma(path[m])));
    prod *= (m == 0 ? 1.0 : -1.0) * chain[m];
    EXPECT_LT(std::abs(prod - path_green(t, r, z, path[m])), 1e-12 * std::abs(prod));
  }
}

TEST(Chains, NoDisorderChainIsConstant) {
  const auto p = pool_equilibrate(DisorderModel::none(), 2, {0.5, 0.1}, 100, 60, RealizationSeed(10));
  const auto chain = sample_gamma_chain(p, 30, RealizationSeed(11));
  for (const cplx& g : chain) EXPECT_LT(std::abs(g - quadratic_root(2, cplx{0.5, 0.1})), 1e-9);
}

TEST(Chains, LawOfLargeNumbersForLogProducts) {
  const auto m = DisorderModel::cauchy(0, 1, 0.3);
  const auto p = pool_equilibrate(m, 2, {0.0, 1e-3}, 20000, 40, RealizationSeed(12));
  const auto L = estimate_lyapunov(p);
  Engine rng = RealizationSeed(13).engine();
  std::vector<double> rates;
  for (int c = 0; c < 400; ++c) {
    const auto chain = sample_gamma_chain(p, 200, rng);
    rates.push_back(-cumulative_log_abs(chain).back() / 200.0);
  }
  const double se = stats::stderr_of_mean(rates);
  EXPECT_NEAR(stats::mean(rates), L.value, 3.0 * std::hypot(se, L.stderr_) + 2e-3);
}

TEST(Dos, FreeTreeClosedForms) {
  const auto rows = estimate_dos(DisorderModel::none(), 2, {0.0, 3.0}, {1e-4, 1e-5}, {{2000, 30}, 0, 1},
                                 RealizationSeed(14));
  ASSERT_EQ(rows.size(), 2u);
  // Rooted: √(4K - E²)/(2πK). Full: Im of 1/(-ζ - (K+1)Γ₀)/π.
  const double rooted = std::sqrt(8.0) / (4.0 * std::numbers::pi);
  const cplx g = quadratic_root(2, cplx{0.0, 1e-5});
  const double full = (1.0 / (-cplx{0.0, 1e-5} - 3.0 * g)).imag() / std::numbers::pi;
  EXPECT_NEAR(rows[0].rooted.value, rooted, 1e-3);
  EXPECT_NEAR(rows[0].rooted.value, 0.22508, 1e-3);
  EXPECT_NEAR(rows[0].full.value, full, 1e-6);
  EXPECT_NEAR(rows[0].full.value, 0.15005, 1e-3);
  EXPECT_LT(rows[1].rooted.value, 1e-4);
  EXPECT_LT(rows[1].full.value, 1e-4);
  EXPECT_NEAR(free_rooted_density(2, 0.0), rooted, 1e-15);
  EXPECT_EQ(free_rooted_density(2, 3.0), 0.0);
}

TEST(Dos, EtaSequenceValidation) {
  const auto m = DisorderModel::cauchy(0, 1, 0.3);
  EXPECT_THROW(estimate_dos(m, 2, {0.0}, {1e-3, 1e-2}, {}, RealizationSeed(1)), std::invalid_argument);
  EXPECT_THROW(estimate_dos(m, 2, {0.0}, {1e-3, 1e-7}, {}, RealizationSeed(1)), std::invalid_argument);
  EXPECT_THROW(estimate_dos(m, 2, {0.0}, {}, {}, RealizationSeed(1)), std::invalid_argument);
}

TEST(Dos, CauchyRootedDensityMatchesShiftedFreeGreen) {
  // On the rooted tree G(0,0) = Γ(0), whose Cauchy average is Γ₀(ζ + iλ).
  const double lambda = 0.5;
  const auto rows = estimate_dos(DisorderModel::cauchy(0, 1, lambda), 2, {0.5}, {1e-2, 1e-3}, {{20000, 30}, 0, 1},
                                 RealizationSeed(15));
  const double exact = quadratic_root(2, cplx{0.5, lambda}).imag() / std::numbers::pi;
  EXPECT_NEAR(rows[0].rooted.value, exact, 4.0 * rows[0].rooted.stderr_ + 2e-3);
}

TEST(Dos, WorkerCountDoesNotChangeResults) {
  const auto m = DisorderModel::gaussian(0, 1, 0.5);
  const auto a = estimate_dos(m, 2, {-1.0, 0.0, 1.0}, {1e-2, 1e-3}, {{500, 5}, 0, 1}, RealizationSeed(16));
  const auto b = estimate_dos(m, 2, {-1.0, 0.0, 1.0}, {1e-2, 1e-3}, {{500, 5}, 0, 3}, RealizationSeed(16));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].rooted.value, b[i].rooted.value);
    EXPECT_EQ(a[i].full.value, b[i].full.value);
  }
}
