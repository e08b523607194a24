#pragma once

// Exact finite-tree identities checked over many random realizations:
// recursion against the dense solve, the Ward sum rule, factorization through
// a removed vertex, and the two routes to the Krein coefficient.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bethe/disorder.hpp"
#include "bethe/greens.hpp"
#include "bethe/tree.hpp"

namespace bethe {

struct IdentityReport {
  std::size_t realizations = 0;
  /// max |recursion - dense| / |dense| over G(0,0) and every G(0,x).
  double oracle = 0.0;
  /// max η² |Σ_x |G(0,x)|² - Im G(0,0)/η|.
  double sum_rule = 0.0;
  /// max relative gap in G(0,x) = -G^{T_x}(0,x_-) G(x,x).
  double factorization = 0.0;
  double krein = 0.0;

  static constexpr double kOracleTol = 1e-10;
  static constexpr double kSumRuleTol = 1e-9;
  static constexpr double kFactorTol = 1e-10;
  static constexpr double kKreinTol = 1e-9;

  [[nodiscard]] bool pass() const {
    return oracle <= kOracleTol && sum_rule <= kSumRuleTol && factorization <= kFactorTol && krein <= kKreinTol;
  }
};

/// Realization i uses K = 2 + i mod 2, R = 2 + i mod (max_R - 1), models[i mod
/// |models|], and a full tree for every fifth i.
inline IdentityReport greens_identities(const std::vector<DisorderModel>& models, std::size_t realizations, int max_R,
                                        const RealizationSeed& seed) {
  if (models.empty()) throw std::invalid_argument("identity suite needs at least one model");
  if (max_R < 2 || max_R > 8) throw std::invalid_argument("identity suite: max radius must lie in [2, 8]");
  auto rel = [](cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
  IdentityReport rep;
  rep.realizations = realizations;
  for (std::size_t i = 0; i < realizations; ++i) {
    const int K = 2 + static_cast<int>(i % 2);
    const int R = 2 + static_cast<int>(i % static_cast<std::size_t>(max_R - 1));
    const Tree tree({K, R, i % 5 == 0});
    const auto r = make_realization(tree, models[i % models.size()], seed.child(i));
    const ComplexEnergy z{-1.5 + 0.03 * static_cast<double>((37 * i) % 100), 0.02 + 0.04 * static_cast<double>(i % 3)};
    const TreeGreens g(tree, r, z.zeta());

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t x = 0; x < tree.size(); ++x) pairs.emplace_back(x, 0);
    const auto dense = dense_green_oracle(tree, r, z, pairs);
    rep.oracle = std::max(rep.oracle, rel(truncated_gamma(tree, r, z), dense.at(0, 0)));
    double sum = 0.0;
    for (std::size_t x = 0; x < tree.size(); ++x) {
      const cplx g0x = g.root_to(x);
      rep.oracle = std::max(rep.oracle, rel(g0x, dense.at(x, 0)));
      sum += std::norm(g0x);
      if (x > 0) rep.factorization = std::max(rep.factorization, rel(-g.root_to_parent_without(x) * g.diagonal(x), g0x));
    }
    rep.sum_rule = std::max(rep.sum_rule, z.eta * z.eta * std::abs(sum - g.gamma(0).imag() / z.eta));
    if (tree.size() > 2) {
      const std::size_t x = tree.level_begin(1);
      rep.krein = std::max(rep.krein, krein_offdiag(tree, r, z, x, x + 1).relative_gap);
    }
  }
  return rep;
}

}  // namespace bethe
