#pragma once

// Conditional single-site and two-site tail bounds for Green functions on a
// finite ball, checked by resampling the potential at the chosen sites.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bethe/disorder.hpp"
#include "bethe/greens.hpp"
#include "bethe/tree.hpp"

namespace bethe {

struct BoundCheck {
  std::string name;
  double param = 0.0;
  double bound = 0.0;
  double empirical = 0.0;
  double stderr_ = 0.0;
  bool pass = true;
};

struct WeakL1Report {
  std::vector<BoundCheck> checks;
  /// |A_xy| from the 2x2 inverse against the Krein ratio.
  double krein_gap = 0.0;
  [[nodiscard]] bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.pass; });
  }
};

struct WeakL1Params {
  std::vector<double> t_grid = {2.0, 5.0, 10.0, 20.0, 50.0};
  double s = 0.5;
  /// Extra fixed self-energies tested alongside σ_x.
  std::vector<cplx> extra_sigma = {cplx{0.0, 0.0}, cplx{0.0, 0.5}, cplx{1.0, 0.1}};
};

namespace detail {

inline BoundCheck tail_check(std::string name, double t, double bound, const std::vector<double>& abs_g) {
  std::size_t hits = 0;
  for (double g : abs_g) hits += g > t;
  BoundCheck c{std::move(name), t, bound, 0.0, 0.0, true};
  c.empirical = static_cast<double>(hits) / static_cast<double>(abs_g.size());
  c.stderr_ = stats::binomial_stderr(c.empirical, abs_g.size());
  c.pass = c.empirical <= c.bound + 5.0 * c.stderr_;
  return c;
}

inline void single_site(WeakL1Report& rep, const DisorderModel& model, cplx sigma, const std::string& label,
                        const WeakL1Params& p, std::size_t trials, const RealizationSeed& seed) {
  const double rho = model.sup_norm(), lambda = model.lambda();
  const auto v = sample_potential(model, seed, trials);
  std::vector<double> g(trials), gs(trials);
  for (std::size_t i = 0; i < trials; ++i) {
    g[i] = std::abs(1.0 / (lambda * v[i] - sigma));
    gs[i] = std::pow(g[i], p.s);
  }
  for (double t : p.t_grid) rep.checks.push_back(tail_check("single-site tail " + label, t, 2.0 * rho / (lambda * t), g));
  BoundCheck m{"fractional moment " + label, p.s,
               std::pow(2.0, p.s) * std::pow(rho, p.s) / ((1.0 - p.s) * std::pow(lambda, p.s)), stats::mean(gs),
               stats::stderr_of_mean(gs), true};
  m.pass = m.empirical <= m.bound + 5.0 * m.stderr_;
  rep.checks.push_back(m);
}

/// A = (G restricted to {x,y} at V(x) = V(y) = 0)^{-1}; then
/// G_{xy-block}(V) = (diag(λV(x), λV(y)) + A)^{-1}.
inline void two_site(WeakL1Report& rep, const DisorderModel& model, const Tree& tree, FiniteTreeRealization r,
                     cplx zeta, std::size_t x, std::size_t y, const std::vector<char>& removed,
                     const std::string& label, const WeakL1Params& p, std::size_t trials,
                     const RealizationSeed& seed) {
  r.potential[x] = 0.0;
  r.potential[y] = 0.0;
  const TreeGreens tg(tree, r, zeta, removed);
  Eigen::Matrix2cd G;
  G << tg.green(x, x), tg.green(x, y), tg.green(y, x), tg.green(y, y);
  const Eigen::Matrix2cd A = G.inverse();
  const double rho = model.sup_norm(), lambda = model.lambda();
  const double a = std::sqrt(std::abs(A(0, 1) * A(1, 0)));
  Engine rng = seed.engine();
  auto draw = model.sampler();
  std::vector<double> gx(trials), gy(trials);
  for (std::size_t i = 0; i < trials; ++i) {
    Eigen::Matrix2cd M = A;
    M(0, 0) += lambda * draw(rng);
    M(1, 1) += lambda * draw(rng);
    const Eigen::Matrix2cd Gi = M.inverse();
    gx[i] = std::abs(Gi(0, 0));
    gy[i] = std::abs(Gi(1, 1));
  }
  for (double t : p.t_grid) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < trials; ++i) hits += gx[i] > t && gy[i] > t;
    BoundCheck c{"two-site tail " + label, t,
                 2.0 * rho / (lambda * lambda * t) * std::min(4.0 * rho * (a + 1.0 / t), 1.0), 0.0, 0.0, true};
    c.empirical = static_cast<double>(hits) / static_cast<double>(trials);
    c.stderr_ = stats::binomial_stderr(c.empirical, trials);
    c.pass = c.empirical <= c.bound + 5.0 * c.stderr_;
    rep.checks.push_back(c);
  }
  const KreinResult kr = krein_offdiag(tree, r, ComplexEnergy{zeta.real(), zeta.imag()}, x, y, removed);
  if (!kr.adjacent) rep.krein_gap = std::max(rep.krein_gap, std::abs(std::abs(kr.from_ratio) - std::abs(A(0, 1))));
}

}  // namespace detail

/// Single-site tails and fractional moment at a mid-depth site with the rest
/// of the ball frozen, at σ_x and at a few fixed self-energies; two-site joint
/// tails for a pair at distance two and for the same pair separated by a
/// removed vertex.
inline WeakL1Report weak_l1_suite(const DisorderModel& model, TreeGeometry geometry, ComplexEnergy z,
                                  std::size_t trials, const RealizationSeed& seed, const WeakL1Params& p = {}) {
  if (model.is_deterministic()) throw std::invalid_argument("weak-L1 suite needs lambda > 0");
  if (geometry.depth < 3) throw std::invalid_argument("weak-L1 suite needs depth >= 3");
  const Tree tree(geometry);
  const FiniteTreeRealization r = make_realization(tree, model, seed.child(0));
  const TreeGreens tg(tree, r, z.zeta());
  const std::size_t x = tree.level_begin(1);
  WeakL1Report rep;
  detail::single_site(rep, model, tg.self_energy(x), "sigma_x", p, trials, seed.child(1));
  for (std::size_t i = 0; i < p.extra_sigma.size(); ++i) {
    detail::single_site(rep, model, p.extra_sigma[i], "fixed " + std::to_string(i), p, trials, seed.child({2, i}));
  }
  // x and its sibling y share the root.
  const std::size_t y = x + 1;
  detail::two_site(rep, model, tree, r, z.zeta(), x, y, {}, "connected", p, trials, seed.child(3));
  std::vector<char> removed(tree.size(), 0);
  removed[0] = 1;
  detail::two_site(rep, model, tree, r, z.zeta(), x, y, removed, "separated", p, trials, seed.child(4));
  return rep;
}

}  // namespace bethe
