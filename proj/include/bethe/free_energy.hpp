#pragma once

// Fractional-moment growth rates of |G(0,x)| along pool-fed chains, their
// Legendre transform, and the concavity margins used by the tilted checks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bethe/parallel.hpp"
#include "bethe/pool.hpp"
#include "bethe/stats.hpp"

namespace bethe {

/// Cumulative log|∏_{j<=m} Γ_j| recorded at a fixed set of depths, one row per chain.
struct ChainSet {
  std::size_t depth = 0;
  std::vector<std::size_t> marks;
  std::size_t chains = 0;
  std::vector<double> logs;

  [[nodiscard]] double at(std::size_t chain, std::size_t mark) const { return logs[chain * marks.size() + mark]; }
};

inline constexpr std::size_t kChainBlock = 64;

/// Chains are generated in blocks of 64 with one stream per block, so the
/// result does not depend on the worker count.
inline ChainSet sample_chain_logs(const GammaPool& pool, std::size_t depth, std::size_t chains,
                                  std::vector<std::size_t> marks, const RealizationSeed& seed,
                                  std::size_t workers = 1) {
  for (std::size_t m : marks) {
    if (m > depth) throw std::invalid_argument("chain mark beyond chain depth");
  }
  ChainSet out;
  out.depth = depth;
  out.marks = std::move(marks);
  out.chains = chains;
  const std::size_t w = out.marks.size();
  const std::size_t blocks = (chains + kChainBlock - 1) / kChainBlock;
  auto rows = parallel_map(blocks, workers, [&](std::size_t b) {
    Engine rng = seed.child(b).engine();
    const std::size_t lo = b * kChainBlock, hi = std::min(chains, lo + kChainBlock);
    std::vector<double> block;
    block.reserve((hi - lo) * w);
    for (std::size_t c = lo; c < hi; ++c) {
      const auto cum = cumulative_log_abs(sample_gamma_chain(pool, depth, rng));
      for (std::size_t m : out.marks) block.push_back(cum[m]);
    }
    return block;
  });
  out.logs.reserve(chains * w);
  for (auto& r : rows) out.logs.insert(out.logs.end(), r.begin(), r.end());
  return out;
}

/// Evenly spaced depths covering [n/2, n].
inline std::vector<std::size_t> window_marks(std::size_t n, std::size_t points) {
  points = std::max<std::size_t>(points, 2);
  std::vector<std::size_t> out;
  const std::size_t lo = n / 2;
  for (std::size_t i = 0; i < points; ++i) {
    const auto m = lo + static_cast<std::size_t>(std::llround(static_cast<double>(i) * static_cast<double>(n - lo) /
                                                              static_cast<double>(points - 1)));
    if (out.empty() || m != out.back()) out.push_back(m);
  }
  return out;
}

struct FreeEnergyParams {
  std::vector<double> s_grid = {-0.05, 0.0,  0.05, 0.1,  0.15, 0.2, 0.25, 0.3,  0.35, 0.4,  0.45, 0.5,
                                0.55,  0.6,  0.65, 0.7,  0.75, 0.8, 0.85, 0.9,  0.95};
  std::size_t depth = 100;
  std::size_t chains = 10000;
  std::size_t window_points = 9;
  std::size_t bootstrap = 200;
  std::size_t mom_blocks = 10;
  double mom_threshold = 0.7;
  std::size_t workers = 1;
};

inline constexpr double kMaxTilt = 0.95;

struct FreeEnergyPoint {
  double s = 0.0;
  double phi = 0.0;
  double stderr_ = 0.0;
  bool heavy_tail = false;
};

struct FreeEnergyCurve {
  int K = 2;
  ComplexEnergy energy;
  std::size_t depth = 0;
  std::size_t chains = 0;
  std::vector<FreeEnergyPoint> points;
  /// Bootstrap slopes, one row per s (empty rows for s = 0).
  std::vector<std::vector<double>> replicates;
  /// L̂ from the pool that fed the chains.
  stats::Estimate lyapunov;
  bool pool_equilibrated = true;

  [[nodiscard]] std::size_t index_of(double s) const {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (std::abs(points[i].s - s) < 1e-12) return i;
    }
    throw std::out_of_range("s not on the free-energy grid");
  }

  [[nodiscard]] bool flagged() const {
    return std::any_of(points.begin(), points.end(), [](const FreeEnergyPoint& p) { return p.heavy_tail; });
  }
};

namespace detail {

/// log of the (median-of-means when mom_blocks > 1) mean of exp(x) over the
/// values selected by idx; x already max-shifted.
inline double log_block_mean(std::span<const double> shifted_exp, std::span<const std::size_t> idx,
                             std::size_t mom_blocks) {
  const std::size_t n = idx.size();
  if (mom_blocks <= 1) {
    double acc = 0.0;
    for (std::size_t c : idx) acc += shifted_exp[c];
    return std::log(acc / static_cast<double>(n));
  }
  std::vector<double> means(mom_blocks, 0.0);
  std::vector<std::size_t> counts(mom_blocks, 0);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const std::size_t b = pos * mom_blocks / n;
    means[b] += shifted_exp[idx[pos]];
    ++counts[b];
  }
  for (std::size_t b = 0; b < mom_blocks; ++b) means[b] /= static_cast<double>(std::max<std::size_t>(counts[b], 1));
  return std::log(stats::median(means));
}

inline double ols_slope(std::span<const double> x, std::span<const double> y) { return stats::linear_fit(x, y).slope; }

}  // namespace detail

/// φ̂(s) from an existing chain set: OLS slope of log Ê[∏|Γ|^s] against depth
/// over the marks, with a chain-level bootstrap for the standard error.
inline FreeEnergyCurve free_energy_from_chains(const ChainSet& set, const std::vector<double>& s_grid,
                                               const FreeEnergyParams& params, const RealizationSeed& seed) {
  const std::size_t C = set.chains, W = set.marks.size(), S = s_grid.size();
  if (C < 2 || W < 2) throw std::invalid_argument("free energy needs at least two chains and two depths");
  std::vector<double> xs(set.marks.begin(), set.marks.end());

  // exp(s·L - max) per (s, mark), one contiguous column of C chains each.
  std::vector<double> shifted(C * S * W);
  std::vector<double> shift(S * W);
  for (std::size_t si = 0; si < S; ++si) {
    for (std::size_t w = 0; w < W; ++w) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, s_grid[si] * set.at(c, w));
      shift[si * W + w] = mx;
      for (std::size_t c = 0; c < C; ++c) shifted[(si * W + w) * C + c] = std::exp(s_grid[si] * set.at(c, w) - mx);
    }
  }
  auto column = [&](std::size_t si, std::size_t w) {
    return std::span<const double>(shifted).subspan((si * W + w) * C, C);
  };
  auto blocks_for = [&](double s) { return s >= params.mom_threshold ? params.mom_blocks : std::size_t{1}; };

  FreeEnergyCurve curve;
  curve.depth = set.depth;
  curve.chains = C;
  curve.points.resize(S);
  curve.replicates.assign(S, {});

  std::vector<std::size_t> identity(C);
  for (std::size_t c = 0; c < C; ++c) identity[c] = c;

  for (std::size_t si = 0; si < S; ++si) {
    auto& pt = curve.points[si];
    pt.s = s_grid[si];
    if (pt.s == 0.0) continue;
    std::vector<double> ys(W);
    for (std::size_t w = 0; w < W; ++w) {
      ys[w] = detail::log_block_mean(column(si, w), identity, blocks_for(pt.s)) + shift[si * W + w];
    }
    pt.phi = detail::ols_slope(xs, ys);
    // Heavy-tail flag at the deepest mark.
    const auto last_col = column(si, W - 1);
    std::vector<double> last(last_col.begin(), last_col.end());
    std::sort(last.begin(), last.end(), std::greater<>());
    const std::size_t top = std::max<std::size_t>(1, C / 100);
    double head = 0.0, total = 0.0;
    for (std::size_t c = 0; c < C; ++c) (c < top ? head : total) += last[c];
    total += head;
    pt.heavy_tail = head > 0.5 * total;
  }

  // Bootstrap: one index resample per replicate shared by every s.
  std::vector<std::size_t> idx(C);
  std::vector<double> ys(W);
  for (std::size_t r = 0; r < params.bootstrap; ++r) {
    Engine rng = seed.child({0xB007ULL, r}).engine();
    for (std::size_t& i : idx) i = uniform_index(rng, C);
    for (std::size_t si = 0; si < S; ++si) {
      if (s_grid[si] == 0.0) continue;
      for (std::size_t w = 0; w < W; ++w) {
        ys[w] = detail::log_block_mean(column(si, w), idx, blocks_for(s_grid[si])) + shift[si * W + w];
      }
      curve.replicates[si].push_back(detail::ols_slope(xs, ys));
    }
  }
  for (std::size_t si = 0; si < S; ++si) {
    if (!curve.replicates[si].empty()) curve.points[si].stderr_ = std::sqrt(stats::variance(curve.replicates[si]));
  }
  return curve;
}

inline void validate_s_grid(const std::vector<double>& s_grid) {
  if (s_grid.size() < 2) throw std::invalid_argument("s grid needs at least two points");
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    if (!(s_grid[i] <= kMaxTilt)) throw std::invalid_argument("s grid exceeds the 0.95 cap");
    if (!(s_grid[i] > -1.0)) throw std::invalid_argument("s grid below -1");
    if (i > 0 && !(s_grid[i] > s_grid[i - 1])) throw std::invalid_argument("s grid must be strictly increasing");
  }
}

/// Equilibrates a pool at ζ, samples chains of length n and fits φ̂ on the grid.
inline FreeEnergyCurve estimate_free_energy(const DisorderModel& model, int K, ComplexEnergy energy,
                                            const FreeEnergyParams& params, const PoolParams& pool_params,
                                            const RealizationSeed& seed) {
  validate_s_grid(params.s_grid);
  if (params.depth < 16) throw std::invalid_argument("free energy needs chain depth >= 16");
  if (params.chains < 1000) throw std::invalid_argument("free energy needs at least 1000 chains");
  const GammaPool pool = pool_equilibrate(model, K, energy, pool_params, seed.child(0));
  const ChainSet set = sample_chain_logs(pool, params.depth, params.chains,
                                         window_marks(params.depth, params.window_points), seed.child(1),
                                         params.workers);
  FreeEnergyCurve curve = free_energy_from_chains(set, params.s_grid, params, seed.child(2));
  curve.K = K;
  curve.energy = energy;
  curve.lyapunov = estimate_lyapunov(pool);
  curve.pool_equilibrated = pool.diagnostics.equilibrated;
  return curve;
}

/// (φ(h) - φ(-h))/2h with a bootstrap standard error; needs ±h on the grid.
inline stats::Estimate slope_at_zero(const FreeEnergyCurve& c, double h = 0.05) {
  const std::size_t a = c.index_of(-h), b = c.index_of(h);
  stats::Estimate out;
  out.value = (c.points[b].phi - c.points[a].phi) / (2.0 * h);
  const auto& ra = c.replicates[a];
  const auto& rb = c.replicates[b];
  std::vector<double> d(std::min(ra.size(), rb.size()));
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (rb[i] - ra[i]) / (2.0 * h);
  out.stderr_ = std::sqrt(stats::variance(d));
  return out;
}

/// φ(1) from the last three grid points: the OLS line evaluated at s = 1.
/// The spread is the largest deviation of the pairwise extrapolations from it
/// plus the standard error of the last point.
struct Phi1 {
  double value = 0.0;
  double spread = 0.0;
};

inline Phi1 phi1_extrapolated(const FreeEnergyCurve& c) {
  if (c.points.size() < 3) throw std::invalid_argument("phi1 extrapolation needs three grid points");
  const auto& p = c.points;
  const std::size_t n = p.size();
  const double xs[3] = {p[n - 3].s, p[n - 2].s, p[n - 1].s};
  const double ys[3] = {p[n - 3].phi, p[n - 2].phi, p[n - 1].phi};
  const auto fit = stats::linear_fit(xs, ys);
  Phi1 out;
  out.value = fit.intercept + fit.slope;
  double dev = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      const double e = ys[j] + (ys[j] - ys[i]) / (xs[j] - xs[i]) * (1.0 - xs[j]);
      dev = std::max(dev, std::abs(e - out.value));
    }
  }
  out.spread = dev + p[n - 1].stderr_;
  return out;
}

struct RatePoint {
  double gamma = 0.0;
  double I = 0.0;
  double s_min = 0.0;
};

struct RateFunction {
  std::vector<RatePoint> points;
  double s_lo = 0.0, s_hi = 0.0;
};

/// I(γ) = -min over the grid of φ(s) + sγ. The minimum of a linear function of
/// s on each segment of the piecewise-linear interpolant sits at a node, so
/// the node minimum is exact.
inline double legendre_value(const std::vector<double>& s, const std::vector<double>& phi, double gamma,
                             double* argmin = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double v = phi[i] + s[i] * gamma;
    if (v < best) {
      best = v;
      if (argmin) *argmin = s[i];
    }
  }
  return -best;
}

inline RateFunction legendre_rate(const FreeEnergyCurve& c, std::size_t gamma_points = 201) {
  if (c.points.size() < 8) throw std::invalid_argument("legendre_rate needs at least 8 grid points");
  std::vector<double> s, phi;
  for (const auto& p : c.points) {
    s.push_back(p.s);
    phi.push_back(p.phi);
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double g = -(phi[i] - phi[i - 1]) / (s[i] - s[i - 1]);
    lo = std::min(lo, g);
    hi = std::max(hi, g);
  }
  const double pad = std::max(0.05, 0.25 * (hi - lo));
  RateFunction out;
  out.s_lo = s.front();
  out.s_hi = s.back();
  for (double g : stats::linspace(lo - pad, hi + pad, gamma_points)) {
    RatePoint rp;
    rp.gamma = g;
    rp.I = legendre_value(s, phi, g, &rp.s_min);
    out.points.push_back(rp);
  }
  return out;
}

/// I(γ) at one γ with a standard error from the minimizing node.
inline stats::Estimate rate_at(const FreeEnergyCurve& c, const stats::Estimate& gamma) {
  std::vector<double> s, phi;
  for (const auto& p : c.points) {
    s.push_back(p.s);
    phi.push_back(p.phi);
  }
  double smin = 0.0;
  stats::Estimate out;
  out.value = legendre_value(s, phi, gamma.value, &smin);
  const auto& p = c.points[c.index_of(smin)];
  out.stderr_ = std::hypot(p.stderr_, smin * gamma.stderr_);
  return out;
}

/// -min over γ of [I(γ) + sγ] on the rate grid; recovers φ(s) on the convex hull.
inline double legendre_inverse(const RateFunction& r, double s) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : r.points) best = std::min(best, p.I + s * p.gamma);
  return -best;
}

/// Concavity margins at grid point i with φ' by central difference:
/// κ± = sup over nodes s+Δ on the ± side of [φ(s) + φ'(s)Δ + ε|Δ| - φ(s+Δ)],
/// κ = min(κ+, κ-).
struct KappaMargins {
  double kappa_plus = 0.0;
  double kappa_minus = 0.0;
  double gamma = 0.0;
  [[nodiscard]] double kappa() const { return std::min(kappa_plus, kappa_minus); }
};

inline KappaMargins kappa_margins(const FreeEnergyCurve& c, std::size_t i, double eps) {
  const auto& p = c.points;
  if (i == 0 || i + 1 >= p.size()) throw std::invalid_argument("kappa margins need an interior grid point");
  const double d = (p[i + 1].phi - p[i - 1].phi) / (p[i + 1].s - p[i - 1].s);
  KappaMargins out;
  out.gamma = -d;
  out.kappa_plus = -std::numeric_limits<double>::infinity();
  out.kappa_minus = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (j == i) continue;
    const double delta = p[j].s - p[i].s;
    const double v = p[i].phi + d * delta + eps * std::abs(delta) - p[j].phi;
    (delta > 0 ? out.kappa_plus : out.kappa_minus) = std::max(delta > 0 ? out.kappa_plus : out.kappa_minus, v);
  }
  return out;
}

/// Sub/supermultiplicativity check on α_n = Ê|∏_{j<=n}Γ_j|^s for depths up to
/// `depth`: log Ĉ is fitted on pairs with m+n+1 <= fit_limit and the remaining
/// pairs must stay within ±(log Ĉ + 5σ).
struct FeketeReport {
  double s = 0.0;
  double log_c = 0.0;
  double worst_excess = 0.0;
  std::size_t pairs_checked = 0;
  bool pass = true;
};

inline FeketeReport fekete_check(const GammaPool& pool, double s, std::size_t depth, std::size_t chains,
                                 std::size_t fit_limit, const RealizationSeed& seed, std::size_t workers = 1) {
  std::vector<std::size_t> marks(depth + 1);
  for (std::size_t m = 0; m <= depth; ++m) marks[m] = m;
  const ChainSet set = sample_chain_logs(pool, depth, chains, marks, seed, workers);
  std::vector<double> log_alpha(depth + 1), se(depth + 1);
  for (std::size_t m = 0; m <= depth; ++m) {
    std::vector<double> x(chains);
    for (std::size_t c = 0; c < chains; ++c) x[c] = s * set.at(c, m);
    const double mx = *std::max_element(x.begin(), x.end());
    std::vector<double> e(chains);
    for (std::size_t c = 0; c < chains; ++c) e[c] = std::exp(x[c] - mx);
    const double mu = stats::mean(e);
    log_alpha[m] = std::log(mu) + mx;
    se[m] = stats::stderr_of_mean(e) / mu;  // delta method on the log
  }
  // α_n here is indexed by the number of factors minus one: α at mark m has m+1 factors.
  auto residual = [&](std::size_t n, std::size_t m) {
    return log_alpha[n + m + 1] - log_alpha[n] - log_alpha[m];
  };
  auto sigma = [&](std::size_t n, std::size_t m) {
    return std::sqrt(se[n + m + 1] * se[n + m + 1] + se[n] * se[n] + se[m] * se[m]);
  };
  FeketeReport out;
  out.s = s;
  for (std::size_t n = 0; n <= depth; ++n) {
    for (std::size_t m = 0; n + m + 1 <= std::min(fit_limit, depth); ++m) {
      out.log_c = std::max(out.log_c, std::abs(residual(n, m)));
    }
  }
  for (std::size_t n = 0; n <= depth; ++n) {
    for (std::size_t m = 0; n + m + 1 <= depth; ++m) {
      if (n + m + 1 <= fit_limit) continue;
      ++out.pairs_checked;
      const double excess = std::abs(residual(n, m)) - out.log_c - 5.0 * sigma(n, m);
      out.worst_excess = std::max(out.worst_excess, excess);
      if (excess > 1e-12) out.pass = false;  // roundoff floor for deterministic chains
    }
  }
  return out;
}

}  // namespace bethe
