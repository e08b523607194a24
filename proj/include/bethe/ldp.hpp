#pragma once

// s-tilted reweighting of path chains and the empirical large-deviation checks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "bethe/free_energy.hpp"
#include "bethe/pool.hpp"
#include "bethe/stats.hpp"

namespace bethe {

/// Chains reweighted by ∏|Γ_j|^s. Weights are exp(s·log∏ - max), so at s = 0
/// every weight is exactly 1.
struct TiltedSampler {
  double s = 0.0;
  std::vector<double> weights;
  /// log Ê[∏|Γ_j|^s].
  double log_normalization = 0.0;
  double ess = 0.0;

  [[nodiscard]] double ess_fraction() const { return weights.empty() ? 0.0 : ess / static_cast<double>(weights.size()); }
  [[nodiscard]] bool low_ess() const { return ess_fraction() < 0.05; }
};

inline TiltedSampler make_tilted(std::span<const double> log_products, double s) {
  if (log_products.empty()) throw std::invalid_argument("tilted sampler needs chains");
  if (!(s <= kMaxTilt)) throw std::invalid_argument("tilt exponent above the 0.95 cap");
  TiltedSampler t;
  t.s = s;
  double mx = -std::numeric_limits<double>::infinity();
  for (double l : log_products) mx = std::max(mx, s * l);
  if (s == 0.0) mx = 0.0;
  double sum = 0.0, sum2 = 0.0;
  t.weights.reserve(log_products.size());
  for (double l : log_products) {
    const double w = std::exp(s * l - mx);
    t.weights.push_back(w);
    sum += w;
    sum2 += w * w;
  }
  t.log_normalization = std::log(sum / static_cast<double>(log_products.size())) + mx;
  t.ess = sum * sum / sum2;
  return t;
}

struct TiltedEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  double ess = 0.0;
  bool low_ess = false;
};

/// Self-normalized Ê_s[Q] = Σ w Q / Σ w with a delta-method standard error.
inline TiltedEstimate tilted_expectation(const TiltedSampler& t, std::span<const double> Q) {
  if (Q.size() != t.weights.size()) throw std::invalid_argument("observable length does not match chain count");
  double wq = 0.0, w = 0.0;
  for (std::size_t i = 0; i < Q.size(); ++i) {
    wq += t.weights[i] * Q[i];
    w += t.weights[i];
  }
  TiltedEstimate e;
  e.value = wq / w;
  double v = 0.0;
  for (std::size_t i = 0; i < Q.size(); ++i) v += t.weights[i] * t.weights[i] * (Q[i] - e.value) * (Q[i] - e.value);
  e.stderr_ = std::sqrt(v) / w;
  e.ess = t.ess;
  e.low_ess = t.low_ess();
  return e;
}

struct LdpTailRow {
  std::size_t n = 0;
  double p = 0.0;
  double stderr_ = 0.0;
  double bound = 0.0;
  bool pass = true;
};

struct LdpReport {
  double s = 0.0;
  double eps = 0.0;
  double gamma = 0.0;
  double I = 0.0;
  KappaMargins kappa;
  std::vector<LdpTailRow> tail;
  /// Log-linear slope of the tilted band-exit fraction against ℓ.
  double exit_slope = 0.0;
  double exit_slope_stderr = 0.0;
  bool insufficient_decay = false;
  std::vector<std::size_t> exit_lengths;
  std::vector<double> exit_fraction;
  /// ψ_N(t) = (1/N) log Ê ∏|Γ|^t, rows per N in the n grid, columns per t.
  std::vector<double> psi_t;
  std::vector<std::vector<double>> psi;
  double psi_max_spread = 0.0;
  bool s0_exact = true;
  double tilted_ess_fraction = 0.0;

  [[nodiscard]] bool tail_pass() const {
    return std::all_of(tail.begin(), tail.end(), [](const LdpTailRow& r) { return r.pass; });
  }
};

struct LdpParams {
  double s = 0.5;
  double eps = 0.05;
  std::vector<std::size_t> n_grid = {50, 100, 200};
  std::size_t chains = 10000;
  std::vector<double> psi_t = {0.25, 0.5, 0.75};
  std::size_t workers = 1;
};

/// γ = -φ'(s) and I(γ) from the fitted curve, then:
/// (i) P̂(∏_{j<n}|Γ_j| >= e^{-(γ+ε)n}) <= e^{-(I-2ε)n} + 5σ on the n grid,
/// (ii) the s-tilted band-exit fraction against ℓ and its log-linear slope,
/// (iii) ψ_N(t) for each N in the grid.
inline LdpReport ldp_bounds_check(const GammaPool& pool, const FreeEnergyCurve& curve, const LdpParams& p,
                                  const RealizationSeed& seed) {
  if (p.n_grid.empty()) throw std::invalid_argument("ldp check needs an n grid");
  LdpReport out;
  out.s = p.s;
  out.eps = p.eps;
  const std::size_t si = curve.index_of(p.s);
  out.kappa = kappa_margins(curve, si, p.eps);
  out.gamma = out.kappa.gamma;
  {
    std::vector<double> s, phi;
    for (const auto& pt : curve.points) {
      s.push_back(pt.s);
      phi.push_back(pt.phi);
    }
    out.I = legendre_value(s, phi, out.gamma);
  }
  const std::size_t N = *std::max_element(p.n_grid.begin(), p.n_grid.end());
  // Marks: n-1 for every grid n (n factors), plus every 10 steps for the band exits.
  std::vector<std::size_t> marks;
  for (std::size_t l = 10; l <= N; l += 10) marks.push_back(l - 1);
  for (std::size_t n : p.n_grid) marks.push_back(n - 1);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
  const ChainSet set = sample_chain_logs(pool, N - 1, p.chains, marks, seed, p.workers);
  auto mark_index = [&](std::size_t m) {
    return static_cast<std::size_t>(std::lower_bound(marks.begin(), marks.end(), m) - marks.begin());
  };

  for (std::size_t n : p.n_grid) {
    LdpTailRow row;
    row.n = n;
    const std::size_t mi = mark_index(n - 1);
    std::size_t hits = 0;
    const double thr = -(out.gamma + p.eps) * static_cast<double>(n);
    for (std::size_t c = 0; c < set.chains; ++c) hits += set.at(c, mi) >= thr;
    row.p = static_cast<double>(hits) / static_cast<double>(set.chains);
    row.stderr_ = stats::binomial_stderr(row.p, set.chains);
    row.bound = std::exp(-(out.I - 2.0 * p.eps) * static_cast<double>(n));
    row.pass = row.p <= row.bound + 5.0 * row.stderr_;
    out.tail.push_back(row);
  }

  std::vector<double> final_logs(set.chains);
  const std::size_t last = mark_index(N - 1);
  for (std::size_t c = 0; c < set.chains; ++c) final_logs[c] = set.at(c, last);
  const TiltedSampler tilted = make_tilted(final_logs, p.s);
  out.tilted_ess_fraction = tilted.ess_fraction();
  std::vector<double> lx, ly;
  for (std::size_t l = 10; l <= N; l += 10) {
    const std::size_t mi = mark_index(l - 1);
    std::vector<double> exit(set.chains);
    const double lo = -(out.gamma + p.eps) * static_cast<double>(l);
    const double hi = -(out.gamma - p.eps) * static_cast<double>(l);
    for (std::size_t c = 0; c < set.chains; ++c) exit[c] = (set.at(c, mi) < lo || set.at(c, mi) > hi) ? 1.0 : 0.0;
    const double f = tilted_expectation(tilted, exit).value;
    out.exit_lengths.push_back(l);
    out.exit_fraction.push_back(f);
    if (f > 0) {
      lx.push_back(static_cast<double>(l));
      ly.push_back(std::log(f));
    }
  }
  if (lx.size() >= 3) {
    const auto fit = stats::linear_fit(lx, ly);
    out.exit_slope = fit.slope;
    out.exit_slope_stderr = fit.slope_stderr;
    out.insufficient_decay = fit.slope > -out.kappa.kappa() / 3.0 + 2.0 * fit.slope_stderr;
  } else {
    out.insufficient_decay = true;
  }

  out.psi_t = p.psi_t;
  for (std::size_t n : p.n_grid) {
    const std::size_t mi = mark_index(n - 1);
    std::vector<double> row;
    for (double t : p.psi_t) {
      std::vector<double> x(set.chains);
      for (std::size_t c = 0; c < set.chains; ++c) x[c] = t * set.at(c, mi);
      row.push_back(stats::log_mean_exp(x) / static_cast<double>(n));
    }
    out.psi.push_back(row);
  }
  for (std::size_t j = 0; j < p.psi_t.size(); ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& row : out.psi) {
      lo = std::min(lo, row[j]);
      hi = std::max(hi, row[j]);
    }
    out.psi_max_spread = std::max(out.psi_max_spread, hi - lo);
  }

  const TiltedSampler flat = make_tilted(final_logs, 0.0);
  const double tilted_mean = tilted_expectation(flat, final_logs).value;
  double plain = 0.0;
  for (double v : final_logs) plain += v;
  plain /= static_cast<double>(final_logs.size());
  out.s0_exact = tilted_mean == plain;
  return out;
}

}  // namespace bethe
