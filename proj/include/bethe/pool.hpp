#pragma once

// Population dynamics for the stationary law of the forward Green function
// on the infinite rooted tree, and the path chains built from it.

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bethe/disorder.hpp"
#include "bethe/greens.hpp"
#include "bethe/rng.hpp"
#include "bethe/stats.hpp"

namespace bethe {

struct PoolDiagnostics {
  /// Mean of log|Γ| after each sweep.
  std::vector<double> sweep_mean_log;
  /// |mean over the last 10% of sweeps - mean over the 10% before|.
  double drift = 0.0;
  double drift_stderr = 0.0;
  /// Lag-1 autocorrelation of the per-sweep means over the last 20% of sweeps.
  double lag1_autocorrelation = 0.0;
  bool equilibrated = true;
};

struct GammaPool {
  std::vector<cplx> values;
  ComplexEnergy energy;
  int K = 2;
  DisorderModel model;
  std::size_t sweep_count = 0;
  PoolDiagnostics diagnostics;

  [[nodiscard]] std::size_t size() const { return values.size(); }
  [[nodiscard]] cplx draw(Engine& rng) const { return values[uniform_index(rng, values.size())]; }
};

struct PoolParams {
  std::size_t size = 20000;
  std::size_t sweeps = 60;
};

namespace detail {

inline double mean_log_abs(const std::vector<cplx>& v) {
  double acc = 0.0;
  for (const cplx& g : v) acc += std::log(std::abs(g));
  return acc / static_cast<double>(v.size());
}

inline void fill_diagnostics(PoolDiagnostics& d) {
  const auto& m = d.sweep_mean_log;
  const std::size_t n = m.size();
  const std::size_t w = std::max<std::size_t>(1, n / 10);
  if (n < 2 * w || n < 4) {
    d.equilibrated = true;
    return;
  }
  const std::span<const double> all(m);
  const auto last = all.subspan(n - w, w);
  const auto prev = all.subspan(n - 2 * w, w);
  d.drift = std::abs(stats::mean(last) - stats::mean(prev));
  d.drift_stderr = std::sqrt(stats::variance(last) / static_cast<double>(w) +
                             stats::variance(prev) / static_cast<double>(w));
  d.equilibrated = d.drift < 1e-3 || d.drift < 3.0 * d.drift_stderr;
  const auto tail = all.subspan(n - 2 * w, 2 * w);
  const double mu = stats::mean(tail);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < tail.size(); ++i) {
    den += (tail[i] - mu) * (tail[i] - mu);
    if (i > 0) num += (tail[i] - mu) * (tail[i - 1] - mu);
  }
  d.lag1_autocorrelation = den > 0.0 ? num / den : 0.0;
}

}  // namespace detail

/// Iterates Γ <- (λV - ζ - Σ_{j=1..K} Γ_{i_j})^{-1} over the pool in place, K
/// members drawn uniformly with replacement and a fresh V per update. Starts
/// from the free solution unless a warm start is given.
inline GammaPool pool_equilibrate(const DisorderModel& model, int K, ComplexEnergy energy, std::size_t size,
                                  std::size_t sweeps, const RealizationSeed& seed,
                                  const std::vector<cplx>* warm_start = nullptr) {
  if (size < 1) throw std::invalid_argument("pool size must be positive");
  GammaPool pool;
  pool.energy = energy;
  pool.K = K;
  pool.model = model;
  if (warm_start && warm_start->size() == size) {
    pool.values = *warm_start;
  } else {
    pool.values.assign(size, free_gamma(K, energy));
  }
  Engine rng = seed.engine();
  auto draw_v = model.sampler();
  const double lambda = model.is_deterministic() ? 0.0 : model.lambda();
  const cplx zeta = energy.zeta();
  auto& v = pool.values;
  for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
    for (std::size_t i = 0; i < size; ++i) {
      cplx acc{};
      for (int k = 0; k < K; ++k) acc += v[uniform_index(rng, size)];
      const double pot = lambda == 0.0 ? 0.0 : lambda * draw_v(rng);
      v[i] = 1.0 / (pot - zeta - acc);
    }
    pool.diagnostics.sweep_mean_log.push_back(detail::mean_log_abs(v));
  }
  pool.sweep_count = sweeps;
  detail::fill_diagnostics(pool.diagnostics);
  return pool;
}

inline GammaPool pool_equilibrate(const DisorderModel& model, int K, ComplexEnergy energy, const PoolParams& p,
                                  const RealizationSeed& seed) {
  return pool_equilibrate(model, K, energy, p.size, p.sweeps, seed);
}

/// L̂ = -mean log|Γ| over the pool with a 50-batch standard error.
inline stats::Estimate estimate_lyapunov(const GammaPool& pool) {
  std::vector<double> x(pool.values.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = -std::log(std::abs(pool.values[i]));
  return stats::batch_means(x, 50);
}

/// Upper α-percentile: the largest sample value t with #{x >= t}/N >= α.
inline double percentile_xi(std::vector<double> sample, double alpha) {
  if (sample.empty()) throw std::invalid_argument("percentile_xi: empty sample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("percentile_xi: alpha outside (0,1)");
  const auto n = static_cast<double>(sample.size());
  auto k = static_cast<std::size_t>(std::ceil(alpha * n - 1e-12 * n));
  k = std::clamp<std::size_t>(k, 1, sample.size());
  std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(k - 1), sample.end(),
                   std::greater<>());
  return sample[k - 1];
}

inline std::vector<double> imag_parts(const GammaPool& pool) {
  std::vector<double> out(pool.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pool.values[i].imag();
  return out;
}

/// Builds Γ(x_0..x_n) from the far end: Γ(x_n) = tail, then
/// Γ(x_j) = (λV_j - ζ - Γ(x_{j+1}) - side_j)^{-1}. side_j is the sum of the
/// forward Green functions of the other children of x_j.
inline std::vector<cplx> chain_from_parts(const std::vector<double>& potentials, const std::vector<cplx>& side_sums,
                                          cplx tail, cplx zeta) {
  const std::size_t n = potentials.size();
  std::vector<cplx> out(n + 1);
  out[n] = tail;
  for (std::size_t j = n; j-- > 0;) out[j] = 1.0 / (potentials[j] - zeta - out[j + 1] - side_sums[j]);
  return out;
}

/// One root-to-depth-n path on the infinite rooted tree; side branches and
/// the far end are fed from the pool. ∏_{j<=m} Γ_j is distributed as G(0,x_m) up to sign.
inline std::vector<cplx> sample_gamma_chain(const GammaPool& pool, std::size_t n, Engine& rng) {
  const double lambda = pool.model.is_deterministic() ? 0.0 : pool.model.lambda();
  auto draw_v = pool.model.sampler();
  const cplx zeta = pool.energy.zeta();
  std::vector<cplx> out(n + 1);
  out[n] = pool.draw(rng);
  for (std::size_t j = n; j-- > 0;) {
    cplx side{};
    for (int k = 1; k < pool.K; ++k) side += pool.draw(rng);
    const double pot = lambda == 0.0 ? 0.0 : lambda * draw_v(rng);
    out[j] = 1.0 / (pot - zeta - out[j + 1] - side);
  }
  return out;
}

inline std::vector<cplx> sample_gamma_chain(const GammaPool& pool, std::size_t n, const RealizationSeed& seed) {
  Engine rng = seed.engine();
  return sample_gamma_chain(pool, n, rng);
}

/// Cumulative log|∏_{j<=m} Γ_j| for m = 0..n.
inline std::vector<double> cumulative_log_abs(const std::vector<cplx>& chain) {
  std::vector<double> out(chain.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < chain.size(); ++j) {
    acc += std::log(std::abs(chain[j]));
    out[j] = acc;
  }
  return out;
}

/// Default η ladder for boundary values.
inline std::vector<double> default_eta_sequence() { return {1e-2, 3e-3, 1e-3, 3e-4, 1e-4}; }

struct LyapunovPoint {
  double eta = 0.0;
  stats::Estimate L;
  bool equilibrated = true;
};

struct LyapunovBoundary {
  std::vector<LyapunovPoint> ladder;
  /// Value at the smallest η.
  stats::Estimate L;
  bool converged = true;
  bool equilibrated = true;
};

/// Runs the pool down the η ladder (each step warm-started from the previous
/// pool) and reports the smallest-η estimate. Converged when the two smallest
/// η agree within 3 combined standard errors plus the larger of the two η.
inline LyapunovBoundary lyapunov_boundary(const DisorderModel& model, int K, double E,
                                          const std::vector<double>& eta_sequence, const PoolParams& params,
                                          const RealizationSeed& seed) {
  if (eta_sequence.empty()) throw std::invalid_argument("empty eta sequence");
  LyapunovBoundary out;
  std::vector<cplx> warm;
  for (std::size_t i = 0; i < eta_sequence.size(); ++i) {
    const ComplexEnergy z{E, eta_sequence[i]};
    const GammaPool pool =
        pool_equilibrate(model, K, z, params.size, params.sweeps, seed.child(i), warm.empty() ? nullptr : &warm);
    LyapunovPoint pt;
    pt.eta = z.eta;
    pt.L = estimate_lyapunov(pool);
    pt.equilibrated = pool.diagnostics.equilibrated;
    out.equilibrated = out.equilibrated && pt.equilibrated;
    out.ladder.push_back(pt);
    warm = pool.values;
  }
  out.L = out.ladder.back().L;
  if (out.ladder.size() >= 2) {
    const auto& a = out.ladder[out.ladder.size() - 1];
    const auto& b = out.ladder[out.ladder.size() - 2];
    const double comb = std::hypot(a.L.stderr_, b.L.stderr_);
    out.converged = std::abs(a.L.value - b.L.value) < 3.0 * comb + b.eta;
  }
  return out;
}

}  // namespace bethe
