#pragma once

// Density of states from the pool: (1/π) E Im (λV - ζ - Σ_d Γ)^{-1} with d = K
// (rooted tree) and d = K+1 (full tree).

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "bethe/parallel.hpp"
#include "bethe/pool.hpp"

namespace bethe {

struct DosPoint {
  double E = 0.0;
  double eta = 0.0;
  stats::Estimate rooted;
  stats::Estimate full;
  bool converged = true;
  bool equilibrated = true;
};

struct DosParams {
  PoolParams pool;
  /// Fresh root draws per (E, η); 0 means one per pool member.
  std::size_t samples = 0;
  std::size_t workers = 1;
};

namespace detail {

inline void check_eta_sequence(const std::vector<double>& eta) {
  if (eta.empty()) throw std::invalid_argument("empty eta sequence");
  for (std::size_t i = 0; i < eta.size(); ++i) {
    if (!(eta[i] > 0.0)) throw std::invalid_argument("eta must be positive");
    if (i > 0 && !(eta[i] < eta[i - 1])) throw std::invalid_argument("eta sequence must be strictly decreasing");
  }
  if (eta.back() < 1e-6) throw std::invalid_argument("smallest eta below 1e-6");
}

/// Root draws for one equilibrated pool.
inline std::pair<stats::Estimate, stats::Estimate> dos_at(const GammaPool& pool, std::size_t samples, Engine& rng) {
  const double lambda = pool.model.is_deterministic() ? 0.0 : pool.model.lambda();
  auto draw_v = pool.model.sampler();
  const cplx zeta = pool.energy.zeta();
  std::vector<double> rooted(samples), full(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    cplx acc{};
    for (int k = 0; k < pool.K; ++k) acc += pool.draw(rng);
    const cplx extra = pool.draw(rng);
    const double pot = lambda == 0.0 ? 0.0 : lambda * draw_v(rng);
    rooted[i] = (1.0 / (pot - zeta - acc)).imag() / std::numbers::pi;
    full[i] = (1.0 / (pot - zeta - acc - extra)).imag() / std::numbers::pi;
  }
  return {stats::batch_means(rooted, 50), stats::batch_means(full, 50)};
}

}  // namespace detail

/// One row per E at the smallest η. Converged when the two smallest-η values
/// differ by less than 3 combined standard errors plus the larger η.
inline std::vector<DosPoint> estimate_dos(const DisorderModel& model, int K, const std::vector<double>& E_grid,
                                          const std::vector<double>& eta_sequence, const DosParams& params,
                                          const RealizationSeed& seed) {
  detail::check_eta_sequence(eta_sequence);
  const std::size_t samples = params.samples ? params.samples : params.pool.size;
  return parallel_map(E_grid.size(), params.workers, [&](std::size_t e) {
    DosPoint out;
    out.E = E_grid[e];
    std::vector<cplx> warm;
    std::vector<std::pair<stats::Estimate, stats::Estimate>> ladder;
    for (std::size_t i = 0; i < eta_sequence.size(); ++i) {
      const RealizationSeed task = seed.child({e, i});
      const GammaPool pool = pool_equilibrate(model, K, {E_grid[e], eta_sequence[i]}, params.pool.size,
                                              params.pool.sweeps, task.child(0), warm.empty() ? nullptr : &warm);
      out.equilibrated = out.equilibrated && pool.diagnostics.equilibrated;
      Engine rng = task.child(1).engine();
      ladder.push_back(detail::dos_at(pool, samples, rng));
      warm = pool.values;
    }
    out.eta = eta_sequence.back();
    out.rooted = ladder.back().first;
    out.full = ladder.back().second;
    if (ladder.size() >= 2) {
      const auto& a = ladder[ladder.size() - 1];
      const auto& b = ladder[ladder.size() - 2];
      const double slack = eta_sequence[eta_sequence.size() - 2];
      const bool r = std::abs(a.first.value - b.first.value) <
                     3.0 * std::hypot(a.first.stderr_, b.first.stderr_) + slack;
      const bool f = std::abs(a.second.value - b.second.value) <
                     3.0 * std::hypot(a.second.stderr_, b.second.stderr_) + slack;
      out.converged = r && f;
    }
    return out;
  });
}

/// Free rooted-tree density √((4K - E²)₊)/(2πK).
inline double free_rooted_density(int K, double E) {
  const double d = 4.0 * K - E * E;
  return d > 0 ? std::sqrt(d) / (2.0 * std::numbers::pi * K) : 0.0;
}

}  // namespace bethe
