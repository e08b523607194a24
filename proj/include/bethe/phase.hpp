#pragma once

// Spectral criteria evaluated pointwise and on (E, λ) grids, plus the
// bounded-potential edge checks.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "bethe/disorder.hpp"
#include "bethe/free_energy.hpp"
#include "bethe/parallel.hpp"
#include "bethe/pool.hpp"
#include "bethe/tree.hpp"

namespace bethe {

/// L₀(E) = -log|Γ₀(E + i0)|.
inline double free_lyapunov(int K, double E) { return -std::log(std::abs(free_gamma(K, ComplexEnergy{E, 0.0}))); }

/// Cauchy disorder averages exactly: L = -log|Γ₀(E - λ·location + iλ·scale)|.
inline double cauchy_lyapunov(int K, double E, double lambda, double location = 0.0, double scale = 1.0) {
  return -std::log(std::abs(free_gamma(K, cplx{E - lambda * location, lambda * scale})));
}

/// Bisects L₀(E) = log K on [lo, hi] for E >= 0 (L₀ is increasing there).
inline double free_ac_crossing(int K, double lo, double hi, double tol = 1e-10) {
  const double target = std::log(static_cast<double>(K));
  if ((free_lyapunov(K, lo) - target) * (free_lyapunov(K, hi) - target) > 0) {
    throw std::invalid_argument("free_ac_crossing: no sign change on the bracket");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (free_lyapunov(K, mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct SpectrumSet {
  bool full_line = false;
  double lo = 0.0, hi = 0.0;
};

/// σ(T) + λ supp ρ.
inline SpectrumSet spectrum_interval(const DisorderModel& model, int K) {
  const double e = 2.0 * std::sqrt(static_cast<double>(K));
  SpectrumSet out{false, -e, e};
  if (model.is_deterministic()) return out;
  const Support s = model.support();
  if (!s.bounded) return {true, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  out.lo += model.lambda() * s.lo;
  out.hi += model.lambda() * s.hi;
  return out;
}

enum class PhaseLabel { ac_lyapunov, ac_phi1, localized_phi1, undetermined };

inline const char* label_name(PhaseLabel l) {
  switch (l) {
    case PhaseLabel::ac_lyapunov: return "ac_lyapunov";
    case PhaseLabel::ac_phi1: return "ac_phi1";
    case PhaseLabel::localized_phi1: return "localized_phi1";
    case PhaseLabel::undetermined: return "undetermined";
  }
  return "undetermined";
}

struct PhaseBudgets {
  PoolParams pool{10000, 40};
  std::vector<double> eta_sequence = default_eta_sequence();
  FreeEnergyParams free_energy{};
  /// η used for the φ(1) extrapolation.
  double phi_eta = 1e-3;
  bool compute_phi1 = true;
};

struct PhasePoint {
  double E = 0.0, lambda = 0.0;
  stats::Estimate L;
  bool has_phi1 = false;
  Phi1 phi1;
  PhaseLabel label = PhaseLabel::undetermined;
  /// (log K - L̂)/σ_L and (φ1 + log K)/spread; infinite when the error is zero.
  double margin_lyapunov = 0.0;
  double margin_phi1 = 0.0;
  bool converged = true;
  bool equilibrated = true;
  bool heavy_tail = false;
};

namespace detail {

inline double margin(double gap, double err) {
  if (err > 0) return gap / err;
  if (gap > 0) return std::numeric_limits<double>::infinity();
  if (gap < 0) return -std::numeric_limits<double>::infinity();
  return 0.0;
}

}  // namespace detail

/// The label follows from the stored statistics alone.
inline PhaseLabel label_from(const DisorderModel& model, int K, const PhasePoint& p) {
  const double logK = std::log(static_cast<double>(K));
  if (p.L.value + 3.0 * p.L.stderr_ < logK) return PhaseLabel::ac_lyapunov;
  if (p.has_phi1) {
    if (model.assumption_E() && p.phi1.value - 3.0 * p.phi1.spread > -logK) return PhaseLabel::ac_phi1;
    if (p.lambda > 0.0 && p.phi1.value + 3.0 * p.phi1.spread < -logK) return PhaseLabel::localized_phi1;
  }
  return PhaseLabel::undetermined;
}

inline PhasePoint classify_point(const DisorderModel& model, int K, double E, const PhaseBudgets& budgets,
                                 const RealizationSeed& seed) {
  PhasePoint p;
  p.E = E;
  p.lambda = model.is_deterministic() ? 0.0 : model.lambda();
  const double logK = std::log(static_cast<double>(K));
  if (model.is_deterministic()) {
    // φ(s) = -s·L₀ exactly, so φ(1) = -L₀ with no spread.
    p.L = {free_lyapunov(K, E), 0.0};
    if (budgets.compute_phi1) {
      p.has_phi1 = true;
      p.phi1 = {-p.L.value, 0.0};
    }
  } else {
    const auto lb = lyapunov_boundary(model, K, E, budgets.eta_sequence, budgets.pool, seed.child(0));
    p.L = lb.L;
    p.converged = lb.converged;
    p.equilibrated = lb.equilibrated;
    const bool ac_by_L = p.L.value + 3.0 * p.L.stderr_ < logK;
    if (budgets.compute_phi1 && !ac_by_L) {
      const auto curve = estimate_free_energy(model, K, {E, budgets.phi_eta}, budgets.free_energy, budgets.pool,
                                              seed.child(1));
      p.has_phi1 = true;
      p.phi1 = phi1_extrapolated(curve);
      p.heavy_tail = curve.flagged();
      p.equilibrated = p.equilibrated && curve.pool_equilibrated;
    }
  }
  p.margin_lyapunov = detail::margin(logK - p.L.value, p.L.stderr_);
  if (p.has_phi1) p.margin_phi1 = detail::margin(p.phi1.value + logK, p.phi1.spread);
  p.label = label_from(model, K, p);
  return p;
}

struct PhaseDiagram {
  std::vector<double> E_grid, lambda_grid;
  /// Row-major over λ then E.
  std::vector<PhasePoint> points;

  [[nodiscard]] const PhasePoint& at(std::size_t li, std::size_t ei) const { return points[li * E_grid.size() + ei]; }
};

inline DisorderModel with_lambda(const DisorderModel& m, double lambda) {
  return DisorderModel(m.family(), lambda, m.moment_exponent());
}

inline PhaseDiagram scan_phase_diagram(const DisorderModel& model, int K, const std::vector<double>& E_grid,
                                       const std::vector<double>& lambda_grid, const PhaseBudgets& budgets,
                                       const RealizationSeed& seed, std::size_t workers = 1) {
  if (E_grid.empty() || lambda_grid.empty()) throw std::invalid_argument("phase scan grids must be nonempty");
  PhaseDiagram d;
  d.E_grid = E_grid;
  d.lambda_grid = lambda_grid;
  std::vector<DisorderModel> models;
  for (double l : lambda_grid) models.push_back(with_lambda(model, l));
  const std::size_t nE = E_grid.size();
  d.points = parallel_map(nE * lambda_grid.size(), workers, [&](std::size_t cell) {
    const std::size_t li = cell / nE, ei = cell % nE;
    return classify_point(models[li], K, E_grid[ei], budgets, seed.child({li, ei}));
  });
  return d;
}

struct EdgeAnalysis {
  int K = 2;
  double lambda = 0.0;
  double E_lambda = 0.0;
  double lambda_star = 0.0;
  double bound = 0.0;
  std::vector<double> E_grid;
  std::vector<stats::Estimate> L;
  bool bound_holds = true;
  bool edge_ac = true;
};

inline double critical_edge_lambda(int K) {
  const double r = std::sqrt(static_cast<double>(K)) - 1.0;
  return r * r / 2.0;
}

/// Near-edge L̂ against L₀(E_λ - λ) for a model supported on [-1, 1].
inline EdgeAnalysis edge_analysis(const DisorderModel& model, int K, std::vector<double> E_grid,
                                  const PoolParams& pool, const std::vector<double>& eta_sequence,
                                  const RealizationSeed& seed, std::size_t workers = 1) {
  const Support s = model.support();
  if (!model.is_deterministic() && (!s.bounded || s.lo != -1.0 || s.hi != 1.0)) {
    throw DisorderError("out-of-support: edge analysis needs a density supported on [-1,1]");
  }
  EdgeAnalysis out;
  out.K = K;
  out.lambda = model.is_deterministic() ? 0.0 : model.lambda();
  out.E_lambda = -2.0 * std::sqrt(static_cast<double>(K)) - out.lambda;
  out.lambda_star = critical_edge_lambda(K);
  out.bound = free_lyapunov(K, out.E_lambda - out.lambda);
  if (E_grid.empty()) E_grid = stats::linspace(out.E_lambda, out.E_lambda + 0.05, 10);
  out.E_grid = E_grid;
  auto rows = parallel_map(E_grid.size(), workers, [&](std::size_t i) {
    if (model.is_deterministic()) return stats::Estimate{free_lyapunov(K, E_grid[i]), 0.0};
    return lyapunov_boundary(model, K, E_grid[i], eta_sequence, pool, seed.child(i)).L;
  });
  out.L = rows;
  const double logK = std::log(static_cast<double>(K));
  for (const auto& l : out.L) {
    out.bound_holds = out.bound_holds && l.value <= out.bound + 3.0 * l.stderr_;
    out.edge_ac = out.edge_ac && l.value + 3.0 * l.stderr_ < logK;
  }
  return out;
}

/// Dense H = A + λV on a ball; A has +1 on tree edges.
inline Eigen::MatrixXd ball_hamiltonian(const Tree& tree, const std::vector<double>& potential) {
  const auto n = static_cast<Eigen::Index>(tree.size());
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index v = 0; v < n; ++v) {
    H(v, v) = potential[static_cast<std::size_t>(v)];
    if (v > 0) {
      const auto p = static_cast<Eigen::Index>(tree.parent(static_cast<std::size_t>(v)));
      H(v, p) = H(p, v) = 1.0;
    }
  }
  return H;
}

struct LifshitzRow {
  double delta = 0.0;
  std::size_t count = 0;
  double p = 0.0;
  double stderr_ = 0.0;
  bool fitted = false;
  double bound = 0.0;
  bool bound_ok = true;
};

struct LifshitzReport {
  std::vector<LifshitzRow> rows;
  double exponent = 0.0;
  double exponent_stderr = 0.0;
  double c_hat = 0.0;
  std::size_t fitted_bins = 0;
  bool all_zero = false;
  bool monotone = true;
  bool bound_ok = true;
  [[nodiscard]] bool pass() const { return fitted_bins >= 2 && exponent >= 1.2 && bound_ok && monotone; }
};

/// P(inf spec H on B_R < E_λ + Δ) by dense eigensolves. The log-log fit uses
/// bins with >= 20 counts and P <= 0.9; Ĉ is pinned at the largest fitted Δ
/// and every other fitted bin must satisfy P <= Ĉ K^R Δ^{3/2} + 5σ.
inline LifshitzReport lifshitz_check(const DisorderModel& model, int K, int R, const std::vector<double>& delta_grid,
                                     std::size_t trials, const RealizationSeed& seed, std::size_t workers = 1) {
  const Support s = model.support();
  if (!s.bounded) throw DisorderError("out-of-support: Lifshitz check needs bounded disorder");
  if (R > 8) throw std::invalid_argument("Lifshitz check limited to R <= 8");
  const Tree tree({K, R, false});
  const double E_lambda = -2.0 * std::sqrt(static_cast<double>(K)) + model.lambda() * s.lo;
  const auto mins = parallel_map(trials, workers, [&](std::size_t t) {
    const auto r = make_realization(tree, model, seed.child(t));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ball_hamiltonian(tree, r.potential), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  });
  LifshitzReport out;
  const double KR = std::pow(static_cast<double>(K), R);
  std::vector<double> lx, ly;
  for (double d : delta_grid) {
    LifshitzRow row;
    row.delta = d;
    for (double m : mins) row.count += (m < E_lambda + d) ? 1 : 0;
    row.p = static_cast<double>(row.count) / static_cast<double>(trials);
    row.stderr_ = stats::binomial_stderr(row.p, trials);
    row.fitted = row.count >= 20 && row.p <= 0.9;
    if (row.fitted) {
      lx.push_back(std::log(d));
      ly.push_back(std::log(row.p));
      ++out.fitted_bins;
    }
    out.rows.push_back(row);
  }
  out.all_zero = std::all_of(out.rows.begin(), out.rows.end(), [](const LifshitzRow& r) { return r.count == 0; });
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    if (out.rows[i].delta > out.rows[i - 1].delta &&
        out.rows[i].p + 5.0 * out.rows[i].stderr_ < out.rows[i - 1].p) {
      out.monotone = false;
    }
  }
  if (out.fitted_bins >= 2) {
    const auto fit = stats::linear_fit(lx, ly);
    out.exponent = fit.slope;
    out.exponent_stderr = fit.slope_stderr;
    const LifshitzRow* anchor = nullptr;
    for (const auto& r : out.rows) {
      if (r.fitted && (!anchor || r.delta > anchor->delta)) anchor = &r;
    }
    out.c_hat = anchor->p / (KR * std::pow(anchor->delta, 1.5));
    for (auto& r : out.rows) {
      r.bound = std::min(1.0, out.c_hat * KR * std::pow(r.delta, 1.5));
      if (r.fitted) {
        r.bound_ok = r.p <= r.bound + 5.0 * r.stderr_;
        out.bound_ok = out.bound_ok && r.bound_ok;
      }
    }
  }
  return out;
}

struct RaySumReport {
  double alpha = 0.0;
  double bound = 0.0;
  double p = 0.0;
  double stderr_ = 0.0;
  double min_sum_seen = 0.0;
  bool nonnegative = true;
  [[nodiscard]] bool pass() const { return nonnegative && p <= bound + 5.0 * stderr_; }
};

/// Samples min over x ∈ S_R of Σ_{0⪯y≺x}(V(y)+1) for V on [-1,1] and compares
/// P(min < αR) with K^R (2√(2‖ρ‖α))^R.
inline RaySumReport ray_sum_check(const DisorderModel& model, int K, int R, double alpha, std::size_t trials,
                                  const RealizationSeed& seed, std::size_t workers = 1) {
  const Support s = model.support();
  if (!s.bounded || s.lo != -1.0 || s.hi != 1.0) {
    throw DisorderError("out-of-support: ray sums need a density supported on [-1,1]");
  }
  const double rho = model.sup_norm();
  if (!(alpha > 0.0 && alpha <= 1.0 / (8.0 * rho * K * K))) {
    throw std::invalid_argument("ray sum: alpha outside (0, 1/(8 |rho| K^2)]");
  }
  const Tree tree({K, R, false});
  const auto mins = parallel_map(trials, workers, [&](std::size_t t) {
    const auto v = sample_potential(model, seed.child(t), tree.size());
    std::vector<double> acc(tree.size());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < tree.size(); ++u) {
      acc[u] = v[u] + 1.0 + (u == 0 ? 0.0 : acc[tree.parent(u)]);
      if (tree.is_leaf(u)) best = std::min(best, acc[u]);
    }
    return best;
  });
  RaySumReport out;
  out.alpha = alpha;
  out.bound = std::pow(K * 2.0 * std::sqrt(2.0 * rho * alpha), R);
  std::size_t hits = 0;
  out.min_sum_seen = std::numeric_limits<double>::infinity();
  for (double m : mins) {
    hits += m < alpha * R ? 1 : 0;
    out.min_sum_seen = std::min(out.min_sum_seen, m);
    out.nonnegative = out.nonnegative && m >= 0.0;
  }
  out.p = static_cast<double>(hits) / static_cast<double>(trials);
  out.stderr_ = stats::binomial_stderr(out.p, trials);
  return out;
}

struct IntervalAverage {
  double lambda = 0.0;
  stats::Estimate M;
  /// Chebyshev bound |I|(M - log√K)/log√K on the measure of {L >= log K}.
  double bad_set_bound = 0.0;
};

/// Trapezoid average of L̂ over an E grid in [a, b], one row per λ.
inline std::vector<IntervalAverage> lyapunov_interval_average(const DisorderModel& model, int K, double a, double b,
                                                              std::size_t E_points,
                                                              const std::vector<double>& lambda_grid,
                                                              const PoolParams& pool,
                                                              const std::vector<double>& eta_sequence,
                                                              const RealizationSeed& seed, std::size_t workers = 1) {
  if (!(b > a)) throw std::invalid_argument("interval must have b > a");
  const auto Es = stats::linspace(a, b, std::max<std::size_t>(E_points, 2));
  const double h = Es[1] - Es[0];
  const double half_logK = 0.5 * std::log(static_cast<double>(K));
  std::vector<IntervalAverage> out;
  for (std::size_t li = 0; li < lambda_grid.size(); ++li) {
    const DisorderModel m = with_lambda(model, lambda_grid[li]);
    const auto Ls = parallel_map(Es.size(), workers, [&](std::size_t i) {
      if (m.is_deterministic()) return stats::Estimate{free_lyapunov(K, Es[i]), 0.0};
      return lyapunov_boundary(m, K, Es[i], eta_sequence, pool, seed.child({li, i})).L;
    });
    IntervalAverage row;
    row.lambda = lambda_grid[li];
    double integral = 0.0, var = 0.0;
    for (std::size_t i = 0; i < Es.size(); ++i) {
      const double w = (i == 0 || i + 1 == Es.size()) ? 0.5 * h : h;
      integral += w * Ls[i].value;
      var += w * w * Ls[i].stderr_ * Ls[i].stderr_;
    }
    row.M = {integral / (b - a), std::sqrt(var) / (b - a)};
    row.bad_set_bound = (b - a) * (row.M.value - half_logK) / half_logK;
    out.push_back(row);
  }
  return out;
}

}  // namespace bethe
