#pragma once

// Resonance events on spheres of the rooted tree: extreme blow-up of G(x,x),
// regular decay toward the root, marginal forward Im Γ, and the thinned
// large-deviation variant. Green quantities beyond the simulated ball come
// from an equilibrated pool.

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bethe/greens.hpp"
#include "bethe/parallel.hpp"
#include "bethe/pool.hpp"
#include "bethe/tree.hpp"

namespace bethe {

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything the events at one sphere site x = x_n need: λV along the root
/// path x_0..x_n, the summed forward Green functions of the off-path children
/// of x_0..x_{n-1}, and Γ(y) for the forward neighbours y of x.
struct PathSample {
  std::vector<double> potential;
  std::vector<cplx> side;
  std::vector<cplx> forward;
};

/// Backward cavities along the path: up[j] is the diagonal Green function at
/// x_{j-1} with the subtree of x_j removed (up[0] = 0).
struct PathGreens {
  std::vector<cplx> up;
  cplx Gxx;
  /// G^{T_x}(0, x_{n-1}).
  cplx G_root_parent;
  cplx G0x;
};

inline PathGreens path_greens(const PathSample& p, cplx zeta) {
  const std::size_t n = p.potential.size() - 1;
  if (n < 1) throw GeometryError("path needs at least one step");
  PathGreens g;
  g.up.assign(n + 1, cplx{});
  for (std::size_t j = 1; j <= n; ++j) {
    g.up[j] = 1.0 / (p.potential[j - 1] - zeta - p.side[j - 1] - g.up[j - 1]);
  }
  cplx fwd{};
  for (const cplx& y : p.forward) fwd += y;
  g.Gxx = 1.0 / (p.potential[n] - zeta - fwd - g.up[n]);
  cplx r = g.up[n];
  for (std::size_t j = 1; j < n; ++j) r *= -g.up[j];
  g.G_root_parent = r;
  g.G0x = -r * g.Gxx;
  return g;
}

/// Pool-fed path of length n on the infinite rooted tree.
inline PathSample sample_path(const GammaPool& pool, std::size_t n, Engine& rng) {
  const double lambda = pool.model.is_deterministic() ? 0.0 : pool.model.lambda();
  auto draw_v = pool.model.sampler();
  const cplx zeta = pool.energy.zeta();
  auto pot = [&] { return lambda == 0.0 ? 0.0 : lambda * draw_v(rng); };
  PathSample p;
  p.potential.resize(n + 1);
  p.side.resize(n);
  for (std::size_t j = 0; j <= n; ++j) p.potential[j] = pot();
  for (std::size_t j = 0; j < n; ++j) {
    cplx acc{};
    for (int k = 1; k < pool.K; ++k) acc += pool.draw(rng);
    p.side[j] = acc;
  }
  for (int k = 0; k < pool.K; ++k) {
    cplx acc{};
    for (int i = 0; i < pool.K; ++i) acc += pool.draw(rng);
    p.forward.push_back(1.0 / (pot() - zeta - acc));
  }
  return p;
}

/// The same quantities read off a finite ball for the site x.
inline PathSample path_from_tree(const Tree& tree, const FiniteTreeRealization& r, const TreeGreens& tg,
                                 std::size_t x) {
  const auto path = tree.path_from_root(x);
  PathSample p;
  for (std::size_t j = 0; j < path.size(); ++j) {
    const std::size_t v = path[j];
    p.potential.push_back(r.potential[v]);
    if (j + 1 < path.size()) {
      cplx acc = r.boundary_at(v);
      for (std::size_t c = 0; c < tree.child_count(v); ++c) {
        const std::size_t u = tree.child_begin(v) + c;
        if (u != path[j + 1]) acc += tg.gamma(u);
      }
      p.side.push_back(acc);
    }
  }
  for (std::size_t c = 0; c < tree.child_count(x); ++c) p.forward.push_back(tg.gamma(tree.child_begin(x) + c));
  if (!r.boundary.empty() && r.boundary[x] != cplx{}) {
    throw GeometryError("path_from_tree: sphere site carries an outside boundary term");
  }
  return p;
}

// ---------------------------------------------------------------------------
// Lyapunov mode

struct LyapunovThresholds {
  double L_hat = 0.0;
  double delta = 0.0;
  double ell = 0.0;
  double tau = 0.0;
  double xi = 0.0;
  int n = 0;
};

/// 4δ = log K - L̂, ℓ = L̂ + δ, τ = e^{(L̂+2δ)n}.
inline LyapunovThresholds lyapunov_thresholds(double L_hat, int K, int n, double xi) {
  const double logK = std::log(static_cast<double>(K));
  const double four_delta = logK - L_hat;
  if (!(four_delta > 0.0 && four_delta < 0.5 * logK)) {
    throw std::invalid_argument("resonance: log K - L must lie in (0, log sqrt K)");
  }
  LyapunovThresholds t;
  t.L_hat = L_hat;
  t.delta = four_delta / 4.0;
  t.ell = L_hat + t.delta;
  t.tau = std::exp((L_hat + 2.0 * t.delta) * n);
  t.xi = xi;
  t.n = n;
  return t;
}

struct EventRecord {
  std::size_t site = 0;
  double abs_Gxx = 0.0;
  double abs_G_regular = 0.0;
  double abs_G0x = 0.0;
  double max_im_forward = 0.0;
  bool E = false, R = false, I = false;
  [[nodiscard]] bool joint() const { return E && R && I; }
};

/// Pure decision from stored quantities.
inline void decide(EventRecord& rec, const LyapunovThresholds& t) {
  rec.E = rec.abs_Gxx >= t.tau;
  rec.R = rec.abs_G_regular >= std::exp(-t.ell * t.n);
  rec.I = rec.max_im_forward >= t.xi;
}

inline EventRecord lyapunov_event(std::size_t site, const PathSample& p, const PathGreens& g,
                                  const LyapunovThresholds& t) {
  EventRecord rec;
  rec.site = site;
  rec.abs_Gxx = std::abs(g.Gxx);
  rec.abs_G_regular = std::abs(g.G_root_parent);
  rec.abs_G0x = std::abs(g.G0x);
  rec.max_im_forward = -std::numeric_limits<double>::infinity();
  for (const cplx& y : p.forward) rec.max_im_forward = std::max(rec.max_im_forward, y.imag());
  decide(rec, t);
  return rec;
}

/// Realization on B_{n+2} whose leaves carry Σ of K pool draws as outside self-energy.
inline FiniteTreeRealization pool_fed_realization(const Tree& tree, const GammaPool& pool,
                                                  const RealizationSeed& seed) {
  FiniteTreeRealization r = make_realization(tree, pool.model, seed.child(0));
  r.boundary.assign(tree.size(), cplx{});
  Engine rng = seed.child(1).engine();
  const int last = tree.geometry().depth - 1;
  for (std::size_t v = tree.level_begin(last); v < tree.level_end(last); ++v) {
    cplx acc{};
    for (int k = 0; k < pool.K; ++k) acc += pool.draw(rng);
    r.boundary[v] = acc;
  }
  return r;
}

/// Records for every site of S_n on one B_{n+2} realization.
inline std::vector<EventRecord> sphere_events(const Tree& tree, const TreeGreens& tg, int n,
                                              const LyapunovThresholds& t) {
  std::vector<EventRecord> out;
  for (std::size_t x = tree.level_begin(n); x < tree.level_end(n); ++x) {
    EventRecord rec;
    rec.site = x - tree.level_begin(n);
    rec.abs_Gxx = std::abs(tg.diagonal(x));
    rec.abs_G_regular = std::abs(tg.root_to_parent_without(x));
    rec.abs_G0x = std::abs(tg.green(0, x));
    rec.max_im_forward = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < tree.child_count(x); ++c) {
      rec.max_im_forward = std::max(rec.max_im_forward, tg.gamma(tree.child_begin(x) + c).imag());
    }
    decide(rec, t);
    out.push_back(rec);
  }
  return out;
}

inline constexpr std::size_t kExhaustiveSphereCap = 16384;

struct ResonanceConfig {
  int n = 6;
  int K = 2;
  DisorderModel model = DisorderModel::cauchy(0.0, 1.0, 0.5);
  double E = 0.0;
  double eta = 1e-3;
  double alpha = 0.5;
  /// L̂ from the pool when unset.
  std::optional<double> L_hat;
  /// Replaces e^{(L̂+2δ)n} when set.
  std::optional<double> tau;
  PoolParams pool{20000, 40};
};

struct CountStatistics {
  std::size_t trials = 0;
  bool exhaustive = true;
  LyapunovThresholds thresholds;
  stats::Estimate mean_N;
  stats::Estimate factorial_second;  // E[N(N-1)]
  stats::Estimate second;            // E[N²]
  stats::Estimate p_any;             // P(N >= 1)
  /// K^n · P̂(joint event at the first sphere site).
  stats::Estimate symmetry_mean;
  double second_moment_ratio = 0.0;  // E[N]²/E[N²]
  std::vector<std::size_t> per_trial;
  double rate_E = 0.0, rate_R = 0.0, rate_I = 0.0;
  bool zero_events = false;
  bool blowup_ok = true;  // E ∧ R ⇒ |G(0,x)| >= τ e^{-ℓn} (= e^{δn} at the default τ) on every record
  [[nodiscard]] bool symmetry_agrees() const {
    return std::abs(mean_N.value - symmetry_mean.value) <= 3.0 * std::hypot(mean_N.stderr_, symmetry_mean.stderr_);
  }
};

inline CountStatistics count_resonances(const ResonanceConfig& cfg, std::size_t trials, const RealizationSeed& seed,
                                        std::size_t workers = 1) {
  if (cfg.n < 1) throw GeometryError("resonance: sphere radius must be >= 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw std::invalid_argument("resonance: alpha outside (0,1)");
  const GammaPool pool = pool_equilibrate(cfg.model, cfg.K, {cfg.E, cfg.eta}, cfg.pool, seed.child(0));
  const double L = cfg.L_hat ? *cfg.L_hat : estimate_lyapunov(pool).value;
  const double xi = percentile_xi(imag_parts(pool), cfg.alpha);
  CountStatistics out;
  out.trials = trials;
  out.thresholds = lyapunov_thresholds(L, cfg.K, cfg.n, xi);
  if (cfg.tau) out.thresholds.tau = *cfg.tau;
  const double sphere = std::pow(static_cast<double>(cfg.K), cfg.n);
  out.exhaustive = sphere <= static_cast<double>(kExhaustiveSphereCap);
  const cplx zeta{cfg.E, cfg.eta};
  const double blow = out.thresholds.tau * std::exp(-out.thresholds.ell * cfg.n);

  struct TrialResult {
    std::size_t N = 0, nE = 0, nR = 0, nI = 0, sites = 0;
    bool first_joint = false;
    bool blowup_ok = true;
  };
  std::optional<Tree> tree;
  if (out.exhaustive) tree.emplace(TreeGeometry{cfg.K, cfg.n + 2, false});
  auto results = parallel_map(trials, workers, [&](std::size_t t) {
    TrialResult tr;
    std::vector<EventRecord> recs;
    if (out.exhaustive) {
      const auto r = pool_fed_realization(*tree, pool, seed.child({1, t}));
      const TreeGreens tg(*tree, r, zeta);
      recs = sphere_events(*tree, tg, cfg.n, out.thresholds);
    } else {
      Engine rng = seed.child({2, t}).engine();
      const auto p = sample_path(pool, static_cast<std::size_t>(cfg.n), rng);
      recs.push_back(lyapunov_event(0, p, path_greens(p, zeta), out.thresholds));
    }
    for (const auto& rec : recs) {
      tr.N += rec.joint();
      tr.nE += rec.E;
      tr.nR += rec.R;
      tr.nI += rec.I;
      if (rec.E && rec.R && rec.abs_G0x < blow * (1.0 - 1e-12)) tr.blowup_ok = false;
    }
    tr.sites = recs.size();
    tr.first_joint = recs.front().joint();
    return tr;
  });

  std::vector<double> N, NN1, N2, any, first;
  std::size_t sites = 0, nE = 0, nR = 0, nI = 0;
  for (const auto& r : results) {
    const auto n = static_cast<double>(r.N);
    N.push_back(n);
    NN1.push_back(n * (n - 1.0));
    N2.push_back(n * n);
    any.push_back(r.N >= 1 ? 1.0 : 0.0);
    first.push_back(r.first_joint ? sphere : 0.0);
    out.per_trial.push_back(r.N);
    sites += r.sites;
    nE += r.nE;
    nR += r.nR;
    nI += r.nI;
    out.blowup_ok = out.blowup_ok && r.blowup_ok;
  }
  auto est = [](const std::vector<double>& x) { return stats::Estimate{stats::mean(x), stats::stderr_of_mean(x)}; };
  out.symmetry_mean = est(first);
  if (out.exhaustive) {
    out.mean_N = est(N);
    out.factorial_second = est(NN1);
    out.second = est(N2);
    out.p_any = est(any);
    out.second_moment_ratio = out.second.value > 0 ? out.mean_N.value * out.mean_N.value / out.second.value : 0.0;
  } else {
    out.mean_N = out.symmetry_mean;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.factorial_second = out.second = out.p_any = {nan, nan};
    out.second_moment_ratio = nan;
  }
  const double s = static_cast<double>(std::max<std::size_t>(sites, 1));
  out.rate_E = static_cast<double>(nE) / s;
  out.rate_R = static_cast<double>(nR) / s;
  out.rate_I = static_cast<double>(nI) / s;
  out.zero_events = std::all_of(out.per_trial.begin(), out.per_trial.end(), [](std::size_t v) { return v == 0; });
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive micro-oracle: n = 1, K = 2, three-atom disorder on B_2.

struct MicroOracleConfig {
  std::vector<double> atoms = {-1.0, 0.0, 1.0};
  double lambda = 1.0;
  cplx zeta{0.3, 0.05};
  /// Forward Green function of every vertex just outside the ball.
  cplx outside = free_gamma(2, cplx{0.3, 0.05});
  double tau = 1.0;
  /// Regular-decay threshold e^{-ℓ}.
  double regular = 0.5;
};

struct MicroMoments {
  double p_any = 0.0;
  double mean = 0.0;
  double second = 0.0;
  [[nodiscard]] bool cauchy_schwarz() const { return second > 0 ? p_any >= mean * mean / second : mean == 0.0; }
};

namespace detail {

inline constexpr int kMicroK = 2;

/// N for one assignment of atoms (root, leaf 1, leaf 2). The outside Γ is
/// deterministic, so the marginality event holds with ξ = Im of it.
inline int micro_count(const MicroOracleConfig& c, double v0, double v1, double v2) {
  const Tree tree({kMicroK, 2, false});
  FiniteTreeRealization r;
  r.potential = {c.lambda * v0, c.lambda * v1, c.lambda * v2};
  r.boundary = {cplx{}, c.outside * double(kMicroK), c.outside * double(kMicroK)};
  const TreeGreens tg(tree, r, c.zeta);
  int N = 0;
  for (std::size_t x = 1; x <= 2; ++x) {
    const bool E = std::abs(tg.diagonal(x)) >= c.tau;
    const bool R = std::abs(tg.root_to_parent_without(x)) >= c.regular;
    N += (E && R) ? 1 : 0;
  }
  return N;
}

}  // namespace detail

inline MicroMoments micro_exact(const MicroOracleConfig& c) {
  MicroMoments m;
  const double w = 1.0 / std::pow(static_cast<double>(c.atoms.size()), 3);
  for (double a : c.atoms)
    for (double b : c.atoms)
      for (double d : c.atoms) {
        const int N = detail::micro_count(c, a, b, d);
        m.p_any += w * (N >= 1);
        m.mean += w * N;
        m.second += w * N * N;
      }
  return m;
}

/// Thresholds at the medians of the enumerated |G(x,x)| and |G^{T_x}(0,0)|
/// so that neither event is trivial.
inline MicroOracleConfig micro_with_median_thresholds(MicroOracleConfig c) {
  std::vector<double> gxx, reg;
  const Tree tree({detail::kMicroK, 2, false});
  for (double a : c.atoms)
    for (double b : c.atoms)
      for (double d : c.atoms) {
        FiniteTreeRealization r;
        r.potential = {c.lambda * a, c.lambda * b, c.lambda * d};
        r.boundary = {cplx{}, c.outside * 2.0, c.outside * 2.0};
        const TreeGreens tg(tree, r, c.zeta);
        gxx.push_back(std::abs(tg.diagonal(1)));
        reg.push_back(std::abs(tg.root_to_parent_without(1)));
      }
  c.tau = stats::median(gxx);
  c.regular = stats::median(reg);
  return c;
}

struct MicroMonteCarlo {
  stats::Estimate p_any, mean, second;
  [[nodiscard]] bool agrees_with(const MicroMoments& m) const {
    auto ok = [](const stats::Estimate& e, double v) { return std::abs(e.value - v) <= 3.0 * e.stderr_; };
    return ok(p_any, m.p_any) && ok(mean, m.mean) && ok(second, m.second);
  }
};

inline MicroMonteCarlo micro_monte_carlo(const MicroOracleConfig& c, std::size_t trials, const RealizationSeed& seed) {
  Engine rng = seed.engine();
  std::vector<double> any(trials), N(trials), N2(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    const double a = c.atoms[uniform_index(rng, c.atoms.size())];
    const double b = c.atoms[uniform_index(rng, c.atoms.size())];
    const double d = c.atoms[uniform_index(rng, c.atoms.size())];
    const int n = detail::micro_count(c, a, b, d);
    any[t] = n >= 1;
    N[t] = n;
    N2[t] = n * n;
  }
  auto est = [](const std::vector<double>& x) { return stats::Estimate{stats::mean(x), stats::stderr_of_mean(x)}; };
  return {est(any), est(N), est(N2)};
}

// ---------------------------------------------------------------------------
// Large-deviation mode on the thinned sphere.

struct LdParams {
  double s = 0.95;
  double gamma = 0.0;
  double eps = 0.01;
  double b = 16.0;
  double Delta = 0.1;
  double kappa = 0.05;
  double ell = 1.0;
};

struct LdConstraints {
  bool kappa_ok = false;    // κ ∈ (0, min{Δ/(16ℓ), 1/4})
  bool eps_ok = false;      // 2ε < min{Δ/24, κΔ/4}
  bool radius_ok = false;   // n > 4⌈1/κ⌉
  bool s_ok = false;        // 1 - s < 1/16
  bool gamma_ok = false;    // γ >= Δ > 0
  [[nodiscard]] bool blowup_guaranteed() const { return kappa_ok && eps_ok && radius_ok; }
};

inline LdConstraints check_ld_constraints(const LdParams& p, int n) {
  LdConstraints c;
  c.kappa_ok = p.kappa > 0.0 && p.kappa < std::min(p.Delta / (16.0 * p.ell), 0.25);
  c.eps_ok = p.eps > 0.0 && 2.0 * p.eps < std::min(p.Delta / 24.0, p.kappa * p.Delta / 4.0);
  c.radius_ok = p.kappa > 0.0 && n > 4 * static_cast<int>(std::ceil(1.0 / p.kappa));
  c.s_ok = 1.0 - p.s < 1.0 / 16.0;
  c.gamma_ok = p.Delta > 0.0 && p.gamma >= p.Delta;
  return c;
}

struct LdScales {
  int n = 0, n_kappa = 0, N_kappa = 0;
};

inline LdScales ld_scales(double kappa, int n) {
  LdScales s;
  s.n = n;
  s.n_kappa = 2 * static_cast<int>(std::floor(kappa * n / 2.0));
  s.N_kappa = n - s.n_kappa;
  return s;
}

struct LdRecord {
  LdScales scales;
  std::vector<cplx> gamma_plus, gamma_minus;  // index j-1 holds Γ±(j)
  double abs_Gxx = 0.0;
  double abs_G_bc = 0.0;       // |G^{T_x}(x_{nκ-1}, x_{nκ-1})|
  double abs_G_regular = 0.0;  // |G^{T_x}(0, x_{nκ-1})|
  double abs_G0x = 0.0;
  double tau = 0.0;
  bool E = false, L_bc = false, L_bands = false, R_bc = false, R = false;
  [[nodiscard]] bool L() const { return L_bc && L_bands; }
  [[nodiscard]] bool D() const { return E && L() && R; }
};

inline void decide(LdRecord& rec, const LdParams& p) {
  const int Nk = rec.scales.N_kappa, nk = rec.scales.n_kappa;
  rec.E = rec.abs_Gxx >= rec.tau;
  rec.L_bc = std::abs(rec.gamma_plus[Nk - 1]) <= p.b / 2 && std::abs(rec.gamma_minus[Nk - 1]) <= p.b / 2;
  rec.L_bands = true;
  for (const auto* arr : {&rec.gamma_plus, &rec.gamma_minus}) {
    double log_prod = 0.0;
    for (int k = 1; k <= Nk; ++k) {
      log_prod += std::log(std::abs((*arr)[k - 1]));
      if (k < nk / 2) continue;
      const double centre = -p.gamma * k;
      if (log_prod < centre - p.eps * k || log_prod > centre + p.eps * k) rec.L_bands = false;
    }
  }
  rec.R_bc = rec.abs_G_bc <= p.b / 2;
  rec.R = rec.R_bc && rec.abs_G_regular >= std::exp(-nk * p.ell) && rec.abs_G_regular <= 1.0;
}

inline LdRecord ld_event(const PathSample& p, cplx zeta, const LdParams& params) {
  const int n = static_cast<int>(p.potential.size()) - 1;
  const LdConstraints c = check_ld_constraints(params, n);
  if (!c.radius_ok) throw GeometryError("large-deviation mode needs n > 4*ceil(1/kappa)");
  LdRecord rec;
  rec.scales = ld_scales(params.kappa, n);
  const int nk = rec.scales.n_kappa, Nk = rec.scales.N_kappa;
  auto local = [&](int j) { return p.potential[j] - zeta - p.side[j]; };
  const PathGreens g = path_greens(p, zeta);
  rec.gamma_plus.resize(Nk);
  rec.gamma_minus.resize(Nk);
  for (int j = 1; j <= Nk; ++j) {
    rec.gamma_plus[j - 1] = 1.0 / (local(n - j) - (j > 1 ? rec.gamma_plus[j - 2] : cplx{}));
    rec.gamma_minus[j - 1] = 1.0 / (local(nk - 1 + j) - (j > 1 ? rec.gamma_minus[j - 2] : cplx{}));
  }
  const cplx g_bc = 1.0 / (local(nk - 1) - g.up[nk - 1] - rec.gamma_plus[Nk - 1]);
  cplx reg = g_bc;
  for (int j = 1; j <= nk - 1; ++j) reg *= -g.up[j];
  rec.abs_G_bc = std::abs(g_bc);
  rec.abs_G_regular = std::abs(reg);
  rec.abs_Gxx = std::abs(g.Gxx);
  rec.abs_G0x = std::abs(g.G0x);
  rec.tau = std::exp((params.gamma + 0.75 * params.Delta) * Nk);
  decide(rec, params);
  return rec;
}

struct LdCountReport {
  LdConstraints constraints;
  LdScales scales;
  std::size_t trials = 0;
  stats::Estimate p_E, p_L, p_R, p_D;
  /// K^{N_κ} · P̂(D) as the expected count on the thinned sphere.
  stats::Estimate mean_N;
  bool blowup_ok = true;
};

/// Sampled-site estimates of the thinned-sphere events.
inline LdCountReport count_ld_events(const ResonanceConfig& cfg, const LdParams& params, std::size_t trials,
                                     const RealizationSeed& seed, std::size_t workers = 1) {
  LdCountReport out;
  out.constraints = check_ld_constraints(params, cfg.n);
  if (!out.constraints.radius_ok) throw GeometryError("large-deviation mode needs n > 4*ceil(1/kappa)");
  out.scales = ld_scales(params.kappa, cfg.n);
  out.trials = trials;
  const GammaPool pool = pool_equilibrate(cfg.model, cfg.K, {cfg.E, cfg.eta}, cfg.pool, seed.child(0));
  const cplx zeta{cfg.E, cfg.eta};
  const auto recs = parallel_map(trials, workers, [&](std::size_t t) {
    Engine rng = seed.child({1, t}).engine();
    return ld_event(sample_path(pool, static_cast<std::size_t>(cfg.n), rng), zeta, params);
  });
  std::vector<double> e, l, r, d;
  const double floor = std::exp(0.375 * params.Delta * cfg.n);
  for (const auto& rec : recs) {
    e.push_back(rec.E);
    l.push_back(rec.L());
    r.push_back(rec.R);
    d.push_back(rec.D());
    if (out.constraints.blowup_guaranteed() && rec.D() && rec.abs_G0x < floor * (1.0 - 1e-12)) out.blowup_ok = false;
  }
  auto est = [](const std::vector<double>& x) { return stats::Estimate{stats::mean(x), stats::stderr_of_mean(x)}; };
  out.p_E = est(e);
  out.p_L = est(l);
  out.p_R = est(r);
  out.p_D = est(d);
  const double sphere = std::pow(static_cast<double>(cfg.K), out.scales.N_kappa);
  out.mean_N = {sphere * out.p_D.value, sphere * out.p_D.stderr_};
  return out;
}

// ---------------------------------------------------------------------------

struct TightnessRow {
  double eta = 0.0;
  double xi_alpha = 0.0, xi_beta = 0.0;
  double ratio = 0.0;
  double frac_below_theta = 0.0;
  double median_im = 0.0;
};

/// ξ(α)/ξ(β) down the η ladder, with P̂(Im Γ < θ) and the median Im Γ as the
/// collapse diagnostic.
inline std::vector<TightnessRow> tightness_diagnostic(const DisorderModel& model, int K, double E,
                                                      const std::vector<double>& eta_sequence, double alpha,
                                                      double beta, double theta, const PoolParams& pool,
                                                      const RealizationSeed& seed) {
  if (!(alpha > 0 && alpha < 1 && beta > 0 && beta < 1)) throw std::invalid_argument("tightness: alpha, beta in (0,1)");
  std::vector<TightnessRow> out;
  std::vector<cplx> warm;
  for (std::size_t i = 0; i < eta_sequence.size(); ++i) {
    const GammaPool p = pool_equilibrate(model, K, {E, eta_sequence[i]}, pool.size, pool.sweeps, seed.child(i),
                                         warm.empty() ? nullptr : &warm);
    const auto im = imag_parts(p);
    TightnessRow row;
    row.eta = eta_sequence[i];
    row.xi_alpha = percentile_xi(im, alpha);
    row.xi_beta = percentile_xi(im, beta);
    row.ratio = row.xi_beta > 0 ? row.xi_alpha / row.xi_beta : std::numeric_limits<double>::infinity();
    std::size_t below = 0;
    for (double v : im) below += v < theta;
    row.frac_below_theta = static_cast<double>(below) / static_cast<double>(im.size());
    row.median_im = stats::median(im);
    out.push_back(row);
    warm = p.values;
  }
  return out;
}

/// Σ_{x∈S_n} |G(0,x)|² Σ_{y forward of x} Im Γ(y), a lower bound for Im Γ(0) on any ball.
inline double sphere_ward_sum(const Tree& tree, const TreeGreens& tg, int n) {
  double acc = 0.0;
  for (std::size_t x = tree.level_begin(n); x < tree.level_end(n); ++x) {
    double im = 0.0;
    for (std::size_t c = 0; c < tree.child_count(x); ++c) im += tg.gamma(tree.child_begin(x) + c).imag();
    acc += std::norm(tg.root_to(x)) * im;
  }
  return acc;
}

}  // namespace bethe
