#pragma once

// Subcommand dispatch. Each command turns a validated RunConfig into CSV
// tables plus manifest warnings; run() writes them and picks the exit code.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bethe/bethe.hpp"
#include "bethe/cli/config.hpp"
#include "bethe/cli/output.hpp"
#include "bethe/identities.hpp"

namespace bethe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitViolation = 2;

struct RunResult {
  std::vector<Table> tables;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, std::string>> task_seeds;
  bool violation = false;
};

namespace detail {

inline std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string seed_label(const RealizationSeed& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.stream_path.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(s.stream_path[i]);
  }
  return out + "] " + hex(s.derive());
}

struct Common {
  DisorderModel model;
  int K = 2;
  RealizationSeed seed;
  std::size_t workers = 1;
  PoolParams pool;
  std::vector<double> eta_sequence;
  std::vector<double> E_grid;
  std::vector<double> lambda_grid;

  explicit Common(const RunConfig& c)
      : model(model_from(c)),
        K(static_cast<int>(c.integer("K"))),
        seed(static_cast<std::uint64_t>(c.integer("seed"))),
        workers(c.count("workers")),
        pool{c.count("pool.size"), c.count("pool.sweeps")},
        eta_sequence(c.grid("eta_sequence")),
        E_grid(c.grid("E_grid")),
        lambda_grid(c.grid("lambda_grid")) {
    if (E_grid.empty()) E_grid = {c.number("E")};
    if (lambda_grid.empty()) lambda_grid = {c.number("lambda")};
  }
};

inline FreeEnergyParams free_energy_params(const RunConfig& c, std::size_t workers) {
  FreeEnergyParams p;
  p.s_grid = c.grid("s_grid");
  p.depth = c.count("depth");
  p.chains = c.count("chains");
  p.window_points = c.count("window_points");
  p.bootstrap = c.count("bootstrap");
  p.workers = workers;
  return p;
}

inline Table check_table(const std::string& name) {
  return {name, {"check", "param", "bound", "empirical", "slack", "verdict"}, {}};
}

inline void add_check(Table& t, RunResult& res, const std::string& check, double param, double bound,
                      double empirical, double slack, bool pass) {
  t.add({check, fmt(param), fmt(bound), fmt(empirical), fmt(slack), pass ? "pass" : "fail"});
  if (!pass) {
    res.violation = true;
    res.warnings.push_back("bound violation: " + check + " at " + fmt(param));
  }
}

inline void add_info(Table& t, const std::string& check, double param, double value) {
  t.add({check, fmt(param), "", fmt(value), "", "info"});
}

inline Table free_energy_table(const FreeEnergyCurve& curve) {
  Table t{"free_energy.csv", {"s", "phi", "stderr", "n", "eta", "flagged"}, {}};
  for (const auto& p : curve.points) {
    t.add({fmt(p.s), fmt(p.phi), fmt(p.stderr_), fmt(curve.depth), fmt(curve.energy.eta), fmt(p.heavy_tail)});
  }
  return t;
}

inline void free_energy_warnings(const FreeEnergyCurve& curve, RunResult& res) {
  for (const auto& p : curve.points) {
    if (p.heavy_tail) res.warnings.push_back("heavy tail at s = " + fmt(p.s));
  }
  if (!curve.pool_equilibrated) res.warnings.push_back("pool not equilibrated at E = " + fmt(curve.energy.E));
}

// ---------------------------------------------------------------------------

inline RunResult cmd_spectrum(const RunConfig& c) {
  const Common k(c);
  RunResult res;
  Table t{"spectrum.csv", {"K", "lambda", "dist", "full_line", "lo", "hi"}, {}};
  for (double l : k.lambda_grid) {
    const auto s = spectrum_interval(with_lambda(k.model, l), k.K);
    t.add({fmt(k.K), fmt(l), k.model.family_name(), fmt(s.full_line), fmt(s.lo), fmt(s.hi)});
  }
  res.tables.push_back(std::move(t));
  return res;
}

inline RunResult cmd_lyapunov(const RunConfig& c) {
  const Common k(c);
  RunResult res;
  const std::size_t nE = k.E_grid.size();
  std::vector<DisorderModel> models;
  for (double l : k.lambda_grid) models.push_back(with_lambda(k.model, l));
  const auto rows = parallel_map(nE * models.size(), k.workers, [&](std::size_t cell) {
    const std::size_t li = cell / nE, ei = cell % nE;
    if (models[li].is_deterministic()) {
      LyapunovBoundary b;
      b.L = {free_lyapunov(k.K, k.E_grid[ei]), 0.0};
      b.ladder.push_back({0.0, b.L, true});
      return b;
    }
    return lyapunov_boundary(models[li], k.K, k.E_grid[ei], k.eta_sequence, k.pool, k.seed.child({li, ei}));
  });
  Table t{"lyapunov.csv", {"E", "lambda", "eta", "L", "stderr"}, {}};
  for (std::size_t cell = 0; cell < rows.size(); ++cell) {
    const std::size_t li = cell / nE, ei = cell % nE;
    const auto& b = rows[cell];
    t.add({fmt(k.E_grid[ei]), fmt(k.lambda_grid[li]), fmt(b.ladder.back().eta), fmt(b.L.value), fmt(b.L.stderr_)});
    const std::string where = " at E = " + fmt(k.E_grid[ei]) + ", lambda = " + fmt(k.lambda_grid[li]);
    if (!b.converged) res.warnings.push_back("eta ladder not converged" + where);
    if (!b.equilibrated) res.warnings.push_back("pool not equilibrated" + where);
    if (!models[li].is_deterministic()) {
      res.task_seeds.emplace_back("lyapunov" + where, seed_label(k.seed.child({li, ei})));
    }
  }
  res.tables.push_back(std::move(t));
  return res;
}

inline RunResult cmd_free_energy(const RunConfig& c, bool with_rate) {
  const Common k(c);
  RunResult res;
  const auto curve = estimate_free_energy(k.model, k.K, {c.number("E"), c.number("eta")},
                                          free_energy_params(c, k.workers), k.pool, k.seed);
  res.task_seeds.emplace_back("free energy", seed_label(k.seed));
  free_energy_warnings(curve, res);
  res.tables.push_back(free_energy_table(curve));
  if (with_rate) {
    const auto rate = legendre_rate(curve);
    Table t{"rate_function.csv", {"gamma", "I", "s_argmin"}, {}};
    for (const auto& p : rate.points) t.add({fmt(p.gamma), fmt(p.I), fmt(p.s_min)});
    res.tables.push_back(std::move(t));
  }
  return res;
}

inline RunResult cmd_dos(const RunConfig& c) {
  const Common k(c);
  RunResult res;
  const auto rows = estimate_dos(k.model, k.K, k.E_grid, k.eta_sequence, {k.pool, 0, k.workers}, k.seed);
  Table t{"dos.csv", {"E", "eta", "rooted_D", "full_D", "stderr", "converged"}, {}};
  for (std::size_t e = 0; e < rows.size(); ++e) {
    const auto& r = rows[e];
    t.add({fmt(r.E), fmt(r.eta), fmt(r.rooted.value), fmt(r.full.value),
           fmt(std::max(r.rooted.stderr_, r.full.stderr_)), fmt(r.converged)});
    if (!r.converged) res.warnings.push_back("density not converged at E = " + fmt(r.E));
    if (!r.equilibrated) res.warnings.push_back("pool not equilibrated at E = " + fmt(r.E));
  }
  res.task_seeds.emplace_back("dos (child {e, eta index})", seed_label(k.seed));
  res.tables.push_back(std::move(t));
  return res;
}

inline RunResult cmd_phase_scan(const RunConfig& c) {
  const Common k(c);
  RunResult res;
  PhaseBudgets b;
  b.pool = k.pool;
  b.eta_sequence = k.eta_sequence;
  b.free_energy = free_energy_params(c, 1);
  b.phi_eta = c.number("eta");
  const auto d = scan_phase_diagram(k.model, k.K, k.E_grid, k.lambda_grid, b, k.seed, k.workers);
  Table t{"phase.csv", {"E", "lambda", "L", "L_stderr", "phi1", "phi1_spread", "label", "margins"}, {}};
  for (std::size_t li = 0; li < d.lambda_grid.size(); ++li) {
    for (std::size_t ei = 0; ei < d.E_grid.size(); ++ei) {
      const auto& p = d.at(li, ei);
      const std::string margins =
          "lyapunov=" + fmt(p.margin_lyapunov) + ";phi1=" + (p.has_phi1 ? fmt(p.margin_phi1) : std::string());
      t.add({fmt(p.E), fmt(p.lambda), fmt(p.L.value), fmt(p.L.stderr_), p.has_phi1 ? fmt(p.phi1.value) : "",
             p.has_phi1 ? fmt(p.phi1.spread) : "", label_name(p.label), margins});
      const std::string where = " at E = " + fmt(p.E) + ", lambda = " + fmt(p.lambda);
      if (!p.converged) res.warnings.push_back("eta ladder not converged" + where);
      if (!p.equilibrated) res.warnings.push_back("pool not equilibrated" + where);
      if (p.heavy_tail) res.warnings.push_back("heavy tail in the free energy" + where);
      res.task_seeds.emplace_back("cell" + where, seed_label(k.seed.child({li, ei})));
    }
  }
  res.tables.push_back(std::move(t));
  return res;
}

inline RunResult cmd_edge(const RunConfig& c) {
  const Common k(c);
  RunResult res;
  const auto a = edge_analysis(k.model, k.K, c.grid("edge.E_grid"), k.pool, k.eta_sequence, k.seed, k.workers);
  Table t{"edge.csv", {"E", "L", "stderr", "bound", "E_lambda", "lambda_star", "below_bound"}, {}};
  for (std::size_t i = 0; i < a.E_grid.size(); ++i) {
    t.add({fmt(a.E_grid[i]), fmt(a.L[i].value), fmt(a.L[i].stderr_), fmt(a.bound), fmt(a.E_lambda),
           fmt(a.lambda_star), fmt(a.L[i].value <= a.bound + 3.0 * a.L[i].stderr_)});
  }
  if (a.lambda > a.lambda_star) res.warnings.push_back("lambda above the critical edge value " + fmt(a.lambda_star));
  if (!a.bound_holds) res.warnings.push_back("near-edge Lyapunov estimate above the free bound");
  if (!a.edge_ac) res.warnings.push_back("edge not classified absolutely continuous");
  res.task_seeds.emplace_back("edge (child {E index})", seed_label(k.seed));
  res.tables.push_back(std::move(t));
  return res;
}

inline ResonanceConfig resonance_config(const RunConfig& c, const Common& k) {
  ResonanceConfig r;
  r.n = static_cast<int>(c.count("resonance.n"));
  r.K = k.K;
  r.model = k.model;
  r.E = c.number("E");
  r.eta = c.number("eta");
  r.alpha = c.number("alpha");
  r.L_hat = c.optional_number("resonance.L_hat");
  r.tau = c.optional_number("resonance.tau");
  r.pool = k.pool;
  return r;
}

inline RunResult cmd_resonance(const RunConfig& c) {
  const Common k(c);
  RunResult res;
  const ResonanceConfig rc = resonance_config(c, k);
  const std::size_t trials = c.count("trials");
  Table summary{"resonance_summary.csv", {"quantity", "value", "stderr"}, {}};
  Table checks = check_table("resonance_checks.csv");
  auto row = [&](const std::string& q, double v, double se) { summary.add({q, fmt(v), fmt(se)}); };
  if (c.raw("resonance.mode") == "ld") {
    LdParams p;
    p.s = c.number("ld.s");
    p.gamma = c.number("ld.gamma");
    p.eps = c.number("ld.eps");
    p.b = c.number("ld.b");
    p.Delta = c.number("ld.Delta");
    p.kappa = c.number("ld.kappa");
    p.ell = c.number("ld.ell");
    const auto rep = count_ld_events(rc, p, trials, k.seed, k.workers);
    row("n_kappa", rep.scales.n_kappa, 0);
    row("N_kappa", rep.scales.N_kappa, 0);
    row("p_E", rep.p_E.value, rep.p_E.stderr_);
    row("p_L", rep.p_L.value, rep.p_L.stderr_);
    row("p_R", rep.p_R.value, rep.p_R.stderr_);
    row("p_D", rep.p_D.value, rep.p_D.stderr_);
    row("mean_N", rep.mean_N.value, rep.mean_N.stderr_);
    const auto& cs = rep.constraints;
    for (const auto& [name, ok] : {std::pair{"kappa window", cs.kappa_ok}, std::pair{"eps window", cs.eps_ok},
                                   std::pair{"radius", cs.radius_ok}, std::pair{"s window", cs.s_ok},
                                   std::pair{"gamma >= Delta", cs.gamma_ok}}) {
      checks.add({std::string("constraint: ") + name, "", "", fmt(ok), "", ok ? "satisfied" : "not satisfied"});
      if (!ok) res.warnings.push_back(std::string("large-deviation constraint not satisfied: ") + name);
    }
    add_check(checks, res, "blow-up on D events", p.Delta, std::exp(0.375 * p.Delta * rc.n), rep.blowup_ok ? 1 : 0,
              0, rep.blowup_ok);
    res.violation = false;  // informational outside verify
  } else {
    const auto st = count_resonances(rc, trials, k.seed, k.workers);
    Table per{"resonance_trials.csv", {"trial", "N"}, {}};
    for (std::size_t t = 0; t < st.per_trial.size(); ++t) per.add({fmt(t), fmt(st.per_trial[t])});
    res.tables.push_back(std::move(per));
    const auto& th = st.thresholds;
    row("L_hat", th.L_hat, 0);
    row("delta", th.delta, 0);
    row("ell", th.ell, 0);
    row("tau", th.tau, 0);
    row("xi", th.xi, 0);
    row("exhaustive", st.exhaustive ? 1 : 0, 0);
    row("mean_N", st.mean_N.value, st.mean_N.stderr_);
    row("symmetry_mean", st.symmetry_mean.value, st.symmetry_mean.stderr_);
    row("factorial_second", st.factorial_second.value, st.factorial_second.stderr_);
    row("second", st.second.value, st.second.stderr_);
    row("p_any", st.p_any.value, st.p_any.stderr_);
    row("second_moment_ratio", st.second_moment_ratio, 0);
    row("rate_E", st.rate_E, 0);
    row("rate_R", st.rate_R, 0);
    row("rate_I", st.rate_I, 0);
    if (st.zero_events) res.warnings.push_back("no joint resonance events in any trial");
    add_check(checks, res, "symmetry identity", rc.n, st.symmetry_mean.value, st.mean_N.value,
              3.0 * std::hypot(st.mean_N.stderr_, st.symmetry_mean.stderr_), st.symmetry_agrees());
    add_check(checks, res, "blow-up on E and R", rc.n, th.tau * std::exp(-th.ell * rc.n), st.blowup_ok ? 1 : 0, 0,
              st.blowup_ok);
    if (st.exhaustive && st.second.value > 0) {
      const double cs = st.mean_N.value * st.mean_N.value / st.second.value;
      add_check(checks, res, "p_any >= E[N]^2/E[N^2]", rc.n, cs, st.p_any.value, 0, st.p_any.value >= cs);
    }
    res.violation = false;
  }
  res.task_seeds.emplace_back("resonance pool", seed_label(k.seed.child(0)));
  res.tables.push_back(std::move(summary));
  res.tables.push_back(std::move(checks));
  return res;
}

// ---------------------------------------------------------------------------
// verify suites

inline RunResult verify_greens(const RunConfig& c) {
  const Common k(c);
  RunResult res;
  const auto rep = greens_identities({k.model}, c.count("realizations"),
                                     static_cast<int>(c.count("geometry.depth")), k.seed);
  Table t = check_table("verify_greens-identities.csv");
  const double n = static_cast<double>(rep.realizations);
  add_check(t, res, "recursion vs dense solve (relative)", n, IdentityReport::kOracleTol, rep.oracle, 0,
            rep.oracle <= IdentityReport::kOracleTol);
  add_check(t, res, "sum rule residual times eta^2", n, IdentityReport::kSumRuleTol, rep.sum_rule, 0,
            rep.sum_rule <= IdentityReport::kSumRuleTol);
  add_check(t, res, "factorization through removed vertex", n, IdentityReport::kFactorTol, rep.factorization, 0,
            rep.factorization <= IdentityReport::kFactorTol);
  add_check(t, res, "Krein coefficient two routes", n, IdentityReport::kKreinTol, rep.krein, 0,
            rep.krein <= IdentityReport::kKreinTol);
  res.task_seeds.emplace_back("realizations (child {i})", seed_label(k.seed));
  res.tables.push_back(std::move(t));
  return res;
}

inline RunResult verify_weak_l1(const RunConfig& c) {
  const Common k(c);
  RunResult res;
  const auto rep = weak_l1_suite(k.model, {k.K, static_cast<int>(c.count("geometry.depth")), false},
                                 {c.number("E"), c.number("eta")}, c.count("trials"), k.seed);
  Table t = check_table("verify_weak-l1.csv");
  for (const auto& ch : rep.checks) add_check(t, res, ch.name, ch.param, ch.bound, ch.empirical, 5.0 * ch.stderr_, ch.pass);
  add_info(t, "Krein coefficient gap", 0, rep.krein_gap);
  res.task_seeds.emplace_back("weak-L1 suite", seed_label(k.seed));
  res.tables.push_back(std::move(t));
  return res;
}

inline RunResult verify_ldp(const RunConfig& c) {
  const Common k(c);
  RunResult res;
  const ComplexEnergy z{c.number("E"), c.number("eta")};
  const auto curve = estimate_free_energy(k.model, k.K, z, free_energy_params(c, k.workers), k.pool, k.seed.child(0));
  free_energy_warnings(curve, res);
  const GammaPool pool = pool_equilibrate(k.model, k.K, z, k.pool, k.seed.child(0).child(0));
  LdpParams p;
  p.s = c.number("ldp.s");
  p.eps = c.number("ldp.eps");
  p.n_grid.clear();
  for (double n : c.grid("ldp.n_grid")) {
    if (!(n >= 1) || n != std::floor(n)) c.fail("ldp.n_grid", "lengths must be positive integers");
    p.n_grid.push_back(static_cast<std::size_t>(n));
  }
  p.chains = c.count("chains");
  p.workers = k.workers;
  const auto rep = ldp_bounds_check(pool, curve, p, k.seed.child(1));
  Table t = check_table("verify_ldp.csv");
  add_check(t, res, "tilted law at s = 0 equals base law", 0, 0, rep.s0_exact ? 0 : 1, 0, rep.s0_exact);
  for (const auto& r : rep.tail) add_check(t, res, "upper tail", static_cast<double>(r.n), r.bound, r.p, 5.0 * r.stderr_, r.pass);
  add_check(t, res, "kappa margin", p.eps, 0, rep.kappa.kappa(), 0, rep.kappa.kappa() > 0);
  add_info(t, "gamma", p.s, rep.gamma);
  add_info(t, "rate I(gamma)", p.s, rep.I);
  add_info(t, "band-exit slope", p.s, rep.exit_slope);
  add_info(t, "tilted ESS fraction", p.s, rep.tilted_ess_fraction);
  add_info(t, "psi max spread over n", p.s, rep.psi_max_spread);
  if (rep.insufficient_decay) res.warnings.push_back("band-exit fraction decays slower than kappa/3");
  if (rep.tilted_ess_fraction < 0.05) res.warnings.push_back("tilted effective sample size below 5%");
  res.task_seeds.emplace_back("free energy", seed_label(k.seed.child(0)));
  res.task_seeds.emplace_back("ldp chains", seed_label(k.seed.child(1)));
  res.tables.push_back(std::move(t));
  return res;
}

inline RunResult verify_lifshitz(const RunConfig& c) {
  const Common k(c);
  RunResult res;
  const auto rep = lifshitz_check(k.model, k.K, static_cast<int>(c.count("lifshitz.R")), c.grid("lifshitz.delta_grid"),
                                  c.count("trials"), k.seed, k.workers);
  Table t = check_table("verify_lifshitz.csv");
  for (const auto& r : rep.rows) {
    if (r.fitted) {
      add_check(t, res, "small-eigenvalue tail", r.delta, r.bound, r.p, 5.0 * r.stderr_, r.bound_ok);
    } else {
      add_info(t, "small-eigenvalue tail (not fitted)", r.delta, r.p);
    }
  }
  add_check(t, res, "fitted bins", 0, 2, static_cast<double>(rep.fitted_bins), 0, rep.fitted_bins >= 2);
  add_check(t, res, "tail exponent", 0, 1.2, rep.exponent, 0, rep.fitted_bins >= 2 && rep.exponent >= 1.2);
  add_check(t, res, "monotone in delta", 0, 0, rep.monotone ? 1 : 0, 0, rep.monotone);
  add_info(t, "exponent stderr", 0, rep.exponent_stderr);
  if (rep.all_zero) res.warnings.push_back("no eigenvalue fell in any bin");
  res.task_seeds.emplace_back("lifshitz trials (child {t})", seed_label(k.seed));
  res.tables.push_back(std::move(t));
  return res;
}

inline RunResult verify_ray_sum(const RunConfig& c) {
  const Common k(c);
  RunResult res;
  const auto rep = ray_sum_check(k.model, k.K, static_cast<int>(c.count("ray.R")), c.number("ray.alpha"),
                                 c.count("trials"), k.seed, k.workers);
  Table t = check_table("verify_ray-sum.csv");
  add_check(t, res, "ray-sum tail", rep.alpha, rep.bound, rep.p, 5.0 * rep.stderr_, rep.p <= rep.bound + 5.0 * rep.stderr_);
  add_check(t, res, "ray sums nonnegative", rep.alpha, 0, rep.min_sum_seen, 0, rep.nonnegative);
  res.task_seeds.emplace_back("ray trials (child {t})", seed_label(k.seed));
  res.tables.push_back(std::move(t));
  return res;
}

inline RunResult verify_fekete(const RunConfig& c) {
  const Common k(c);
  RunResult res;
  const GammaPool pool = pool_equilibrate(k.model, k.K, {c.number("E"), c.number("eta")}, k.pool, k.seed.child(0));
  const auto rep = fekete_check(pool, c.number("fekete.s"), c.count("fekete.depth"), c.count("chains"),
                                c.count("fekete.fit_limit"), k.seed.child(1), k.workers);
  Table t = check_table("verify_fekete.csv");
  add_check(t, res, "near-multiplicativity", rep.s, rep.log_c, rep.worst_excess + rep.log_c, 0, rep.pass);
  add_info(t, "pairs checked", rep.s, static_cast<double>(rep.pairs_checked));
  res.task_seeds.emplace_back("pool", seed_label(k.seed.child(0)));
  res.task_seeds.emplace_back("chains", seed_label(k.seed.child(1)));
  res.tables.push_back(std::move(t));
  return res;
}

}  // namespace detail

inline RunResult execute(const RunConfig& c) {
  const std::string& s = c.subcommand;
  if (s == "spectrum") return detail::cmd_spectrum(c);
  if (s == "lyapunov") return detail::cmd_lyapunov(c);
  if (s == "free-energy") return detail::cmd_free_energy(c, false);
  if (s == "rate-function") return detail::cmd_free_energy(c, true);
  if (s == "dos") return detail::cmd_dos(c);
  if (s == "phase-scan") return detail::cmd_phase_scan(c);
  if (s == "edge") return detail::cmd_edge(c);
  if (s == "resonance") return detail::cmd_resonance(c);
  if (s == "verify") {
    const std::string& v = c.argument;
    if (v == "greens-identities") return detail::verify_greens(c);
    if (v == "weak-l1") return detail::verify_weak_l1(c);
    if (v == "ldp") return detail::verify_ldp(c);
    if (v == "lifshitz") return detail::verify_lifshitz(c);
    if (v == "ray-sum") return detail::verify_ray_sum(c);
    if (v == "fekete") return detail::verify_fekete(c);
  }
  throw ConfigError("", "unknown subcommand '" + s + "'");
}

/// Builds the effective config of a previous run; later flags still apply.
inline RunConfig config_from_manifest(const std::string& path, const std::vector<std::string>& flags) {
  const auto j = nlohmann::json::parse(read_file(path));
  RunConfig c;
  c.subcommand = j.at("subcommand").get<std::string>();
  if (c.subcommand == "rerun") throw ConfigError("", path + ": manifest of a rerun names no original subcommand");
  if (j.contains("argument")) c.argument = j.at("argument").get<std::string>();
  for (const auto& [k, v] : j.at("config").items()) c.set(k, v.get<std::string>(), path);
  for (std::size_t i = 0; i + 1 < flags.size(); i += 2) {
    if (flags[i].rfind("--", 0) != 0) throw ConfigError("", "unexpected argument '" + flags[i] + "'");
    c.set(flags[i].substr(2), flags[i + 1], "flag " + flags[i]);
  }
  if (flags.size() % 2) throw ConfigError("", "flag " + flags.back() + " needs a value");
  return c;
}

/// Runs a validated config and writes CSVs plus manifest.json into `out`.
inline int run(const RunConfig& c, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  validate(c);
  const std::filesystem::path out = c.raw("out");
  std::filesystem::create_directories(out);
  RunResult res = execute(c);
  Manifest m;
  m.subcommand = c.subcommand;
  m.argument = c.argument;
  m.config = c.values();
  m.warnings = res.warnings;
  m.task_seeds = res.task_seeds;
  for (const auto& t : res.tables) {
    atomic_write(out / t.name, t.render());
    m.outputs.push_back(t.name);
  }
  m.exit_code = res.violation ? kExitViolation : kExitOk;
  m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  atomic_write(out / "manifest.json", m.to_json().dump(2) + "\n");
  for (const auto& w : res.warnings) err << "warning: " << w << "\n";
  return m.exit_code;
}

inline void usage(std::ostream& os) {
  os << "usage: bethe <subcommand> [args] [--key value ...] [--config file]\n"
        "subcommands: spectrum lyapunov free-energy rate-function dos phase-scan edge resonance\n"
        "             verify <greens-identities|weak-l1|ldp|lifshitz|ray-sum|fekete>\n"
        "             rerun <manifest.json>\n"
        "keys:\n";
  for (const auto& k : key_table()) {
    os << "  " << k.key << " (default '" << k.value << "'): " << k.help << "\n";
  }
}

/// Full command-line entry point; never throws.
inline int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
      usage(args.empty() ? err : out);
      return args.empty() ? kExitError : kExitOk;
    }
    if (args[0] == "rerun") {
      if (args.size() < 2) throw ConfigError("", "rerun needs a manifest path");
      return run(config_from_manifest(args[1], {args.begin() + 2, args.end()}), err);
    }
    return run(parse_args(args), err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitError;
}

}  // namespace bethe::cli
