// Runs the fifteen acceptance criteria and prints one PASS/FAIL line each.
// Tolerances and budgets are the ones the criteria state; exit status is the
// number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "bethe/bethe.hpp"
#include "bethe/cli/app.hpp"

using namespace bethe;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string printf_string(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

const double kLog2 = std::log(2.0);
const double kHalfLog2 = 0.5 * std::log(2.0);

Outcome c1_free_branch() {
  const cplx a = free_gamma(2, ComplexEnergy{0.0, 1.0});
  const cplx b = free_gamma(2, ComplexEnergy{0.0, 0.0});
  const double ea = std::abs(a - cplx{0.0, 0.5});
  const double eb = std::abs(b - cplx{0.0, 1.0 / std::sqrt(2.0)});
  return {ea <= 1e-12 && eb <= 1e-12, printf_string("|G(i) - i/2| = %.1e, |G(0+i0) - i/sqrt2| = %.1e", ea, eb)};
}

Outcome c2_piecewise_lyapunov() {
  double worst = 0.0;
  for (double E : {0.0, 1.0, 2.8}) worst = std::max(worst, std::abs(free_lyapunov(2, E) - kHalfLog2));
  const double at3 = std::abs(free_lyapunov(2, 3.0) - kLog2);
  const bool above = free_lyapunov(2, 4.0) > kLog2;
  const double star = free_ac_crossing(2, 0.0, 4.0);
  const bool ok = worst <= 1e-9 && at3 <= 1e-9 && above && std::abs(star - 3.0) <= 1e-3;
  return {ok, printf_string("band residual %.1e, |L(3) - log2| = %.1e, L(4) > log2: %s, E* = %.6f", worst, at3,
                            above ? "yes" : "no", star)};
}

IdentityReport& identities() {
  static IdentityReport rep = greens_identities(
      {DisorderModel::cauchy(0.0, 1.0, 0.5), DisorderModel::uniform(1.0)}, 100, 6, RealizationSeed(3));
  return rep;
}

Outcome c3_oracle() {
  const auto& r = identities();
  return {r.oracle <= 1e-10, printf_string("max relative discrepancy %.2e over %zu realizations", r.oracle,
                                           r.realizations)};
}

Outcome c4_sum_rule() {
  const auto& r = identities();
  return {r.sum_rule <= 1e-9, printf_string("max eta^2 * residual %.2e", r.sum_rule)};
}

Outcome c5_dos() {
  DosParams p;
  p.pool = {200, 80};
  const auto rows = estimate_dos(DisorderModel::none(), 2, {0.0}, {1e-5}, p, RealizationSeed(5));
  const double rooted = rows[0].rooted.value, full = rows[0].full.value;
  const bool ok = std::abs(rooted - 0.22508) <= 1e-3 && std::abs(full - 0.15005) <= 1e-3;
  return {ok, printf_string("rooted %.5f, full %.5f", rooted, full)};
}

Outcome c6_cauchy_lyapunov() {
  bool ok = true;
  double worst_z = 0.0, worst_se = 0.0;
  std::size_t cell = 0;
  for (double lambda : {0.1, 0.3}) {
    for (double E : {0.0, 1.0, 2.0}) {
      const auto lb = lyapunov_boundary(DisorderModel::cauchy(0.0, 1.0, lambda), 2, E, {1e-2, 1e-3, 1e-4},
                                        {100000, 40}, RealizationSeed(6).child(cell++));
      const double exact = cauchy_lyapunov(2, E, lambda);
      const double z = std::abs(lb.L.value - exact) / lb.L.stderr_;
      worst_z = std::max(worst_z, z);
      worst_se = std::max(worst_se, lb.L.stderr_);
      ok = ok && z <= 3.0 && lb.L.stderr_ <= 5e-3;
    }
  }
  return {ok, printf_string("worst |L - exact|/stderr %.2f, largest stderr %.2e", worst_z, worst_se)};
}

FreeEnergyParams curve_params() {
  FreeEnergyParams p;
  p.depth = 100;
  p.chains = 10000;
  p.bootstrap = 200;
  return p;
}

const PoolParams kCurvePool{20000, 40};
const ComplexEnergy kCurveEnergy{0.0, 1e-3};

FreeEnergyCurve& cauchy_curve() {
  static FreeEnergyCurve c = estimate_free_energy(DisorderModel::cauchy(0.0, 1.0, 0.3), 2, kCurveEnergy,
                                                  curve_params(), kCurvePool, RealizationSeed(7));
  return c;
}

Outcome c7_sandwich() {
  const auto& c = cauchy_curve();
  const double L = c.lyapunov.value;
  bool ok = c.points[c.index_of(0.0)].phi == 0.0;
  std::string detail = printf_string("phi(0) = %g; ", c.points[c.index_of(0.0)].phi);
  for (double s : {0.25, 0.5, 0.75}) {
    const auto& p = c.points[c.index_of(s)];
    const double lo = -s * L - 3.0 * p.stderr_, hi = -s * kHalfLog2 + 3.0 * p.stderr_;
    ok = ok && lo <= p.phi && p.phi <= hi;
    detail += printf_string("%.4f <= phi(%.2f) = %.4f <= %.4f; ", lo, s, p.phi, hi);
  }
  const auto d = slope_at_zero(c);
  const double z = std::abs(d.value + L) / std::hypot(d.stderr_, c.lyapunov.stderr_);
  ok = ok && z <= 3.0;
  detail += printf_string("slope %.4f vs -L %.4f (%.2f sigma)", d.value, -L, z);
  return {ok, detail};
}

Outcome c8_rate() {
  const auto& c = cauchy_curve();
  const auto r = legendre_rate(c);
  double min_I = 0.0, min_second = 0.0;
  for (const auto& p : r.points) min_I = std::min(min_I, p.I);
  for (std::size_t i = 1; i + 1 < r.points.size(); ++i) {
    min_second = std::min(min_second, r.points[i + 1].I - 2.0 * r.points[i].I + r.points[i - 1].I);
  }
  const auto at_L = rate_at(c, c.lyapunov);
  const bool ok = min_I >= -1e-9 && min_second >= -1e-9 && at_L.value <= 2.0 * at_L.stderr_;
  return {ok, printf_string("min I %.2e, min second difference %.2e, I(L) = %.2e (2 sigma = %.2e)", min_I, min_second,
                            at_L.value, 2.0 * at_L.stderr_)};
}

Outcome c9_typical_decay() {
  const auto pool = pool_equilibrate(DisorderModel::cauchy(0.0, 1.0, 0.3), 2, {0.0, 1e-4}, kCurvePool,
                                     RealizationSeed(9).child(0));
  const double L = estimate_lyapunov(pool).value;
  const std::size_t n = 200, chains = 10000;
  const auto set = sample_chain_logs(pool, n - 1, chains, {n - 1}, RealizationSeed(9).child(1));
  std::size_t inside = 0;
  for (std::size_t c = 0; c < chains; ++c) inside += std::abs(set.at(c, 0) / static_cast<double>(n) + L) <= 0.05;
  const double frac = static_cast<double>(inside) / static_cast<double>(chains);
  return {frac >= 0.9, printf_string("%.4f of chains within 0.05 of -L = %.4f (need 0.9)", frac, -L)};
}

Outcome c10_weak_l1() {
  bool ok = true;
  std::string detail;
  std::size_t i = 0;
  for (const auto& m : {DisorderModel::uniform(1.0), DisorderModel::cauchy(0.0, 1.0, 1.0)}) {
    const auto rep = weak_l1_suite(m, {2, 5, false}, {0.3, 1e-2}, 100000, RealizationSeed(10).child(i++));
    std::size_t failed = 0;
    for (const auto& c : rep.checks) failed += !c.pass;
    ok = ok && rep.pass();
    detail += printf_string("%s: %zu/%zu checks pass; ", m.family_name().c_str(), rep.checks.size() - failed,
                            rep.checks.size());
  }
  return {ok, detail};
}

Outcome c11_micro_oracle() {
  const auto c = micro_with_median_thresholds(MicroOracleConfig{});
  const auto exact = micro_exact(c);
  const auto mc = micro_monte_carlo(c, 20000, RealizationSeed(11));
  const bool ok = mc.agrees_with(exact) && exact.cauchy_schwarz();
  return {ok, printf_string("P(N>=1) %.4f vs %.4f, E[N] %.4f vs %.4f, E[N^2] %.4f vs %.4f, E[N]^2/E[N^2] = %.4f",
                            exact.p_any, mc.p_any.value, exact.mean, mc.mean.value, exact.second, mc.second.value,
                            exact.mean * exact.mean / exact.second)};
}

Outcome c12_edge() {
  const double lambda = 0.05;
  const double E_lambda = -2.0 * std::sqrt(2.0) - lambda;
  const auto a = edge_analysis(DisorderModel::uniform(lambda), 2, stats::linspace(E_lambda, E_lambda + 0.02, 5),
                               {20000, 40}, {1e-2, 1e-3, 1e-4}, RealizationSeed(12));
  double worst = -1e300;
  for (const auto& l : a.L) worst = std::max(worst, l.value + 3.0 * l.stderr_);
  const bool ok = lambda < a.lambda_star && a.bound_holds && a.bound < kLog2 && a.edge_ac;
  return {ok, printf_string("lambda* = %.5f, bound L0(E_l - l) = %.6f, max L + 3 sigma = %.6f, log 2 = %.6f",
                            a.lambda_star, a.bound, worst, kLog2)};
}

Outcome c13_lifshitz() {
  const auto rep = lifshitz_check(DisorderModel::uniform(0.5), 2, 5, stats::linspace(0.55, 1.0, 10), 20000,
                                  RealizationSeed(13));
  const bool ok = rep.fitted_bins >= 2 && rep.exponent >= 1.2 && rep.bound_ok;
  return {ok, printf_string("exponent %.3f +- %.3f over %zu bins, 3/2 bound respected: %s", rep.exponent,
                            rep.exponent_stderr, rep.fitted_bins, rep.bound_ok ? "yes" : "no")};
}

Outcome c14_ldp() {
  const auto& curve = cauchy_curve();
  // Same stream path as estimate_free_energy's pool.
  const auto pool = pool_equilibrate(DisorderModel::cauchy(0.0, 1.0, 0.3), 2, kCurveEnergy, kCurvePool,
                                     RealizationSeed(7).child(0));
  LdpParams p;
  p.s = 0.5;
  p.eps = 0.05;
  p.n_grid = {50, 100, 200};
  p.chains = 10000;
  const auto rep = ldp_bounds_check(pool, curve, p, RealizationSeed(14));
  const bool ok = rep.s0_exact && rep.tail_pass() && rep.kappa.kappa() > 0.0;
  std::string detail = printf_string("s=0 exact: %s; kappa = %.4f; ", rep.s0_exact ? "yes" : "no", rep.kappa.kappa());
  for (const auto& r : rep.tail) detail += printf_string("n=%zu P=%.4f bound=%.3g; ", r.n, r.p, r.bound);
  return {ok, detail};
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  return fs::exists(a) && fs::exists(b) && cli::read_file(a.string()) == cli::read_file(b.string());
}

Outcome c15_reproducibility() {
  const fs::path root = fs::temp_directory_path() / "bethe_acceptance_repro";
  fs::remove_all(root);
  const std::vector<std::vector<std::string>> runs = {
      {"lyapunov", "--dist", "cauchy", "--lambda_grid", "0.1,0.3", "--E_grid", "0,1,2", "--pool.size", "2000",
       "--pool.sweeps", "20", "--eta_sequence", "1e-2,1e-3"},
      {"rate-function", "--depth", "40", "--chains", "2000", "--bootstrap", "20", "--pool.size", "2000"},
      {"phase-scan", "--E_grid", "-2:2:5", "--lambda_grid", "0.2:1:5", "--pool.size", "1000", "--pool.sweeps", "20",
       "--eta_sequence", "1e-2,1e-3", "--depth", "30", "--chains", "1000", "--bootstrap", "10"},
      {"resonance", "--resonance.n", "4", "--resonance.tau", "0.5", "--trials", "200", "--pool.size", "2000"},
  };
  std::ostringstream sink;
  std::size_t files = 0;
  bool ok = true;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::vector<fs::path> dirs;
    for (const char* workers : {"1", "8"}) {
      const fs::path dir = root / (std::to_string(i) + "_w" + workers);
      auto args = runs[i];
      args.insert(args.end(), {"--workers", workers, "--out", dir.string()});
      ok = ok && cli::main_entry(args, sink, sink) == cli::kExitOk;
      const fs::path again = root / (std::to_string(i) + "_w" + workers + "_rerun");
      ok = ok && cli::main_entry({"rerun", (dir / "manifest.json").string(), "--out", again.string()}, sink, sink) ==
                     cli::kExitOk;
      dirs.push_back(dir);
      dirs.push_back(again);
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      if (entry.path().extension() != ".csv") continue;
      ++files;
      for (std::size_t d = 1; d < dirs.size(); ++d) ok = ok && same_bytes(entry.path(), dirs[d] / entry.path().filename());
    }
  }
  fs::remove_all(root);
  return {ok && files > 0, printf_string("%zu CSVs compared across 1/8 workers and manifest reruns", files)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"free quadratic branch", c1_free_branch},
      {"piecewise free Lyapunov and ac crossing", c2_piecewise_lyapunov},
      {"recursion vs dense oracle", c3_oracle},
      {"finite-tree sum rule", c4_sum_rule},
      {"free DOS closed forms", c5_dos},
      {"Cauchy Lyapunov identity", c6_cauchy_lyapunov},
      {"free-energy sandwich", c7_sandwich},
      {"rate function", c8_rate},
      {"typical-decay concentration", c9_typical_decay},
      {"weak-L1, fractional moment, two-site", c10_weak_l1},
      {"resonance micro-oracle", c11_micro_oracle},
      {"bounded-potential edge", c12_edge},
      {"Lifshitz scaling", c13_lifshitz},
      {"LDP tilted checks", c14_ldp},
      {"reproducibility", c15_reproducibility},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("%s %2zu %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures;
}
