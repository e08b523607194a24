#pragma once

// Run configuration: `key = value` lines with dotted keys, overridden by
// `--key value` flags. Every key has a default; unknown keys are rejected.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bethe/disorder.hpp"
#include "bethe/stats.hpp"

namespace bethe::cli {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what) : std::runtime_error(what), key_(std::move(key)) {}
  [[nodiscard]] const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Key, default, one-line description. An empty default means "unset".
struct KeySpec {
  const char* key;
  const char* value;
  const char* help;
};

inline const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      {"dist", "cauchy", "none | gaussian | cauchy | uniform | piecewise"},
      {"lambda", "0.3", "disorder strength"},
      {"dist.mean", "0", "gaussian mean"},
      {"dist.std", "1", "gaussian standard deviation"},
      {"dist.location", "0", "cauchy location"},
      {"dist.scale", "1", "cauchy scale"},
      {"dist.breakpoints", "-1,0,1", "piecewise breakpoints"},
      {"dist.heights", "0.5,0.5", "piecewise heights (normalized)"},
      {"dist.moment_exponent", "0.5", "fractional moment exponent in (0,1)"},
      {"K", "2", "forward branching number"},
      {"E", "0", "energy for single-energy commands"},
      {"E_grid", "", "energy grid; defaults to E"},
      {"lambda_grid", "", "disorder grid; defaults to lambda"},
      {"eta", "1e-3", "imaginary part for single-eta estimators"},
      {"eta_sequence", "1e-2,3e-3,1e-3,3e-4,1e-4", "decreasing eta ladder"},
      {"s_grid", "-0.05:0.95:21", "free-energy exponents"},
      {"depth", "100", "chain length n"},
      {"chains", "10000", "independent path chains"},
      {"window_points", "9", "window marks for the slope fit"},
      {"bootstrap", "200", "bootstrap replicates"},
      {"pool.size", "20000", "population size"},
      {"pool.sweeps", "40", "population sweeps"},
      {"trials", "1000", "Monte Carlo trials"},
      {"realizations", "100", "random finite-tree realizations"},
      {"geometry.depth", "5", "ball radius for finite-tree suites"},
      {"alpha", "0.5", "percentile level"},
      {"resonance.mode", "lyapunov", "lyapunov | ld"},
      {"resonance.n", "6", "sphere radius"},
      {"resonance.tau", "", "override for the blow-up threshold"},
      {"resonance.L_hat", "", "override for the Lyapunov estimate"},
      {"ld.s", "0.95", "tilt exponent"},
      {"ld.gamma", "0", "decay rate for the band events"},
      {"ld.eps", "0.001", "band half-width"},
      {"ld.b", "16", "boundary constant"},
      {"ld.Delta", "0.1", "rate gap"},
      {"ld.kappa", "0.005", "thinning fraction"},
      {"ld.ell", "1", "regular-decay rate"},
      {"ldp.s", "0.5", "tilt exponent"},
      {"ldp.eps", "0.05", "band half-width"},
      {"ldp.n_grid", "50,100,200", "chain lengths"},
      {"lifshitz.R", "5", "ball radius"},
      {"lifshitz.delta_grid", "0.55:1.0:10", "distances above the edge"},
      {"ray.R", "8", "ray length"},
      {"ray.alpha", "0.015625", "ray-sum threshold"},
      {"fekete.s", "0.5", "exponent"},
      {"fekete.depth", "40", "largest m + n"},
      {"fekete.fit_limit", "10", "largest m + n + 1 used to fit log C"},
      {"edge.E_grid", "", "energies; defaults to 10 points above the edge"},
      {"seed", "1", "master seed"},
      {"workers", "1", "worker threads"},
      {"out", "out", "output directory"},
  };
  return table;
}

inline std::string trim(std::string s) {
  const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : key_table()) values_[k.key] = k.value;
  }

  std::string subcommand;
  /// Suite name for `verify`, manifest path for `rerun`.
  std::string argument;

  static bool known(const std::string& key) {
    const auto& t = key_table();
    return std::any_of(t.begin(), t.end(), [&](const KeySpec& k) { return key == k.key; });
  }

  void set(const std::string& key, const std::string& value, const std::string& where) {
    if (!known(key)) throw ConfigError(key, where + ": unknown key '" + key + "'");
    values_[key] = value;
    origin_[key] = where;
  }

  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

  [[nodiscard]] const std::string& raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(key, "unknown key '" + key + "'");
    return it->second;
  }

  [[nodiscard]] bool has(const std::string& key) const { return !raw(key).empty(); }

  [[nodiscard]] std::string where(const std::string& key) const {
    const auto it = origin_.find(key);
    return it == origin_.end() ? "default" : it->second;
  }

  [[nodiscard]] double number(const std::string& key) const { return parse_number(key, raw(key)); }

  [[nodiscard]] std::int64_t integer(const std::string& key) const {
    const std::string& s = raw(key);
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) fail(key, "expected an integer, got '" + s + "'");
    return v;
  }

  [[nodiscard]] std::size_t count(const std::string& key) const {
    const auto v = integer(key);
    if (v < 1) fail(key, "must be a positive integer");
    return static_cast<std::size_t>(v);
  }

  [[nodiscard]] std::optional<double> optional_number(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  /// Comma list, or `a:b:n` for n evenly spaced points.
  [[nodiscard]] std::vector<double> grid(const std::string& key) const {
    const std::string s = raw(key);
    if (s.empty()) return {};
    if (s.find(':') != std::string::npos) {
      std::vector<std::string> parts;
      std::stringstream ss(s);
      for (std::string t; std::getline(ss, t, ':');) parts.push_back(trim(t));
      if (parts.size() != 3) fail(key, "range must read a:b:n, got '" + s + "'");
      const double n = parse_number(key, parts[2]);
      if (n < 1 || n != std::floor(n)) fail(key, "range point count must be a positive integer");
      return stats::linspace(parse_number(key, parts[0]), parse_number(key, parts[1]), static_cast<std::size_t>(n));
    }
    std::vector<double> out;
    std::stringstream ss(s);
    for (std::string t; std::getline(ss, t, ',');) out.push_back(parse_number(key, trim(t)));
    return out;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(key, where(key) + ": " + key + " = " + raw(key) + ": " + what);
  }

 private:
  [[nodiscard]] double parse_number(const std::string& key, const std::string& s) const {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) {
      fail(key, "expected a number, got '" + s + "'");
    }
    return v;
  }

  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> origin_;
};

/// Applies `key = value` lines; `#` starts a comment.
inline void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + " line " + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("", where + ": expected 'key = value', got '" + line + "'");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline DisorderModel model_from(const RunConfig& c) {
  const std::string d = c.raw("dist");
  const double lambda = c.number("lambda");
  const double s = c.number("dist.moment_exponent");
  try {
    if (d == "none") return DisorderModel(NoDisorder{}, lambda, s);
    if (d == "gaussian") return DisorderModel(Gaussian{c.number("dist.mean"), c.number("dist.std")}, lambda, s);
    if (d == "cauchy") return DisorderModel(Cauchy{c.number("dist.location"), c.number("dist.scale")}, lambda, s);
    if (d == "uniform") return DisorderModel(UniformSymmetric{}, lambda, s);
    if (d == "piecewise") {
      return DisorderModel(PiecewiseConstant{c.grid("dist.breakpoints"), c.grid("dist.heights")}, lambda, s);
    }
  } catch (const DisorderError& e) {
    c.fail("dist", e.what());
  }
  c.fail("dist", "unknown distribution");
}

/// Range checks that do not depend on the subcommand, plus the κ window in
/// large-deviation resonance mode.
inline void validate(const RunConfig& c) {
  if (c.integer("K") < 1) c.fail("K", "must be >= 1");
  if (!(c.number("eta") > 0.0)) c.fail("eta", "must be > 0");
  for (double e : c.grid("eta_sequence"))
    if (!(e > 0.0)) c.fail("eta_sequence", "every eta must be > 0");
  if (const double a = c.number("alpha"); !(a > 0.0 && a < 1.0)) c.fail("alpha", "must lie in (0,1)");
  for (double s : c.grid("s_grid"))
    if (!(s < 1.0)) c.fail("s_grid", "every s must be < 1");
  for (const char* k : {"ldp.s", "ld.s", "fekete.s"})
    if (!(c.number(k) < 1.0)) c.fail(k, "must be < 1");
  for (const char* k : {"depth", "chains", "window_points", "bootstrap", "pool.size", "pool.sweeps", "trials",
                        "realizations", "geometry.depth", "resonance.n", "lifshitz.R", "ray.R", "fekete.depth",
                        "fekete.fit_limit", "workers"}) {
    (void)c.count(k);
  }
  if (c.integer("seed") < 0) c.fail("seed", "must be >= 0");
  if (c.integer("K") > 64) c.fail("K", "must be <= 64");
  const std::string mode = c.raw("resonance.mode");
  if (mode != "lyapunov" && mode != "ld") c.fail("resonance.mode", "must be lyapunov or ld");
  if (mode == "ld") {
    const double kappa = c.number("ld.kappa"), Delta = c.number("ld.Delta"), ell = c.number("ld.ell");
    if (!(kappa > 0.0 && kappa < std::min(Delta / (16.0 * ell), 0.25))) {
      c.fail("ld.kappa", "must lie in (0, min{Delta/(16 ell), 1/4})");
    }
  }
  (void)model_from(c);
}

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s = {"spectrum", "lyapunov",   "free-energy", "rate-function", "dos",
                                             "phase-scan", "edge",     "resonance",   "verify",        "rerun"};
  return s;
}

inline const std::vector<std::string>& suites() {
  static const std::vector<std::string> s = {"greens-identities", "weak-l1", "ldp", "lifshitz", "ray-sum", "fekete"};
  return s;
}

/// argv[1] is the subcommand; `verify` and `rerun` take one positional
/// argument. Defaults < config file < flags, whatever the flag order.
inline RunConfig parse_args(const std::vector<std::string>& args) {
  if (args.empty()) throw ConfigError("", "missing subcommand");
  RunConfig cfg;
  cfg.subcommand = args[0];
  const auto& sc = subcommands();
  if (std::find(sc.begin(), sc.end(), cfg.subcommand) == sc.end()) {
    throw ConfigError("", "unknown subcommand '" + cfg.subcommand + "'");
  }
  std::size_t i = 1;
  if (cfg.subcommand == "verify" || cfg.subcommand == "rerun") {
    if (args.size() < 2 || args[1].rfind("--", 0) == 0) {
      throw ConfigError("", cfg.subcommand + " needs a " + (cfg.subcommand == "verify" ? "suite" : "manifest path"));
    }
    cfg.argument = args[1];
    i = 2;
    if (cfg.subcommand == "verify") {
      const auto& su = suites();
      if (std::find(su.begin(), su.end(), cfg.argument) == su.end()) {
        throw ConfigError("", "unknown verify suite '" + cfg.argument + "'");
      }
    }
  }
  std::vector<std::pair<std::string, std::string>> flags;
  std::optional<std::string> config_path;
  for (; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0) throw ConfigError("", "unexpected argument '" + a + "'");
    if (i + 1 >= args.size()) throw ConfigError(a.substr(2), "flag " + a + " needs a value");
    const std::string key = a.substr(2);
    if (key == "config") {
      config_path = args[++i];
    } else {
      flags.emplace_back(key, args[++i]);
    }
  }
  if (config_path) apply_config_text(cfg, read_file(*config_path), *config_path);
  for (const auto& [k, v] : flags) cfg.set(k, v, "flag --" + k);
  return cfg;
}

}  // namespace bethe::cli
