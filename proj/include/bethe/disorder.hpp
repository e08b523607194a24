#pragma once

// Random-potential families: densities, sampling, and the regularity data
// (sup norm, minimal function, regularity constant, fractional moment).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bethe/rng.hpp"
#include "bethe/stats.hpp"

namespace bethe {

struct NoDisorder {};
struct Gaussian {
  double mean = 0.0;
  double std = 1.0;
};
struct Cauchy {
  double location = 0.0;
  double scale = 1.0;
};
/// Uniform density on [-1, 1].
struct UniformSymmetric {};
/// Piecewise-constant density; heights[i] lives on [breakpoints[i], breakpoints[i+1]).
struct PiecewiseConstant {
  std::vector<double> breakpoints;
  std::vector<double> heights;
};

using DisorderFamily = std::variant<NoDisorder, Gaussian, Cauchy, UniformSymmetric, PiecewiseConstant>;

class DisorderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Support {
  bool bounded = false;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

/// Default logarithmic window grid for the minimal function: 32 points in [1e-4, 1].
inline std::vector<double> default_nu_grid() { return stats::logspace(1e-4, 1.0, 32); }

class DisorderModel {
 public:
  DisorderModel() : DisorderModel(NoDisorder{}, 0.0) {}

  DisorderModel(DisorderFamily family, double lambda, double moment_exponent = 0.5)
      : family_(std::move(family)), lambda_(lambda), moment_exponent_(moment_exponent) {
    if (!(lambda_ >= 0.0) || !std::isfinite(lambda_)) {
      throw DisorderError("lambda must be a finite nonnegative number");
    }
    if (!(moment_exponent_ > 0.0 && moment_exponent_ < 1.0)) {
      throw DisorderError("moment exponent must lie in (0,1)");
    }
    validate_and_normalize();
    if (!is_deterministic()) {
      sup_norm_ = compute_sup_norm();
      regularity_c_ = compute_regularity_constant(default_v_grid());
    }
  }

  static DisorderModel none() { return DisorderModel(NoDisorder{}, 0.0); }
  static DisorderModel gaussian(double mean, double std, double lambda) {
    return DisorderModel(Gaussian{mean, std}, lambda);
  }
  static DisorderModel cauchy(double location, double scale, double lambda) {
    return DisorderModel(Cauchy{location, scale}, lambda);
  }
  static DisorderModel uniform(double lambda) { return DisorderModel(UniformSymmetric{}, lambda); }
  static DisorderModel piecewise(std::vector<double> breakpoints, std::vector<double> heights,
                                 double lambda) {
    return DisorderModel(PiecewiseConstant{std::move(breakpoints), std::move(heights)}, lambda);
  }

  [[nodiscard]] const DisorderFamily& family() const { return family_; }
  [[nodiscard]] double lambda() const { return lambda_; }
  [[nodiscard]] double moment_exponent() const { return moment_exponent_; }
  [[nodiscard]] double sup_norm() const { return sup_norm_; }
  [[nodiscard]] double regularity_c() const { return regularity_c_; }

  /// True when the potential term vanishes identically (no family, or lambda == 0).
  [[nodiscard]] bool is_deterministic() const {
    return std::holds_alternative<NoDisorder>(family_) || lambda_ == 0.0;
  }

  [[nodiscard]] std::string family_name() const {
    return std::visit(
        [](const auto& f) -> std::string {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, NoDisorder>) return "none";
          else if constexpr (std::is_same_v<F, Gaussian>) return "gaussian";
          else if constexpr (std::is_same_v<F, Cauchy>) return "cauchy";
          else if constexpr (std::is_same_v<F, UniformSymmetric>) return "uniform";
          else return "piecewise";
        },
        family_);
  }

  [[nodiscard]] Support support() const {
    return std::visit(
        [](const auto& f) -> Support {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, NoDisorder>) return {true, 0.0, 0.0};
          else if constexpr (std::is_same_v<F, UniformSymmetric>) return {true, -1.0, 1.0};
          else if constexpr (std::is_same_v<F, PiecewiseConstant>)
            return {true, f.breakpoints.front(), f.breakpoints.back()};
          else return Support{};
        },
        family_);
  }

  /// Density bounded below on every compact set (needs full-line support).
  [[nodiscard]] bool assumption_E() const {
    return std::holds_alternative<Gaussian>(family_) || std::holds_alternative<Cauchy>(family_);
  }

  /// Density of V (before scaling by lambda). Zero outside the support.
  [[nodiscard]] double density(double v) const {
    return std::visit(
        [v](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, NoDisorder>) {
            return v == 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
          } else if constexpr (std::is_same_v<F, Gaussian>) {
            const double z = (v - f.mean) / f.std;
            return std::exp(-0.5 * z * z) / (f.std * std::sqrt(2.0 * std::numbers::pi));
          } else if constexpr (std::is_same_v<F, Cauchy>) {
            const double z = (v - f.location) / f.scale;
            return 1.0 / (std::numbers::pi * f.scale * (1.0 + z * z));
          } else if constexpr (std::is_same_v<F, UniformSymmetric>) {
            return (v >= -1.0 && v <= 1.0) ? 0.5 : 0.0;
          } else {
            const auto& b = f.breakpoints;
            if (v < b.front() || v > b.back()) return 0.0;
            auto it = std::upper_bound(b.begin(), b.end(), v);
            std::size_t i = static_cast<std::size_t>(it - b.begin());
            i = (i == 0) ? 0 : i - 1;
            if (i >= f.heights.size()) i = f.heights.size() - 1;
            return f.heights[i];
          }
        },
        family_);
  }

  /// ∫_a^b ρ by adaptive Gauss-Kronrod, split at density discontinuities.
  [[nodiscard]] double mass(double a, double b) const {
    if (b <= a || is_point_mass()) return 0.0;
    std::vector<double> cuts{a};
    for (double c : discontinuities()) {
      if (c > a && c < b) cuts.push_back(c);
    }
    cuts.push_back(b);
    double acc = 0.0;
    for (std::size_t i = 1; i < cuts.size(); ++i) {
      const double lo = cuts[i - 1], hi = cuts[i];
      acc += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
          [this](double x) { return density(x); }, lo, hi, 10, 1e-11);
    }
    return acc;
  }

  /// Upper bound for the minimal function: min over the ν grid of the
  /// window average (2ν)^{-1} ∫_{|x-v|≤ν} ρ.
  [[nodiscard]] double minimal_function(double v, const std::vector<double>& nu_grid) const {
    if (nu_grid.empty()) throw DisorderError("minimal_function: empty nu grid");
    double best = std::numeric_limits<double>::infinity();
    for (double nu : nu_grid) {
      if (!(nu > 0.0 && nu <= 1.0)) throw DisorderError("minimal_function: nu outside (0,1]");
      best = std::min(best, mass(v - nu, v + nu) / (2.0 * nu));
    }
    return best;
  }

  [[nodiscard]] double minimal_function(double v) const {
    return minimal_function(v, default_nu_grid());
  }

  /// max over the grid of ρ(v)/M̂(v). Throws when a ratio exceeds 1e6.
  [[nodiscard]] double regularity_constant(const std::vector<double>& v_grid,
                                           const std::vector<double>& nu_grid) const {
    double c = 0.0;
    for (double v : v_grid) {
      const double rho = density(v);
      if (rho <= 0.0) continue;
      const double m = minimal_function(v, nu_grid);
      const double ratio = m > 0.0 ? rho / m : std::numeric_limits<double>::infinity();
      if (ratio > 1e6) {
        throw DisorderError("unbounded-ratio: density/minimal-function ratio exceeds 1e6 at v = " +
                            std::to_string(v));
      }
      c = std::max(c, ratio);
    }
    return c;
  }

  [[nodiscard]] double regularity_constant(const std::vector<double>& v_grid) const {
    return regularity_constant(v_grid, default_nu_grid());
  }

  /// ∫ |v|^s ρ(v) dv (s must be < 1 for Cauchy).
  [[nodiscard]] double fractional_moment(double s) const {
    if (is_point_mass()) return 0.0;
    if (std::holds_alternative<Cauchy>(family_) && s >= 1.0) {
      return std::numeric_limits<double>::infinity();
    }
    auto f = [this, s](double v) { return std::pow(std::abs(v), s) * density(v); };
    const Support sup = support();
    if (sup.bounded) {
      std::vector<double> cuts{sup.lo};
      for (double c : discontinuities()) cuts.push_back(c);
      cuts.push_back(0.0);
      cuts.push_back(sup.hi);
      std::sort(cuts.begin(), cuts.end());
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
      double acc = 0.0;
      for (std::size_t i = 1; i < cuts.size(); ++i) {
        if (cuts[i] <= sup.lo || cuts[i - 1] >= sup.hi) continue;
        acc += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, cuts[i - 1], cuts[i], 15,
                                                                             1e-12);
      }
      return acc;
    }
    // Full line: Gauss-Kronrod on [-1,1], exp-sinh on the two tails.
    double acc = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, -1.0, 1.0, 15, 1e-12);
    boost::math::quadrature::exp_sinh<double> tails;
    acc += tails.integrate([&f](double v) { return f(v) + f(-v); }, 1.0, std::numeric_limits<double>::infinity(),
                           1e-12);
    return acc;
  }

  /// Draws V (unscaled) from ρ.
  class Sampler {
   public:
    explicit Sampler(const DisorderModel& m) : family_(m.family_) {
      if (const auto* p = std::get_if<PiecewiseConstant>(&family_)) {
        piecewise_ = std::piecewise_constant_distribution<double>(
            p->breakpoints.begin(), p->breakpoints.end(), p->heights.begin());
      }
    }

    double operator()(Engine& rng) {
      return std::visit(
          [this, &rng](const auto& f) -> double {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, NoDisorder>) return 0.0;
            else if constexpr (std::is_same_v<F, Gaussian>) return f.mean + f.std * normal_(rng);
            else if constexpr (std::is_same_v<F, Cauchy>) return f.location + f.scale * cauchy_(rng);
            else if constexpr (std::is_same_v<F, UniformSymmetric>) return uniform_(rng);
            else return piecewise_(rng);
          },
          family_);
    }

   private:
    DisorderFamily family_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::cauchy_distribution<double> cauchy_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{-1.0, 1.0};
    std::piecewise_constant_distribution<double> piecewise_{};
  };

  [[nodiscard]] Sampler sampler() const { return Sampler(*this); }

  /// Grid covering the effective support, used for the stored regularity constant.
  [[nodiscard]] std::vector<double> default_v_grid() const {
    return std::visit(
        [](const auto& f) -> std::vector<double> {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, NoDisorder>) return {0.0};
          else if constexpr (std::is_same_v<F, Gaussian>)
            return stats::linspace(f.mean - 8.0 * f.std, f.mean + 8.0 * f.std, 161);
          else if constexpr (std::is_same_v<F, Cauchy>)
            return stats::linspace(f.location - 50.0 * f.scale, f.location + 50.0 * f.scale, 201);
          else if constexpr (std::is_same_v<F, UniformSymmetric>) return stats::linspace(-1.0, 1.0, 81);
          else return stats::linspace(f.breakpoints.front(), f.breakpoints.back(), 161);
        },
        family_);
  }

 private:
  [[nodiscard]] bool is_point_mass() const { return std::holds_alternative<NoDisorder>(family_); }

  [[nodiscard]] std::vector<double> discontinuities() const {
    if (std::holds_alternative<UniformSymmetric>(family_)) return {-1.0, 1.0};
    if (const auto* p = std::get_if<PiecewiseConstant>(&family_)) return p->breakpoints;
    return {};
  }

  void validate_and_normalize() {
    if (auto* g = std::get_if<Gaussian>(&family_)) {
      if (!(g->std > 0.0)) throw DisorderError("gaussian std must be positive");
    } else if (auto* c = std::get_if<Cauchy>(&family_)) {
      if (!(c->scale > 0.0)) throw DisorderError("cauchy scale must be positive");
    } else if (auto* p = std::get_if<PiecewiseConstant>(&family_)) {
      if (p->breakpoints.size() < 2 || p->heights.size() + 1 != p->breakpoints.size()) {
        throw DisorderError("piecewise: need n+1 breakpoints for n heights");
      }
      if (!std::is_sorted(p->breakpoints.begin(), p->breakpoints.end()) ||
          std::adjacent_find(p->breakpoints.begin(), p->breakpoints.end()) != p->breakpoints.end()) {
        throw DisorderError("piecewise: breakpoints must be strictly increasing");
      }
      double total = 0.0;
      for (std::size_t i = 0; i < p->heights.size(); ++i) {
        if (p->heights[i] < 0.0) throw DisorderError("piecewise: negative height");
        total += p->heights[i] * (p->breakpoints[i + 1] - p->breakpoints[i]);
      }
      if (!(total > 0.0)) throw DisorderError("piecewise: zero total mass");
      for (double& h : p->heights) h /= total;
    }
  }

  [[nodiscard]] double compute_sup_norm() const {
    return std::visit(
        [](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, NoDisorder>) return std::numeric_limits<double>::infinity();
          else if constexpr (std::is_same_v<F, Gaussian>)
            return 1.0 / (f.std * std::sqrt(2.0 * std::numbers::pi));
          else if constexpr (std::is_same_v<F, Cauchy>) return 1.0 / (std::numbers::pi * f.scale);
          else if constexpr (std::is_same_v<F, UniformSymmetric>) return 0.5;
          else return *std::max_element(f.heights.begin(), f.heights.end());
        },
        family_);
  }

  [[nodiscard]] double compute_regularity_constant(const std::vector<double>& grid) const {
    return regularity_constant(grid, default_nu_grid());
  }

  DisorderFamily family_;
  double lambda_ = 0.0;
  double moment_exponent_ = 0.5;
  double sup_norm_ = std::numeric_limits<double>::infinity();
  double regularity_c_ = 1.0;
};

/// count iid draws of V; deterministic in the seed.
inline std::vector<double> sample_potential(const DisorderModel& model, const RealizationSeed& seed,
                                            std::size_t count) {
  auto rng = seed.engine();
  auto draw = model.sampler();
  std::vector<double> out(count);
  for (double& v : out) v = draw(rng);
  return out;
}

inline double density(const DisorderModel& model, double v) { return model.density(v); }

}  // namespace bethe
