#pragma once

// Green functions on finite balls: the forward recursion, backward cavities,
// path factorization, self-energies, the rank-two Krein ratio, and a dense
// linear-algebra oracle.
//
// Off-diagonal entries are those of (T + λV - ζ)^{-1} with T the adjacency
// operator, so each step along a path contributes a factor -1:
// G(0,x) = (-1)^{|x|} Γ(0) Γ(x_1) ... Γ(x).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bethe/tree.hpp"

namespace bethe {

struct ComplexEnergy {
  double E = 0.0;
  double eta = 1e-3;

  [[nodiscard]] cplx zeta() const { return {E, eta}; }
};

struct FreeGamma {
  cplx value;
  bool edge_ambiguous = false;
};

namespace detail {

/// Roots of K g^2 + z g + 1 = 0 without cancellation.
inline std::pair<cplx, cplx> free_roots(int K, cplx z) {
  const cplx disc = std::sqrt(z * z - 4.0 * static_cast<double>(K));
  const cplx q = (std::real(std::conj(z) * disc) >= 0.0) ? -0.5 * (z + disc) : -0.5 * (z - disc);
  return {q / static_cast<double>(K), 1.0 / q};
}

inline cplx upper_root(int K, cplx z) {
  auto [a, b] = free_roots(K, z);
  return a.imag() >= b.imag() ? a : b;
}

}  // namespace detail

/// Root of K Γ² + ζ Γ + 1 = 0 in the upper half-plane. At η = 0 returns the
/// limit from above: selected as the root nearest the η = 1e-12 value.
inline FreeGamma free_gamma_info(int K, ComplexEnergy z) {
  if (z.eta < 0.0) throw std::invalid_argument("free_gamma: eta must be nonnegative");
  FreeGamma out;
  out.edge_ambiguous = std::abs(std::abs(z.E) - 2.0 * std::sqrt(static_cast<double>(K))) < 1e-6;
  if (z.eta > 0.0) {
    out.value = detail::upper_root(K, z.zeta());
    return out;
  }
  const cplx probe = detail::upper_root(K, {z.E, 1e-12});
  auto [a, b] = detail::free_roots(K, {z.E, 0.0});
  out.value = std::abs(a - probe) <= std::abs(b - probe) ? a : b;
  if (std::abs(out.value.imag()) < 1e-300) out.value.imag(0.0);
  return out;
}

inline cplx free_gamma(int K, ComplexEnergy z) { return free_gamma_info(K, z).value; }
inline cplx free_gamma(int K, cplx z) { return free_gamma(K, ComplexEnergy{z.real(), z.imag()}); }

/// All recursion quantities for one realization at one ζ. Vertices flagged in
/// `removed` are deleted from the graph together with their edges.
class TreeGreens {
 public:
  TreeGreens(const Tree& tree, const FiniteTreeRealization& r, cplx zeta,
             std::vector<char> removed = {})
      : tree_(&tree), zeta_(zeta), removed_(std::move(removed)) {
    const std::size_t n = tree.size();
    if (r.potential.size() != n) throw std::invalid_argument("realization size does not match tree");
    if (!r.boundary.empty() && r.boundary.size() != n) {
      throw std::invalid_argument("boundary size does not match tree");
    }
    if (removed_.empty()) removed_.assign(n, 0);
    potential_ = r.potential;
    local_.resize(n);
    for (std::size_t v = 0; v < n; ++v) local_[v] = r.potential[v] - zeta - r.boundary_at(v);

    gamma_.assign(n, cplx{});
    child_sum_.assign(n, cplx{});
    for (std::size_t v = n; v-- > 0;) {
      if (removed_[v]) continue;
      cplx acc{};
      for (std::size_t j = 0; j < tree.child_count(v); ++j) acc += gamma_[tree.child_begin(v) + j];
      child_sum_[v] = acc;
      gamma_[v] = 1.0 / (local_[v] - acc);
    }

    up_.assign(n, cplx{});
    for (std::size_t v = 1; v < n; ++v) {
      const std::size_t p = tree.parent(v);
      if (removed_[p]) continue;
      up_[v] = 1.0 / (local_[p] - (child_sum_[p] - gamma_[v]) - up_[p]);
    }
  }

  [[nodiscard]] const Tree& tree() const { return *tree_; }
  [[nodiscard]] cplx zeta() const { return zeta_; }

  /// Forward Green function: diagonal entry at v of the subtree of v with its parent removed.
  [[nodiscard]] cplx gamma(std::size_t v) const { return gamma_[v]; }
  /// Diagonal entry at parent(v) once the subtree of v is removed (zero at the root).
  [[nodiscard]] cplx backward(std::size_t v) const { return up_[v]; }

  /// σ_x with G(x,x) = (λV(x) - σ_x)^{-1}; independent of V(x).
  [[nodiscard]] cplx self_energy(std::size_t x) const {
    return potential_[x] - local_[x] + child_sum_[x] + up_[x];
  }

  [[nodiscard]] cplx diagonal(std::size_t x) const {
    return 1.0 / (local_[x] - child_sum_[x] - up_[x]);
  }

  /// G(x,y) on the (possibly punctured) ball; zero across removed vertices.
  [[nodiscard]] cplx green(std::size_t x, std::size_t y) const {
    if (removed_[x] || removed_[y]) return {};
    const auto p = tree_->path(x, y);
    cplx g = diagonal(x);
    for (std::size_t i = 1; i < p.size(); ++i) {
      const std::size_t prev = p[i - 1], u = p[i];
      if (removed_[u]) return {};
      g *= -(tree_->parent(u) == prev ? gamma_[u] : up_[prev]);
    }
    return g;
  }

  /// G(0,x) as the signed product of forward Green functions along the path.
  [[nodiscard]] cplx root_to(std::size_t x) const {
    cplx g = gamma_[0];
    for (std::size_t u = x; u != 0; u = tree_->parent(u)) g *= -gamma_[u];
    return g;
  }

  /// G^{T_x}(0, x_-): the root-to-parent entry once x is removed (x != root).
  [[nodiscard]] cplx root_to_parent_without(std::size_t x) const {
    cplx g = up_[x];
    for (std::size_t u = tree_->parent(x); u != 0; u = tree_->parent(u)) g *= -up_[u];
    return g;
  }

 private:
  const Tree* tree_;
  cplx zeta_;
  std::vector<char> removed_;
  std::vector<double> potential_;
  std::vector<cplx> local_;
  std::vector<cplx> gamma_;
  std::vector<cplx> child_sum_;
  std::vector<cplx> up_;
};


inline cplx truncated_gamma(const Tree& tree, const FiniteTreeRealization& r, ComplexEnergy z) {
  return TreeGreens(tree, r, z.zeta()).gamma(0);
}

inline cplx path_green(const Tree& tree, const FiniteTreeRealization& r, ComplexEnergy z, std::size_t x) {
  return TreeGreens(tree, r, z.zeta()).root_to(x);
}

inline cplx self_energy(const Tree& tree, const FiniteTreeRealization& r, ComplexEnergy z, std::size_t x) {
  return TreeGreens(tree, r, z.zeta()).self_energy(x);
}

class GreenError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested resolvent entries at one spectral parameter.
struct GreenTable {
  ComplexEnergy energy;
  std::map<std::pair<std::size_t, std::size_t>, cplx> entries;

  [[nodiscard]] cplx at(std::size_t x, std::size_t y) const {
    auto it = entries.find({x, y});
    if (it == entries.end()) throw std::out_of_range("GreenTable: entry not computed");
    return it->second;
  }

  /// Debug dump with columns x,y,re,im.
  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "x,y,re,im\n";
    char buf[64];
    for (const auto& [key, g] : entries) {
      out << key.first << ',' << key.second << ',';
      std::snprintf(buf, sizeof buf, "%.17g", g.real());
      out << buf << ',';
      std::snprintf(buf, sizeof buf, "%.17g", g.imag());
      out << buf << '\n';
    }
  }
};

inline constexpr std::size_t kDenseNodeCap = 10000;

/// Assembles H - ζ on the ball as a dense matrix (removed vertices get an
/// identity row and no edges) and solves for the requested columns.
inline GreenTable dense_green_oracle(const Tree& tree, const FiniteTreeRealization& r, ComplexEnergy z,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                     const std::vector<char>& removed = {}) {
  const std::size_t n = tree.size();
  if (n > kDenseNodeCap) throw GreenError("dense oracle: node count exceeds cap of 10000");
  auto gone = [&](std::size_t v) { return !removed.empty() && removed[v]; };
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const cplx zeta = z.zeta();
  for (std::size_t v = 0; v < n; ++v) {
    const auto i = static_cast<Eigen::Index>(v);
    if (gone(v)) {
      M(i, i) = 1.0;
      continue;
    }
    M(i, i) = r.potential[v] - zeta - r.boundary_at(v);
    const std::size_t p = tree.parent(v);
    if (p != Tree::npos && !gone(p)) {
      const auto j = static_cast<Eigen::Index>(p);
      M(i, j) = 1.0;
      M(j, i) = 1.0;
    }
  }
  std::vector<std::size_t> cols;
  for (const auto& pr : pairs) cols.push_back(pr.second);
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    rhs(static_cast<Eigen::Index>(cols[c]), static_cast<Eigen::Index>(c)) = 1.0;
  }
  const Eigen::MatrixXcd sol = M.partialPivLu().solve(rhs);
  GreenTable table;
  table.energy = z;
  for (const auto& [x, y] : pairs) {
    const auto c = static_cast<std::size_t>(std::lower_bound(cols.begin(), cols.end(), y) - cols.begin());
    table.entries[{x, y}] =
        (gone(x) || gone(y)) ? cplx{} : sol(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(c));
  }
  return table;
}

/// Every (x,y) pair of the ball.
inline std::vector<std::pair<std::size_t, std::size_t>> all_pairs(const Tree& tree) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(tree.size() * tree.size());
  for (std::size_t x = 0; x < tree.size(); ++x) {
    for (std::size_t y = 0; y < tree.size(); ++y) out.emplace_back(x, y);
  }
  return out;
}

struct KreinResult {
  /// G_xy / (G_xx G_yy - G_xy G_yx) from the restricted 2x2 Green matrix.
  cplx from_ratio;
  /// G^{T_{x,y}}(x', y') on the ball with x and y deleted; x', y' are the
  /// neighbors of x and y on the path joining them.
  cplx from_puncture;
  /// x and y adjacent: no punctured entry exists and the ratio equals -1.
  bool adjacent = false;
  bool agree = true;
  double relative_gap = 0.0;
};

/// Off-diagonal Krein coefficient for the pair (x, y), computed two ways.
/// The off-diagonal entry of the inverse 2x2 Green matrix is the negative of
/// this ratio; bounds only use its modulus.
inline KreinResult krein_offdiag(const Tree& tree, const FiniteTreeRealization& r, ComplexEnergy z,
                                 std::size_t x, std::size_t y, std::vector<char> removed = {}) {
  if (x == y) throw GreenError("krein_offdiag: x and y must differ");
  if (removed.empty()) removed.assign(tree.size(), 0);
  const TreeGreens full(tree, r, z.zeta(), removed);
  const cplx gxx = full.diagonal(x), gyy = full.diagonal(y);
  const cplx gxy = full.green(x, y), gyx = full.green(y, x);
  KreinResult out;
  out.from_ratio = gxy / (gxx * gyy - gxy * gyx);
  if (tree.adjacent(x, y)) {
    out.adjacent = true;
    out.from_puncture = cplx{-1.0, 0.0};
  } else {
    const auto p = tree.path(x, y);
    removed[x] = removed[y] = 1;
    const TreeGreens punctured(tree, r, z.zeta(), std::move(removed));
    out.from_puncture = punctured.green(p[1], p[p.size() - 2]);
  }
  const double scale = std::max(std::abs(out.from_ratio), std::abs(out.from_puncture));
  out.relative_gap = scale > 0.0 ? std::abs(out.from_ratio - out.from_puncture) / scale : 0.0;
  out.agree = out.relative_gap <= 1e-9;
  return out;
}

}  // namespace bethe
