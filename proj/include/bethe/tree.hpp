#pragma once

// Finite balls of the regular rooted tree, indexed breadth first.

#include <cstddef>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "bethe/disorder.hpp"
#include "bethe/rng.hpp"

namespace bethe {

using cplx = std::complex<double>;

/// Ball B_R = {x : dist(0,x) < R}. The rooted tree gives the root K children,
/// the full tree K+1. K = 1 (a chain) is accepted for small test geometries.
struct TreeGeometry {
  int K = 2;
  int depth = 1;
  bool full = false;

  [[nodiscard]] int root_degree() const { return full ? K + 1 : K; }

  [[nodiscard]] std::size_t node_count() const {
    if (depth <= 0) return 0;
    std::size_t total = 1, level = 1;
    for (int d = 1; d < depth; ++d) {
      level *= static_cast<std::size_t>(d == 1 ? root_degree() : K);
      total += level;
    }
    return total;
  }
};

class Tree {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit Tree(TreeGeometry g) : geometry_(g) {
    if (g.K < 1) throw std::invalid_argument("tree: branching number must be >= 1");
    if (g.depth < 1) throw std::invalid_argument("tree: depth must be >= 1");
    const std::size_t n = g.node_count();
    parent_.assign(n, npos);
    depth_.assign(n, 0);
    child_begin_.assign(n, 0);
    child_count_.assign(n, 0);
    level_begin_.push_back(0);
    std::size_t next = 1;
    for (std::size_t v = 0; v < n; ++v) {
      child_begin_[v] = next;
      if (depth_[v] + 1 < g.depth) {
        const int c = (v == 0) ? g.root_degree() : g.K;
        child_count_[v] = static_cast<std::size_t>(c);
        for (int j = 0; j < c; ++j) {
          parent_[next] = v;
          depth_[next] = depth_[v] + 1;
          if (depth_[next] >= static_cast<int>(level_begin_.size())) level_begin_.push_back(next);
          ++next;
        }
      }
    }
    level_begin_.push_back(n);
  }

  [[nodiscard]] const TreeGeometry& geometry() const { return geometry_; }
  [[nodiscard]] std::size_t size() const { return parent_.size(); }
  [[nodiscard]] std::size_t parent(std::size_t v) const { return parent_[v]; }
  [[nodiscard]] int depth(std::size_t v) const { return depth_[v]; }
  [[nodiscard]] std::size_t child_begin(std::size_t v) const { return child_begin_[v]; }
  [[nodiscard]] std::size_t child_count(std::size_t v) const { return child_count_[v]; }
  [[nodiscard]] bool is_leaf(std::size_t v) const { return child_count_[v] == 0; }

  /// Vertices at distance d from the root occupy [level_begin(d), level_begin(d+1)).
  [[nodiscard]] std::size_t level_begin(int d) const { return level_begin_[static_cast<std::size_t>(d)]; }
  [[nodiscard]] std::size_t level_end(int d) const { return level_begin_[static_cast<std::size_t>(d) + 1]; }

  /// Root-to-v path, root first.
  [[nodiscard]] std::vector<std::size_t> path_from_root(std::size_t v) const {
    std::vector<std::size_t> p(static_cast<std::size_t>(depth_[v]) + 1);
    for (std::size_t i = p.size(); i-- > 0;) {
      p[i] = v;
      v = parent_[v];
    }
    return p;
  }

  /// Vertex sequence from x to y, both ends included.
  [[nodiscard]] std::vector<std::size_t> path(std::size_t x, std::size_t y) const {
    std::vector<std::size_t> up, down;
    while (x != y) {
      if (depth_[x] >= depth_[y]) {
        up.push_back(x);
        x = parent_[x];
      } else {
        down.push_back(y);
        y = parent_[y];
      }
    }
    up.push_back(x);
    up.insert(up.end(), down.rbegin(), down.rend());
    return up;
  }

  [[nodiscard]] std::size_t distance(std::size_t x, std::size_t y) const { return path(x, y).size() - 1; }

  [[nodiscard]] std::vector<std::size_t> neighbors(std::size_t v) const {
    std::vector<std::size_t> out;
    if (parent_[v] != npos) out.push_back(parent_[v]);
    for (std::size_t j = 0; j < child_count_[v]; ++j) out.push_back(child_begin_[v] + j);
    return out;
  }

  [[nodiscard]] bool adjacent(std::size_t x, std::size_t y) const {
    return parent_[x] == y || parent_[y] == x;
  }

 private:
  TreeGeometry geometry_;
  std::vector<std::size_t> parent_;
  std::vector<int> depth_;
  std::vector<std::size_t> child_begin_;
  std::vector<std::size_t> child_count_;
  std::vector<std::size_t> level_begin_;
};

/// One potential configuration on a ball. `potential` holds λV(x) already
/// scaled. `boundary` is an optional outside self-energy per vertex (the sum
/// of the cavity Green functions hanging off it beyond the ball); empty means
/// Dirichlet truncation.
struct FiniteTreeRealization {
  std::vector<double> potential;
  std::vector<cplx> boundary;
  RealizationSeed seed;

  [[nodiscard]] cplx boundary_at(std::size_t v) const { return boundary.empty() ? cplx{} : boundary[v]; }
};

/// Draws λV on every vertex of the ball from the model, one stream per realization.
inline FiniteTreeRealization make_realization(const Tree& tree, const DisorderModel& model,
                                              const RealizationSeed& seed) {
  FiniteTreeRealization r;
  r.seed = seed;
  r.potential = sample_potential(model, seed, tree.size());
  for (double& v : r.potential) v *= model.lambda();
  if (model.is_deterministic()) std::fill(r.potential.begin(), r.potential.end(), 0.0);
  return r;
}

}  // namespace bethe
