#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "trapclust/execution.hpp"
#include "trapclust/graph.hpp"

namespace trapclust::testing {

inline void add_undirected(std::vector<Edge>& edges, NodeIndex a, NodeIndex b, double w) {
  edges.push_back({a, b, w});
  edges.push_back({b, a, w});
}

// Two triangles {0,1,2} and {3,4,5} joined by the bridge 2 - 3.
inline Graph two_triangles(double bridge = 0.01) {
  std::vector<Edge> e;
  for (auto [a, b] : {std::pair{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}}) {
    add_undirected(e, a, b, 1.0);
  }
  add_undirected(e, 2, 3, bridge);
  return Graph::from_edges(6, e);
}

// Undirected path 0 - 1 - ... - (n-1), unit weights.
inline Graph path_graph(NodeIndex n) {
  std::vector<Edge> e;
  for (NodeIndex i = 0; i + 1 < n; ++i) add_undirected(e, i, i + 1, 1.0);
  return Graph::from_edges(n, e);
}

inline Graph directed_cycle(NodeIndex n) {
  std::vector<Edge> e;
  for (NodeIndex i = 0; i < n; ++i) e.push_back({i, (i + 1) % n, 1.0});
  return Graph::from_edges(n, e);
}

// Weighted ER graph plus a random Hamiltonian cycle, so it is always strongly
// connected. Weights are uniform on [0.2, 1].
inline Graph random_strong_graph(NodeIndex n, double p, std::uint64_t seed,
                                 bool directed = true) {
  Rng rng = make_rng(seed, 0x7e57);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto weight = [&] { return 0.2 + 0.8 * unif(rng); };
  std::vector<Edge> e;
  for (NodeIndex i = 0; i < n; ++i) {
    for (NodeIndex j = directed ? 0 : i + 1; j < n; ++j) {
      if (i == j || unif(rng) >= p) continue;
      if (directed) {
        e.push_back({i, j, weight()});
      } else {
        add_undirected(e, i, j, weight());
      }
    }
  }
  std::vector<NodeIndex> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (NodeIndex a = 0; a < n; ++a) {
    const NodeIndex i = order[a];
    const NodeIndex j = order[(a + 1) % n];
    if (directed) {
      e.push_back({i, j, weight()});
    } else {
      add_undirected(e, i, j, weight());
    }
  }
  return Graph::from_edges(n, e);
}

// Soft indicator with entries in [lo, hi].
inline std::vector<double> random_phi(NodeIndex n, Rng& rng, double lo = 0.05, double hi = 0.95) {
  std::uniform_real_distribution<double> unif(lo, hi);
  std::vector<double> phi(static_cast<std::size_t>(n));
  for (auto& x : phi) x = unif(rng);
  return phi;
}

inline NodeSet random_set(NodeIndex n, NodeIndex k, Rng& rng) {
  std::vector<NodeIndex> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  perm.resize(static_cast<std::size_t>(k));
  std::sort(perm.begin(), perm.end());
  return perm;
}

// Central differences of f at x, step h per coordinate.
template <typename F>
Eigen::VectorXd central_gradient(F&& f, std::vector<double> x, double h) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[static_cast<Eigen::Index>(i)] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Richardson-extrapolated central differences: O(h^4) truncation error.
template <typename F>
Eigen::VectorXd richardson_gradient(F&& f, const std::vector<double>& x, double h) {
  const Eigen::VectorXd coarse = central_gradient(f, x, h);
  const Eigen::VectorXd fine = central_gradient(f, x, h / 2.0);
  return (4.0 * fine - coarse) / 3.0;
}

}  // namespace trapclust::testing
