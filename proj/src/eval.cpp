#include "trapclust/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>

#include <Eigen/Dense>

#include "trapclust/errors.hpp"

namespace trapclust {

double purity(std::span<const int> clusters, std::span<const std::optional<int>> metadata) {
  if (clusters.size() != metadata.size()) {
    throw ValidationError("cluster and metadata vectors differ in length");
  }
  std::map<int, std::map<int, std::int64_t>> counts;
  std::int64_t total = 0;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (!metadata[i]) continue;
    ++counts[clusters[i]][*metadata[i]];
    ++total;
  }
  if (total == 0) throw ValidationError("purity: no node carries both a cluster and metadata");
  std::int64_t matched = 0;
  for (const auto& [cluster, by_class] : counts) {
    std::int64_t best = 0;
    for (const auto& [cls, c] : by_class) best = std::max(best, c);
    matched += best;
  }
  return static_cast<double>(matched) / static_cast<double>(total);
}

double purity(std::span<const int> clusters, std::span<const int> metadata) {
  std::vector<std::optional<int>> meta(metadata.begin(), metadata.end());
  return purity(clusters, meta);
}

double subgraph_accuracy(std::span<const NodeIndex> set, std::span<const NodeIndex> planted) {
  if (planted.empty()) throw ValidationError("subgraph accuracy: planted set is empty");
  std::vector<NodeIndex> a(set.begin(), set.end());
  std::vector<NodeIndex> b(planted.begin(), planted.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  std::vector<NodeIndex> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  return static_cast<double>(both.size()) / static_cast<double>(b.size());
}

WalkSampler::WalkSampler(const Graph& g) {
  const NodeIndex n = g.size();
  row_ptr_.assign(static_cast<std::size_t>(n) + 1, 0);
  target_.reserve(g.num_edges());
  alias_.reserve(g.num_edges());
  prob_.reserve(g.num_edges());
  std::vector<double> scaled;
  std::vector<std::size_t> small, large;
  for (NodeIndex i = 0; i < n; ++i) {
    auto cols = g.neighbors(i);
    auto ws = g.weights(i);
    const std::size_t len = cols.size();
    const double d = g.out_degree()[i];
    scaled.assign(len, 0.0);
    small.clear();
    large.clear();
    const std::size_t base = target_.size();
    for (std::size_t k = 0; k < len; ++k) {
      scaled[k] = ws[k] * static_cast<double>(len) / d;
      target_.push_back(cols[k]);
      alias_.push_back(cols[k]);
      prob_.push_back(1.0);
      (scaled[k] < 1.0 ? small : large).push_back(k);
    }
    // Vose's method
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back();
      small.pop_back();
      const std::size_t l = large.back();
      prob_[base + s] = scaled[s];
      alias_[base + s] = cols[l];
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    row_ptr_[i + 1] = static_cast<std::int64_t>(target_.size());
  }
}

MonteCarloEstimate monte_carlo_met(const Graph& g, std::span<const NodeIndex> set_in,
                                   const MonteCarloOptions& options) {
  const NodeIndex n = g.size();
  const NodeSet set = normalize_set(n, {set_in.begin(), set_in.end()});
  if (set.empty()) throw ValidationError("Monte Carlo set must be nonempty");
  if (static_cast<NodeIndex>(set.size()) == n) {
    throw ValidationError("Monte Carlo set must not be the whole vertex set");
  }
  if (options.walks_per_node < 2) throw ValidationError("need at least 2 walks per node");
  const WalkSampler sampler(g);
  const auto in_set = membership(n, set);

  std::vector<double> mean(set.size()), variance(set.size());
  std::vector<std::uint64_t> steps_taken(set.size());
  for_each_index(static_cast<std::int64_t>(set.size()), options.execution, [&](std::int64_t a) {
    const NodeIndex start = set[a];
    Rng rng = make_rng(options.seed, static_cast<std::uint64_t>(start));
    // Welford accumulation of the per-walk exit time.
    double m = 0.0, s2 = 0.0;
    std::uint64_t total = 0;
    for (std::int64_t w = 0; w < options.walks_per_node; ++w) {
      NodeIndex at = start;
      std::int64_t steps = 0;
      while (in_set[at]) {
        at = sampler.step(at, rng);
        if (++steps > options.step_cap) {
          throw CapExceeded("walk from node '" + g.name(start) + "' exceeded " +
                            std::to_string(options.step_cap) +
                            " steps; the complement may be unreachable");
        }
      }
      total += static_cast<std::uint64_t>(steps);
      const double x = static_cast<double>(steps);
      const double delta = x - m;
      m += delta / static_cast<double>(w + 1);
      s2 += delta * (x - m);
    }
    mean[a] = m;
    variance[a] = s2 / static_cast<double>(options.walks_per_node - 1);
    steps_taken[a] = total;
  });

  MonteCarloEstimate est;
  double var_sum = 0.0;
  for (std::size_t a = 0; a < set.size(); ++a) {
    est.tau_hat += mean[a];
    var_sum += variance[a] / static_cast<double>(options.walks_per_node);
    est.total_steps += steps_taken[a];
  }
  est.tau_hat /= static_cast<double>(n);
  est.std_error = std::sqrt(var_sum) / static_cast<double>(n);
  return est;
}

std::vector<double> dense_exit_times(const Graph& g, std::span<const NodeIndex> set_in) {
  const NodeIndex n = g.size();
  const NodeSet set = normalize_set(n, {set_in.begin(), set_in.end()});
  const auto m = static_cast<Eigen::Index>(set.size());
  std::vector<int> local(static_cast<std::size_t>(n), -1);
  for (Eigen::Index a = 0; a < m; ++a) local[set[a]] = static_cast<int>(a);
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const NodeIndex i = set[a];
    auto cols = g.neighbors(i);
    auto ws = g.weights(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const int b = local[cols[k]];
      if (b >= 0) system(a, b) -= ws[k] / g.out_degree()[i];
    }
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible()) throw SolverError("restricted exit-time system is singular");
  const Eigen::VectorXd vs = lu.solve(Eigen::VectorXd::Ones(m));
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index a = 0; a < m; ++a) v[set[a]] = vs[a];
  return v;
}

double dense_mean_exit_time(const Graph& g, std::span<const NodeIndex> set) {
  const auto v = dense_exit_times(g, set);
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(g.size());
}

double dense_relaxed_energy(const Graph& g, std::span<const double> phi, double epsilon) {
  const NodeIndex n = g.size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd d(n);
  for (NodeIndex i = 0; i < n; ++i) {
    d[i] = g.out_degree()[i];
    m(i, i) = d[i] + (1.0 - phi[i]) / epsilon;
    auto cols = g.neighbors(i);
    auto ws = g.weights(i);
    for (std::size_t k = 0; k < cols.size(); ++k) m(i, cols[k]) -= ws[k];
  }
  const Eigen::VectorXd u = m.partialPivLu().solve(d);
  return u.sum() / static_cast<double>(n);
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  long double r = 1.0L;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * static_cast<long double>(n - k + i) / static_cast<long double>(i);
  }
  return static_cast<std::uint64_t>(std::llround(r));
}

BestSubgraph brute_force_best_subgraph(const Graph& g, NodeIndex k) {
  const NodeIndex n = g.size();
  if (k < 1 || k >= n) throw ValidationError("brute force requires 1 <= k < n");
  const std::uint64_t count = binomial(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(k));
  if (count > kBruteForceCap) {
    throw CapExceeded("C(" + std::to_string(n) + "," + std::to_string(k) + ") = " +
                      std::to_string(count) + " subsets exceeds the exhaustive-search cap of " +
                      std::to_string(kBruteForceCap));
  }
  BestSubgraph best;
  best.tau = -1.0;
  NodeSet current(static_cast<std::size_t>(k));
  std::iota(current.begin(), current.end(), 0);
  while (true) {
    if (closed_subset(g, current).empty()) {
      const double tau = dense_mean_exit_time(g, current);
      ++best.evaluated;
      if (tau > best.tau + 1e-12 * std::abs(best.tau)) {
        best.tau = tau;
        best.set = current;
      }
    }
    // next combination in lexicographic order
    NodeIndex pos = k - 1;
    while (pos >= 0 && current[pos] == n - k + pos) --pos;
    if (pos < 0) break;
    ++current[pos];
    for (NodeIndex q = pos + 1; q < k; ++q) current[q] = current[q - 1] + 1;
  }
  if (best.set.empty()) throw SolverError("every k-subset contains a closed class");
  return best;
}

BestPartition brute_force_best_partition(const Graph& g, int K, double epsilon) {
  const NodeIndex n = g.size();
  if (K < 1 || K > n) throw ValidationError("brute force requires 1 <= K <= n");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  long double total = 1.0L;
  for (NodeIndex i = 0; i < n; ++i) total *= K;
  if (total > static_cast<long double>(kBruteForceCap) || n > 62) {
    throw CapExceeded(std::to_string(K) + "^" + std::to_string(n) +
                      " labelings exceeds the exhaustive-search cap of " +
                      std::to_string(kBruteForceCap));
  }
  std::unordered_map<std::uint64_t, double> term_cache;
  auto term = [&](std::uint64_t mask) {
    auto it = term_cache.find(mask);
    if (it != term_cache.end()) return it->second;
    std::vector<double> phi(static_cast<std::size_t>(n), 0.0);
    for (NodeIndex i = 0; i < n; ++i) phi[i] = (mask >> i) & 1u ? 1.0 : 0.0;
    const double u_l1 = dense_relaxed_energy(g, phi, epsilon) * static_cast<double>(n);
    const double t = 1.0 / (1.0 + epsilon * u_l1);
    term_cache.emplace(mask, t);
    return t;
  };

  BestPartition best;
  best.energy = std::numeric_limits<double>::infinity();
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  std::vector<std::uint64_t> masks(static_cast<std::size_t>(K));
  while (true) {
    std::fill(masks.begin(), masks.end(), 0);
    for (NodeIndex i = 0; i < n; ++i) masks[labels[i]] |= std::uint64_t{1} << i;
    const bool surjective = std::all_of(masks.begin(), masks.end(), [](auto m) { return m != 0; });
    if (surjective) {
      double e = 0.0;
      for (int j = 0; j < K; ++j) e += term(masks[j]);
      ++best.evaluated;
      if (best.labels.empty() || e < best.energy - 1e-12 * std::abs(best.energy)) {
        best.energy = e;
        best.labels = labels;
      }
    }
    NodeIndex pos = 0;
    while (pos < n && labels[pos] == K - 1) labels[pos++] = 0;
    if (pos == n) break;
    ++labels[pos];
  }
  return best;
}

}  // namespace trapclust
