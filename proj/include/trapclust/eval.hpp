#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "trapclust/execution.hpp"
#include "trapclust/graph.hpp"

namespace trapclust {

// (1/N) sum_k max_l N_k^l over nodes that carry metadata. Cluster ids and
// class ids are arbitrary nonnegative integers.
double purity(std::span<const int> clusters, std::span<const std::optional<int>> metadata);
double purity(std::span<const int> clusters, std::span<const int> metadata);

// |S n S*| / |S*|
double subgraph_accuracy(std::span<const NodeIndex> set, std::span<const NodeIndex> planted);

/// Walker's alias tables for P = D^-1 A: O(1) transitions per step.
class WalkSampler {
 public:
  explicit WalkSampler(const Graph& g);

  template <typename Gen>
  NodeIndex step(NodeIndex from, Gen& rng) const {
    const auto begin = row_ptr_[from];
    const auto len = row_ptr_[from + 1] - begin;
    const auto slot = begin + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(len));
    const double coin = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return coin < prob_[slot] ? target_[slot] : alias_[slot];
  }

 private:
  std::vector<std::int64_t> row_ptr_;
  std::vector<NodeIndex> target_;
  std::vector<NodeIndex> alias_;
  std::vector<double> prob_;
};

struct MonteCarloEstimate {
  double tau_hat = 0.0;
  double std_error = 0.0;
  std::uint64_t total_steps = 0;
};

struct MonteCarloOptions {
  std::int64_t walks_per_node = 100000;
  std::int64_t step_cap = 10'000'000;
  std::uint64_t seed = 0;
  Execution execution = Execution::kParallel;
};

// Simulates walks from every node of S until they first leave S. Start node
// i uses stream i of the seed, so parallel and serial runs agree exactly.
// Throws CapExceeded when a walk exceeds the step cap.
MonteCarloEstimate monte_carlo_met(const Graph& g, std::span<const NodeIndex> set,
                                   const MonteCarloOptions& options = {});

// Exit times by dense LU of (I - P)_SS; independent of the sparse path.
std::vector<double> dense_exit_times(const Graph& g, std::span<const NodeIndex> set);
double dense_mean_exit_time(const Graph& g, std::span<const NodeIndex> set);

// Relaxed energy |u|_1 / |V| by dense LU; independent of the sparse path.
double dense_relaxed_energy(const Graph& g, std::span<const double> phi, double epsilon);

inline constexpr std::uint64_t kBruteForceCap = 1'000'000;

struct BestSubgraph {
  NodeSet set;
  double tau = 0.0;
  std::uint64_t evaluated = 0;
};

// Exhaustive max of tau over all k-subsets (ties: lexicographically smallest).
// Subsets containing a closed class are skipped. Throws CapExceeded when
// C(n,k) > kBruteForceCap.
BestSubgraph brute_force_best_subgraph(const Graph& g, NodeIndex k);

struct BestPartition {
  std::vector<int> labels;
  double energy = 0.0;
  std::uint64_t evaluated = 0;
};

// Exhaustive min of the K-way energy with delta = epsilon over all surjective
// labelings. Throws CapExceeded when K^n > kBruteForceCap.
BestPartition brute_force_best_partition(const Graph& g, int K, double epsilon);

std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

}  // namespace trapclust
