#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "trapclust/execution.hpp"
#include "trapclust/graph.hpp"
#include "trapclust/poisson.hpp"
#include "trapclust/sweep.hpp"

namespace trapclust {

// K-way rearrangement on the energy Etilde_{eps,eps} (see energy.hpp).
//
// With delta = eps the phi_j-gradient of the summand 1 / (1 + eps |u_j|_1) is
//   -(u_j .* v_j) / (1 + eps |u_j|_1)^2,
// so each step assigns node l to argmax_j of that normalized score. Empty
// classes score -inf and stay empty; their energy summand is evaluated at
// phi = 0.

enum class PartitionInit { kRandom, kSpectral };

struct PartitionSupervision {
  // Class per node, or nullopt for unlabeled nodes. Values in [0, K).
  std::vector<std::optional<int>> labels;
  double lambda = 0.0;
};

struct PartitionerConfig {
  int K = 2;
  // eps = epsilon_scale * nu / ||L||_F unless `epsilon` is set explicitly.
  double epsilon_scale = 50.0;
  double nu = 1.0;
  std::optional<double> epsilon;
  int restarts = 5;
  int max_iters = 100;
  PartitionInit init = PartitionInit::kRandom;
  std::uint64_t seed = 0;
  std::optional<PartitionSupervision> supervision;
  // Re-seed an emptied class with the node scoring lowest for its current
  // class. Breaks the descent guarantee.
  bool reseed_empty = false;
  SolverOptions solver;
  Execution execution = Execution::kParallel;
};

struct PartitionRun {
  std::vector<int> labels;
  // Etilde of every visited partition.
  std::vector<double> energy_trace;
  // |u_j|_1 = |V| E_eps(chi_{S_j}) at the final partition.
  std::vector<double> class_energies;
  int iterations = 0;
  bool converged = false;
  // Stopped because the next partition equals the one before the current.
  bool two_cycle = false;
};

struct Partition {
  std::vector<int> labels;
  std::vector<double> class_energies;
  double energy = 0.0;
  std::vector<double> energy_trace;
  int iterations = 0;
  bool converged = false;
  int best_restart = 0;
  double epsilon = 0.0;
  std::vector<double> restart_energies;
  std::vector<std::vector<double>> restart_traces;
  int nonempty_classes = 0;
  // At most one nonempty class.
  bool degenerate = false;
  std::optional<double> purity;
};

double partitioner_epsilon(const PoissonContext& ctx, const PartitionerConfig& cfg);

// One run from the given labels (values in [0, K)).
PartitionRun partition_from(const PoissonContext& ctx, const PartitionerConfig& cfg,
                            std::vector<int> initial, Rng& rng);

// Best-of-restarts partition, selected by smallest Etilde. Restart r uses
// stream r of cfg.seed. When `metadata` is given, purity is filled in.
Partition partition(const PoissonContext& ctx, const PartitionerConfig& cfg,
                    const std::optional<std::vector<std::optional<int>>>& metadata = {});
Partition partition(const Graph& g, const PartitionerConfig& cfg);

// Same as partition(); requires cfg.supervision with lambda >= 0 and labels in
// range. With lambda > 0 labeled nodes start in their class; lambda = 0 is the
// unsupervised run.
Partition partition_ssl(const PoissonContext& ctx, const PartitionerConfig& cfg,
                        const std::optional<std::vector<std::optional<int>>>& metadata = {});

// Eigenvectors of (L + L^T)/2 for the K smallest eigenvalues, as columns.
// Dense below kDenseEigenMaxNodes, shift-invert subspace iteration above.
// Throws SolverError when the iterative eigensolver does not converge.
inline constexpr NodeIndex kDenseEigenMaxNodes = 3000;
Eigen::MatrixXd spectral_embedding(const PoissonContext& ctx, int K);

// k-means++ seeded Lloyd iterations on the rows of `points`.
std::vector<int> kmeans(const Eigen::MatrixXd& points, int K, Rng& rng, int max_iters = 300);

// Spectral embedding followed by k-means. Falls back to a random labeling
// (with a warning) when the eigensolver fails.
std::vector<int> spectral_kmeans_init(const PoissonContext& ctx, int K, std::uint64_t seed);

// Uniform random labels with every class nonempty when n >= K.
std::vector<int> random_labels(NodeIndex n, int K, Rng& rng);

// For every ell, runs partition() with nu = exp(0.2 ell). Columns: ell, nu,
// epsilon, seed, purity, energy, nonempty, iterations, converged, status,
// wall_ms. Purity is NaN without metadata. A grid point whose solves fail is
// kept with status "solver_error" and NaN metrics.
SweepResult epsilon_sweep(const PoissonContext& ctx, const PartitionerConfig& cfg,
                          const std::vector<double>& ell_values,
                          const std::optional<std::vector<std::optional<int>>>& metadata = {});

}  // namespace trapclust
