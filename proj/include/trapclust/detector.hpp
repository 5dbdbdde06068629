#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "trapclust/execution.hpp"
#include "trapclust/graph.hpp"
#include "trapclust/poisson.hpp"
#include "trapclust/sweep.hpp"

namespace trapclust {

// Labeled nodes for semi-supervised detection: `inside` nodes should be in
// the detected set (phi_hat = 1), `outside` nodes in its complement.
struct DetectorSupervision {
  NodeSet inside;
  NodeSet outside;
  double lambda = 0.0;
};

struct DetectorConfig {
  NodeIndex k = 0;
  // eps = epsilon_scale / ||L||_F unless `epsilon` is set explicitly.
  double epsilon_scale = 50.0;
  std::optional<double> epsilon;
  int restarts = 5;
  int max_iters = 100;
  std::uint64_t seed = 0;
  std::optional<DetectorSupervision> supervision;
  SolverOptions solver;
  Execution execution = Execution::kParallel;
};

struct DetectorRun {
  NodeSet set;
  // E_eps(chi_{S^t}) for every visited set S^0, S^1, ..., S^T.
  std::vector<double> energy_trace;
  int iterations = 0;
  bool converged = false;
};

struct DetectorResult {
  NodeSet set;
  std::vector<double> energy_trace;
  double energy = 0.0;
  double exact_met = 0.0;
  int iterations = 0;
  bool converged = false;
  int best_restart = 0;
  double epsilon = 0.0;
  // Final energy of every restart, in restart order.
  std::vector<double> restart_energies;
};

double detector_epsilon(const PoissonContext& ctx, const DetectorConfig& cfg);

// Selection scores for one rearrangement step. Without supervision (or with
// lambda = 0) this is u .* v; with supervision it is u .* v / eps plus 2 lambda
// on `inside` nodes and minus 2 lambda on `outside` nodes.
Vector detect_ssl_score(const Vector& u, const Vector& v, double epsilon,
                        const std::optional<DetectorSupervision>& supervision);

// The k largest scores; ties at the threshold are broken uniformly at random.
NodeSet select_top_k(const Vector& scores, NodeIndex k, Rng& rng);

// One solve-and-select step from `set`.
NodeSet rearrangement_step(const PoissonContext& ctx, const NodeSet& set,
                           const DetectorConfig& cfg, Rng& rng);

// True when `set` is selected again by a rearrangement step up to ties:
// every score inside is >= every score outside.
bool is_rearrangement_fixed_point(const PoissonContext& ctx, const NodeSet& set,
                                  const DetectorConfig& cfg);

// A single rearrangement run from a given initial set.
DetectorRun detect_from(const PoissonContext& ctx, const DetectorConfig& cfg,
                        NodeSet initial, Rng& rng);

// Best-of-restarts detection (selected by E_eps). Restart r draws its initial
// set and tie-breaks from stream r of cfg.seed, so cfg.execution does not
// change the result.
DetectorResult detect(const PoissonContext& ctx, const DetectorConfig& cfg);
DetectorResult detect(const Graph& g, const DetectorConfig& cfg);

// Best-of-restarts detection for every k. Columns: k, seed, tau, energy,
// iterations, converged, wall_ms.
SweepResult k_sweep(const PoissonContext& ctx, const std::vector<NodeIndex>& k_values,
                    const DetectorConfig& cfg);

// Grid positions of the `count` largest |tau(k+1) - 2 tau(k) + tau(k-1)|,
// in descending magnitude. Assumes k_values evenly spaced.
std::vector<NodeIndex> k_sweep_breaks(const std::vector<NodeIndex>& k_values,
                                      const std::vector<double>& tau, int count = 2);

NodeSet random_subset(NodeIndex n, NodeIndex k, Rng& rng);

}  // namespace trapclust
