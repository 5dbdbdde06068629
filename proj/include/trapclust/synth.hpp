#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trapclust/graph.hpp"

namespace trapclust {

enum class WeightDistribution {
  kConstant,    // every inter-block edge has weight `inter_weight`
  kHalfNormal,  // |N(0,1)| draws rescaled so the sample maximum is `inter_weight`
  kUniform,     // U(0, inter_weight]
};

/// Parameters of a MultIsCale K-block Escape Ensemble graph: K planted dense
/// ER blocks of increasing size inside a sparse background block, joined by
/// weak inter-block edges. Either the density or the expected-degree form of
/// each parameter may be given; degree wins when both are set (the spec-file
/// reader clears the counterpart of whichever key it sees).
struct MickeeSpec {
  NodeIndex total_nodes = 1000;
  std::vector<NodeIndex> block_sizes{80, 160, 240};

  std::optional<double> intra_density;
  std::optional<double> intra_degree = 20.8;
  double intra_weight = 1.0;

  std::optional<double> background_density;
  std::optional<double> background_degree = 20.8;

  // Probability of an edge between two nodes in different groups. The degree
  // form is the expected inter-block degree of a node in the smallest block.
  std::optional<double> inter_density = 0.01;
  std::optional<double> inter_degree;
  WeightDistribution inter_weight_dist = WeightDistribution::kHalfNormal;
  double inter_weight = 0.05;

  // Background block drawn from a configuration model with P(deg) ~ deg^-q.
  std::optional<double> powerlaw_exponent;
  NodeIndex powerlaw_min_degree = 4;

  int max_retries = 100;
  std::uint64_t seed = 0;

  NodeIndex background_size() const;
  // Probability used inside planted block b.
  double intra_probability(std::size_t b) const;
  double background_probability() const;
  double inter_probability() const;
  void validate() const;
};

struct PlantedGraph {
  Graph graph;
  // Group per node: 0..K-1 planted blocks (smallest first), K = background.
  // For the ER+cycle family: 0 = ER, 1 = cycle.
  std::vector<int> labels;
  // Number of resampling rounds needed to reach connectivity.
  int attempts = 1;

  NodeSet group(int label) const;
};

PlantedGraph generate_mickee(const MickeeSpec& spec);

// generate_mickee with a configuration-model background; requires
// spec.powerlaw_exponent in [2.1, 4].
PlantedGraph generate_powerlaw_mickee(const MickeeSpec& spec);

struct ErCycleSpec {
  NodeIndex n_er = 100;
  NodeIndex n_cycle = 10;
  double p_er = 0.1;
  // Probability that an ER node gets one edge into a uniformly chosen cycle node.
  double p_to_cycle = 0.5;
  // Weight of ER -> cycle edges relative to ER -> ER edges before rescaling.
  double w_in = 1.0;
  int max_retries = 100;
  std::uint64_t seed = 0;
};

/// Directed ER graph plus a directed cycle with many ER -> cycle edges and a
/// single cycle -> ER edge. ER rows are rescaled to the mean ER out-degree
/// and cycle edges carry that same weight, so out-degrees are equal except
/// at the exit node.
PlantedGraph generate_er_cycle(const ErCycleSpec& spec);
PlantedGraph generate_er_cycle(NodeIndex n_er, NodeIndex n_cycle, double p_er,
                               double w_in, std::uint64_t seed);

// Discrete power-law degree sequence on [min_degree, max_degree].
std::vector<NodeIndex> sample_powerlaw_degrees(NodeIndex count, double exponent,
                                               NodeIndex min_degree, NodeIndex max_degree,
                                               std::uint64_t seed);

// Discrete maximum-likelihood tail exponent for values >= min_value
// (continuous approximation with the half-integer correction).
double fit_powerlaw_exponent(const std::vector<NodeIndex>& values, NodeIndex min_value);

// key=value spec file ('#' comments). Recognized keys mirror the struct
// fields; unknown keys are a ValidationError.
using SpecEntries = std::map<std::string, std::string>;
SpecEntries read_spec_entries(std::istream& in);
MickeeSpec mickee_spec_from(const SpecEntries& entries);
ErCycleSpec er_cycle_spec_from(const SpecEntries& entries);

}  // namespace trapclust
