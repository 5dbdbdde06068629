#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/SparseCore>

namespace trapclust {

using NodeIndex = std::int32_t;

// Sorted, duplicate-free list of node indices.
using NodeSet = std::vector<NodeIndex>;

struct Edge {
  NodeIndex src;
  NodeIndex dst;
  double weight;
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using RowSparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

/// Immutable weighted directed graph in CSR form.
///
/// Edge i -> j with weight A_ij is stored in row i. Rows are sorted by column
/// and parallel edges are summed on construction. Construction rejects
/// negative or non-finite weights and nodes with zero out-degree, so every
/// Graph value satisfies d_i > 0.
class Graph {
 public:
  Graph() = default;

  static Graph from_edges(NodeIndex n, std::span<const Edge> edges,
                          std::vector<std::string> node_names = {});

  NodeIndex size() const { return n_; }
  std::size_t num_edges() const { return col_.size(); }

  std::span<const NodeIndex> neighbors(NodeIndex i) const {
    return {col_.data() + row_ptr_[i], col_.data() + row_ptr_[i + 1]};
  }
  std::span<const double> weights(NodeIndex i) const {
    return {weight_.data() + row_ptr_[i], weight_.data() + row_ptr_[i + 1]};
  }
  double weight(NodeIndex i, NodeIndex j) const;

  // Out-degree (strength). d_i is the compensated left-to-right sum of row i.
  const std::vector<double>& out_degree() const { return degree_; }

  const std::vector<std::string>& node_names() const { return names_; }
  const std::string& name(NodeIndex i) const { return names_[i]; }
  std::optional<NodeIndex> find(const std::string& name) const;

  std::vector<Edge> edges() const;

  // (A + A^T) / 2, keeping node names.
  Graph symmetrized() const;
  Graph transposed() const;
  bool is_symmetric() const;

  // Row-major A.
  RowSparseMatrix adjacency() const;

  bool operator==(const Graph& other) const = default;

 private:
  NodeIndex n_ = 0;
  std::vector<std::int64_t> row_ptr_{0};
  std::vector<NodeIndex> col_;
  std::vector<double> weight_;
  std::vector<double> degree_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, NodeIndex> index_;
};

// Sum in the documented order (left to right) with Neumaier compensation.
double compensated_sum(std::span<const double> values);

/// Soft or binary set indicator phi in [0,1]^n.
class IndicatorVector {
 public:
  IndicatorVector() = default;
  explicit IndicatorVector(std::vector<double> phi);
  static IndicatorVector from_set(NodeIndex n, std::span<const NodeIndex> set);

  std::span<const double> values() const { return phi_; }
  NodeIndex size() const { return static_cast<NodeIndex>(phi_.size()); }
  double operator[](NodeIndex i) const { return phi_[i]; }

  bool is_binary() const { return binary_; }
  // Number of ones when binary; the sum of entries otherwise.
  double support_size() const;
  bool is_all_ones() const;

 private:
  std::vector<double> phi_;
  bool binary_ = false;
};

struct LoadOptions {
  bool symmetrize = false;
  // When > 0, adds a self-loop of this weight to every node before the
  // dangling-node check.
  double self_loop_weight = 0.0;
};

enum class GraphFormat { kAuto, kEdgeList, kMatrixMarket };

// Whitespace-separated "src dst [weight]" lines, '#' comments. Node ids are
// mapped to 0-based indices in first-appearance order.
Graph load_edge_list(std::istream& in, const LoadOptions& options = {});

// MatrixMarket coordinate format (real, integer or pattern; general or
// symmetric). Node names are the 1-based indices as strings.
Graph load_matrix_market(std::istream& in, const LoadOptions& options = {});

Graph load_graph(const std::string& path, const LoadOptions& options = {},
                 GraphFormat format = GraphFormat::kAuto);

// Writes "src dst weight" lines with round-trip exact weights.
void save_edge_list(const Graph& g, std::ostream& out);

/// Node -> class-id metadata. Class ids are dense in first-appearance order of
/// the label strings; nodes missing from the label file map to nullopt.
struct NodeLabels {
  std::vector<std::optional<int>> label;
  std::vector<std::string> class_names;

  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::size_t num_labeled() const;
};

NodeLabels load_labels(std::istream& in, const Graph& g);
NodeLabels load_labels(const std::string& path, const Graph& g);
void save_labels(const Graph& g, std::span<const int> labels, std::ostream& out);

// Reads one node name per whitespace-separated token.
NodeSet load_node_set(std::istream& in, const Graph& g);

/// L = D - A in compressed column form.
SparseMatrix laplacian(const Graph& g);

double laplacian_frobenius(const Graph& g);

bool is_strongly_connected(const Graph& g);

// Component id per node (Tarjan, iterative). Ids are dense from 0.
std::vector<int> strongly_connected_components(const Graph& g);

// Nodes of `set` from which no directed path leads outside `set`.
NodeSet closed_subset(const Graph& g, std::span<const NodeIndex> set);

// Sorts and deduplicates; throws ValidationError on out-of-range entries.
NodeSet normalize_set(NodeIndex n, std::vector<NodeIndex> set);

std::vector<bool> membership(NodeIndex n, std::span<const NodeIndex> set);

}  // namespace trapclust
