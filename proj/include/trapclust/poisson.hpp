#pragma once

#include <array>
#include <atomic>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include "trapclust/graph.hpp"

namespace trapclust {

using Vector = Eigen::VectorXd;

enum class SolverKind { kAuto, kDirect, kIterative };

struct SolverOptions {
  SolverKind kind = SolverKind::kAuto;
  // Relative residual ||Ax - b|| / ||b|| required of every solve.
  double tolerance = 1e-10;
  int max_iterations = 10000;
  // kAuto uses sparse LU up to this many nodes and BiCGSTAB above.
  NodeIndex direct_max_nodes = 20000;
};

/// Per-graph data shared by every solve on that graph: the Laplacian, its
/// transpose, the degree vector and cached connectivity. Immutable once built
/// and safe to share across threads.
class PoissonContext {
 public:
  explicit PoissonContext(const Graph& g);

  const Graph& graph() const { return *graph_; }
  NodeIndex size() const { return graph_->size(); }
  const SparseMatrix& laplacian() const { return laplacian_; }
  const SparseMatrix& laplacian_transpose() const { return laplacian_t_; }
  const Vector& degree() const { return degree_; }
  double frobenius() const { return frobenius_; }
  bool strongly_connected() const { return strongly_connected_; }

  // Emits one warning per context when the graph is not strongly connected.
  void warn_if_not_strongly_connected(const char* where) const;

 private:
  const Graph* graph_;
  SparseMatrix laplacian_;
  SparseMatrix laplacian_t_;
  Vector degree_;
  double frobenius_;
  bool strongly_connected_;
  mutable std::atomic<bool> warned_{false};
};

/// L + eps^-1 diag(1 - phi) for a graph, indicator and positive eps.
class RegularizedSystem {
 public:
  RegularizedSystem(const PoissonContext& ctx, IndicatorVector phi, double epsilon);

  const PoissonContext& context() const { return *ctx_; }
  const IndicatorVector& phi() const { return phi_; }
  double epsilon() const { return epsilon_; }
  // eps^-1 (1 - phi)
  const Vector& potential() const { return potential_; }

  SparseMatrix matrix() const;

 private:
  const PoissonContext* ctx_;
  IndicatorVector phi_;
  double epsilon_;
  Vector potential_;
};

struct RelaxedSolution {
  Vector u;  // (L + X) u = d
  Vector v;  // (L + X)^T v = 1; empty when only the forward solve was requested
  std::array<double, 2> residual_norms{0.0, 0.0};

  bool has_v() const { return v.size() > 0; }
};

/// Factorization of L + diag(potential) reused for forward and transpose
/// solves. The sparsity pattern is analyzed once; refactor() swaps in a new
/// potential. One instance per thread.
class ShiftedLaplacianSolver {
 public:
  ShiftedLaplacianSolver(const PoissonContext& ctx, SolverOptions options = {});

  void refactor(const Vector& potential);

  // Solves (L + X) x = b. `guess` seeds the iterative backend when non-empty.
  Vector solve(const Vector& b, double* residual = nullptr,
               const Vector* guess = nullptr) const;
  Vector solve_transpose(const Vector& b, double* residual = nullptr,
                         const Vector* guess = nullptr) const;

  bool direct() const { return direct_; }
  const SolverOptions& options() const { return options_; }

 private:
  Vector solve_impl(const Vector& b, bool transpose, double* residual,
                    const Vector* guess) const;

  const PoissonContext* ctx_;
  SolverOptions options_;
  bool direct_;
  SparseMatrix matrix_;
  SparseMatrix matrix_t_;
  std::vector<int> diag_pos_;
  std::vector<int> diag_pos_t_;
  Vector base_diag_;
  std::unique_ptr<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>> lu_;
  bool pattern_analyzed_ = false;
  bool factored_ = false;
};

/// Exact mean exit times: v solves L v = d on S with v = 0 off S, and
/// tau = (1/|V|) sum_i v_i. Throws SolverError naming the closed class when
/// some node of S cannot reach the complement.
struct ExitTimes {
  Vector v;
  double tau = 0.0;
};

ExitTimes solve_exact_met(const PoissonContext& ctx, std::span<const NodeIndex> set,
                          const SolverOptions& options = {});
ExitTimes solve_exact_met(const Graph& g, std::span<const NodeIndex> set,
                          const SolverOptions& options = {});

// Forward and (optionally) transpose solves of the regularized system.
RelaxedSolution solve_regularized(const RegularizedSystem& sys,
                                  const SolverOptions& options = {},
                                  bool with_transpose = true);

// Same, reusing a caller-owned solver (the detector and partitioner loops).
RelaxedSolution solve_regularized(ShiftedLaplacianSolver& solver,
                                  const RegularizedSystem& sys,
                                  bool with_transpose = true,
                                  const RelaxedSolution* warm_start = nullptr);

// Strict positivity of u and v.
bool neumann_bound_check(const RegularizedSystem& sys, const RelaxedSolution& sol);

}  // namespace trapclust
