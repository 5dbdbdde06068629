#include "trapclust/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>

#include "trapclust/errors.hpp"
#include "trapclust/log.hpp"

namespace trapclust {

PoissonContext::PoissonContext(const Graph& g)
    : graph_(&g),
      laplacian_(trapclust::laplacian(g)),
      laplacian_t_(laplacian_.transpose()),
      degree_(Eigen::Map<const Vector>(g.out_degree().data(), g.size())),
      frobenius_(laplacian_frobenius(g)),
      strongly_connected_(is_strongly_connected(g)) {
  laplacian_t_.makeCompressed();
}

void PoissonContext::warn_if_not_strongly_connected(const char* where) const {
  if (strongly_connected_) return;
  if (!warned_.exchange(true)) {
    warn(std::string(where) +
         ": graph is not strongly connected; exit times may be degenerate");
  }
}

RegularizedSystem::RegularizedSystem(const PoissonContext& ctx, IndicatorVector phi,
                                     double epsilon)
    : ctx_(&ctx), phi_(std::move(phi)), epsilon_(epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError("epsilon must be positive and finite");
  }
  if (phi_.size() != ctx.size()) {
    throw ValidationError("indicator length does not match graph size");
  }
  if (phi_.is_all_ones()) {
    throw SolverError(
        "phi is identically 1: L + eps^-1(1 - phi) reduces to the singular "
        "Laplacian");
  }
  potential_.resize(ctx.size());
  for (NodeIndex i = 0; i < ctx.size(); ++i) potential_[i] = (1.0 - phi_[i]) / epsilon_;
}

SparseMatrix RegularizedSystem::matrix() const {
  SparseMatrix m = ctx_->laplacian();
  for (NodeIndex i = 0; i < ctx_->size(); ++i) m.coeffRef(i, i) += potential_[i];
  return m;
}

namespace {

std::vector<int> diagonal_positions(const SparseMatrix& m) {
  std::vector<int> pos(static_cast<std::size_t>(m.cols()), -1);
  for (int c = 0; c < m.outerSize(); ++c) {
    for (int p = m.outerIndexPtr()[c]; p < m.outerIndexPtr()[c + 1]; ++p) {
      if (m.innerIndexPtr()[p] == c) pos[c] = p;
    }
    if (pos[c] < 0) throw SolverError("Laplacian is missing a diagonal entry");
  }
  return pos;
}

double relative_residual(const SparseMatrix& m, const Vector& x, const Vector& b) {
  const double bn = b.norm();
  const double rn = (b - m * x).norm();
  return bn > 0.0 ? rn / bn : rn;
}

}  // namespace

ShiftedLaplacianSolver::ShiftedLaplacianSolver(const PoissonContext& ctx,
                                               SolverOptions options)
    : ctx_(&ctx),
      options_(options),
      direct_(options.kind == SolverKind::kDirect ||
              (options.kind == SolverKind::kAuto && ctx.size() <= options.direct_max_nodes)),
      matrix_(ctx.laplacian()),
      matrix_t_(ctx.laplacian_transpose()),
      diag_pos_(diagonal_positions(matrix_)),
      diag_pos_t_(diagonal_positions(matrix_t_)),
      base_diag_(ctx.size()) {
  for (NodeIndex i = 0; i < ctx.size(); ++i) base_diag_[i] = matrix_.valuePtr()[diag_pos_[i]];
  if (direct_) lu_ = std::make_unique<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>>();
}

void ShiftedLaplacianSolver::refactor(const Vector& potential) {
  if (potential.size() != ctx_->size()) throw ValidationError("potential size mismatch");
  for (NodeIndex i = 0; i < ctx_->size(); ++i) {
    const double diag = base_diag_[i] + potential[i];
    matrix_.valuePtr()[diag_pos_[i]] = diag;
    matrix_t_.valuePtr()[diag_pos_t_[i]] = diag;
  }
  factored_ = true;
  if (!direct_) return;
  if (!pattern_analyzed_) {
    lu_->analyzePattern(matrix_);
    pattern_analyzed_ = true;
  }
  lu_->factorize(matrix_);
  if (lu_->info() != Eigen::Success) {
    factored_ = false;
    throw SolverError("sparse LU factorization failed (singular operator): " +
                      lu_->lastErrorMessage());
  }
}

Vector ShiftedLaplacianSolver::solve(const Vector& b, double* residual,
                                     const Vector* guess) const {
  return solve_impl(b, false, residual, guess);
}

Vector ShiftedLaplacianSolver::solve_transpose(const Vector& b, double* residual,
                                               const Vector* guess) const {
  return solve_impl(b, true, residual, guess);
}

Vector ShiftedLaplacianSolver::solve_impl(const Vector& b, bool transpose,
                                          double* residual, const Vector* guess) const {
  if (!factored_) throw SolverError("solve called before refactor()");
  const SparseMatrix& m = transpose ? matrix_t_ : matrix_;
  const double tol = options_.tolerance;
  Vector x;
  double res = 0.0;

  if (direct_) {
    x = transpose ? Vector(lu_->transpose().solve(b)) : Vector(lu_->solve(b));
    res = relative_residual(m, x, b);
    // Iterative refinement against the stored factorization.
    for (int round = 0; round < 3 && !(res <= tol); ++round) {
      const Vector r = b - m * x;
      x += transpose ? Vector(lu_->transpose().solve(r)) : Vector(lu_->solve(r));
      res = relative_residual(m, x, b);
    }
  } else {
    Eigen::BiCGSTAB<SparseMatrix, Eigen::DiagonalPreconditioner<double>> krylov;
    krylov.setTolerance(tol);
    krylov.setMaxIterations(options_.max_iterations);
    krylov.compute(m);
    x = (guess && guess->size() == b.size()) ? Vector(krylov.solveWithGuess(b, *guess))
                                             : Vector(krylov.solve(b));
    res = relative_residual(m, x, b);
    // BiCGSTAB's internal residual can drift from the true one; restart from
    // the current iterate a bounded number of times, stopping on stagnation.
    int iterations = static_cast<int>(krylov.iterations());
    for (int round = 0; round < 4 && !(res <= tol) && iterations < options_.max_iterations;
         ++round) {
      Vector next = krylov.solveWithGuess(b, x);
      iterations += static_cast<int>(krylov.iterations());
      const double next_res = relative_residual(m, next, b);
      if (!(next_res < 0.5 * res)) {
        if (next_res < res) x = std::move(next), res = next_res;
        break;
      }
      x = std::move(next);
      res = next_res;
    }
  }

  if (residual) *residual = res;
  if (!std::isfinite(res) || !x.allFinite()) {
    throw SolverError("solver breakdown (non-finite iterate)", res);
  }
  if (!(res <= tol)) {
    std::ostringstream msg;
    msg << (direct_ ? "direct" : "iterative") << " solve did not reach tolerance "
        << tol << " (relative residual " << res
        << "); operator is near-singular or ill-conditioned";
    throw SolverError(msg.str(), res);
  }
  return x;
}

namespace {

void check_closed(const Graph& g, std::span<const NodeIndex> set) {
  const NodeSet closed = closed_subset(g, set);
  if (closed.empty()) return;
  const auto comp = strongly_connected_components(g);
  std::ostringstream msg;
  msg << "singular exit-time system: " << closed.size()
      << " node(s) cannot reach the complement of the set (closed class";
  const std::size_t shown = std::min<std::size_t>(closed.size(), 10);
  for (std::size_t k = 0; k < shown; ++k) {
    msg << (k == 0 ? ": " : ", ") << g.name(closed[k]) << " [scc " << comp[closed[k]] << "]";
  }
  if (shown < closed.size()) msg << ", ...";
  msg << ")";
  throw SolverError(msg.str());
}

}  // namespace

ExitTimes solve_exact_met(const PoissonContext& ctx, std::span<const NodeIndex> set_in,
                          const SolverOptions& options) {
  const Graph& g = ctx.graph();
  const NodeIndex n = g.size();
  const NodeSet set = normalize_set(n, {set_in.begin(), set_in.end()});
  if (set.empty()) throw ValidationError("exit-time set must be nonempty");
  if (static_cast<NodeIndex>(set.size()) == n) {
    throw ValidationError("exit-time set must not be the whole vertex set");
  }
  ctx.warn_if_not_strongly_connected("solve_exact_met");
  check_closed(g, set);

  const auto m = static_cast<int>(set.size());
  std::vector<int> local(static_cast<std::size_t>(n), -1);
  for (int a = 0; a < m; ++a) local[set[a]] = a;

  std::vector<Eigen::Triplet<double, int>> trips;
  const SparseMatrix& l = ctx.laplacian_transpose();  // column c of L^T = row c of L
  Vector rhs(m);
  for (int a = 0; a < m; ++a) {
    const NodeIndex i = set[a];
    rhs[a] = ctx.degree()[i];
    for (SparseMatrix::InnerIterator it(l, i); it; ++it) {
      const int b = local[it.row()];
      if (b >= 0) trips.emplace_back(a, b, it.value());
    }
  }
  SparseMatrix sub(m, m);
  sub.setFromTriplets(trips.begin(), trips.end());
  sub.makeCompressed();

  Vector vs;
  double res = 0.0;
  const bool direct = options.kind == SolverKind::kDirect ||
                      (options.kind == SolverKind::kAuto && m <= options.direct_max_nodes);
  if (direct) {
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(sub);
    if (lu.info() != Eigen::Success) {
      throw SolverError("restricted exit-time system is singular: " + lu.lastErrorMessage());
    }
    vs = lu.solve(rhs);
    res = relative_residual(sub, vs, rhs);
    for (int round = 0; round < 3 && !(res <= options.tolerance); ++round) {
      vs += Vector(lu.solve(Vector(rhs - sub * vs)));
      res = relative_residual(sub, vs, rhs);
    }
  } else {
    Eigen::BiCGSTAB<SparseMatrix, Eigen::DiagonalPreconditioner<double>> krylov;
    krylov.setTolerance(options.tolerance);
    krylov.setMaxIterations(options.max_iterations);
    krylov.compute(sub);
    vs = krylov.solve(rhs);
    res = relative_residual(sub, vs, rhs);
  }
  if (!vs.allFinite() || !(res <= options.tolerance)) {
    throw SolverError("exit-time solve did not converge", res);
  }

  ExitTimes out;
  out.v = Vector::Zero(n);
  for (int a = 0; a < m; ++a) out.v[set[a]] = vs[a];
  out.tau = out.v.sum() / static_cast<double>(n);
  return out;
}

ExitTimes solve_exact_met(const Graph& g, std::span<const NodeIndex> set,
                          const SolverOptions& options) {
  const PoissonContext ctx(g);
  return solve_exact_met(ctx, set, options);
}

RelaxedSolution solve_regularized(ShiftedLaplacianSolver& solver,
                                  const RegularizedSystem& sys, bool with_transpose,
                                  const RelaxedSolution* warm_start) {
  const PoissonContext& ctx = sys.context();
  solver.refactor(sys.potential());
  RelaxedSolution sol;
  const Vector* u_guess = warm_start ? &warm_start->u : nullptr;
  const Vector* v_guess = (warm_start && warm_start->has_v()) ? &warm_start->v : nullptr;
  sol.u = solver.solve(ctx.degree(), &sol.residual_norms[0], u_guess);
  if (with_transpose) {
    sol.v = solver.solve_transpose(Vector::Ones(ctx.size()), &sol.residual_norms[1], v_guess);
  }
  return sol;
}

RelaxedSolution solve_regularized(const RegularizedSystem& sys,
                                  const SolverOptions& options, bool with_transpose) {
  ShiftedLaplacianSolver solver(sys.context(), options);
  return solve_regularized(solver, sys, with_transpose);
}

bool neumann_bound_check(const RegularizedSystem& sys, const RelaxedSolution& sol) {
  if (sol.u.size() != sys.context().size()) return false;
  if (!((sol.u.array() > 0.0).all())) return false;
  if (sol.has_v() && !((sol.v.array() > 0.0).all())) return false;
  return sol.has_v();
}

}  // namespace trapclust
