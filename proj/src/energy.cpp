#include "trapclust/energy.hpp"

#include <cmath>
#include <string>

#include "trapclust/errors.hpp"

namespace trapclust {

double relaxed_energy(const PoissonContext& ctx, const IndicatorVector& phi,
                      double epsilon, const SolverOptions& options) {
  const RegularizedSystem sys(ctx, phi, epsilon);
  const RelaxedSolution sol = solve_regularized(sys, options, /*with_transpose=*/false);
  return sol.u.sum() / static_cast<double>(ctx.size());
}

double relaxed_energy(const Graph& g, const IndicatorVector& phi, double epsilon,
                      const SolverOptions& options) {
  const PoissonContext ctx(g);
  return relaxed_energy(ctx, phi, epsilon, options);
}

Vector energy_gradient(const PoissonContext& ctx, const IndicatorVector& phi,
                       double epsilon, const SolverOptions& options) {
  const RegularizedSystem sys(ctx, phi, epsilon);
  const RelaxedSolution sol = solve_regularized(sys, options, /*with_transpose=*/true);
  const double scale = 1.0 / (static_cast<double>(ctx.size()) * epsilon);
  return scale * sol.u.cwiseProduct(sol.v);
}

Vector energy_gradient(const Graph& g, const IndicatorVector& phi, double epsilon,
                       const SolverOptions& options) {
  const PoissonContext ctx(g);
  return energy_gradient(ctx, phi, epsilon, options);
}

Eigen::MatrixXd energy_hessian_x(const PoissonContext& ctx, const IndicatorVector& phi,
                                 double epsilon) {
  const NodeIndex n = ctx.size();
  if (n > kHessianMaxNodes) {
    throw CapExceeded("dense Hessian limited to " + std::to_string(kHessianMaxNodes) +
                      " nodes (graph has " + std::to_string(n) +
                      "); use sampled finite-difference checks instead");
  }
  const RegularizedSystem sys(ctx, phi, epsilon);
  const Eigen::MatrixXd m = Eigen::MatrixXd(sys.matrix());
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const Eigen::MatrixXd inv = lu.inverse();
  const Vector u = lu.solve(ctx.degree());
  const Vector v = lu.transpose().solve(Vector::Ones(n));
  // H_jk = (M^-1)_kj u_j v_k + (M^-1)_jk v_j u_k
  const Eigen::MatrixXd w = u * v.transpose();
  return inv.transpose().cwiseProduct(w) + inv.cwiseProduct(w.transpose());
}

Eigen::MatrixXd energy_hessian(const PoissonContext& ctx, const IndicatorVector& phi,
                               double epsilon) {
  const double n = static_cast<double>(ctx.size());
  return energy_hessian_x(ctx, phi, epsilon) / (n * epsilon * epsilon);
}

Eigen::MatrixXd energy_hessian(const Graph& g, const IndicatorVector& phi, double epsilon) {
  const PoissonContext ctx(g);
  return energy_hessian(ctx, phi, epsilon);
}

double partition_energy(const PoissonContext& ctx, std::span<const IndicatorVector> phis,
                        double epsilon, double delta, const SolverOptions& options) {
  if (phis.empty()) throw ValidationError("partition energy needs at least one class");
  if (!(delta > 0.0)) throw ValidationError("delta must be positive");
  const NodeIndex n = ctx.size();
  for (const auto& phi : phis) {
    if (phi.size() != n) throw ValidationError("indicator length does not match graph");
  }
  for (NodeIndex i = 0; i < n; ++i) {
    double s = 0.0;
    for (const auto& phi : phis) s += phi[i];
    if (std::abs(s - 1.0) > 1e-9) {
      throw ValidationError("class indicators do not sum to 1 at node '" +
                            ctx.graph().name(i) + "'");
    }
  }
  double total = 0.0;
  for (const auto& phi : phis) {
    const double u_l1 = relaxed_energy(ctx, phi, epsilon, options) * static_cast<double>(n);
    total += partition_energy_term(u_l1, delta);
  }
  return total;
}

double partition_energy(const Graph& g, std::span<const IndicatorVector> phis,
                        double epsilon, double delta, const SolverOptions& options) {
  const PoissonContext ctx(g);
  return partition_energy(ctx, phis, epsilon, delta, options);
}

double partition_energy(const PoissonContext& ctx, std::span<const int> labels, int K,
                        double epsilon, double delta, const SolverOptions& options) {
  const NodeIndex n = ctx.size();
  if (static_cast<NodeIndex>(labels.size()) != n) {
    throw ValidationError("label vector length does not match graph");
  }
  std::vector<IndicatorVector> phis;
  phis.reserve(static_cast<std::size_t>(K));
  for (int j = 0; j < K; ++j) {
    std::vector<double> phi(static_cast<std::size_t>(n), 0.0);
    for (NodeIndex i = 0; i < n; ++i) {
      if (labels[i] < 0 || labels[i] >= K) throw ValidationError("label out of range");
      if (labels[i] == j) phi[i] = 1.0;
    }
    phis.emplace_back(std::move(phi));
  }
  return partition_energy(ctx, phis, epsilon, delta, options);
}

}  // namespace trapclust
