#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "trapclust/graph.hpp"
#include "trapclust/poisson.hpp"

namespace trapclust {

// Relaxed exit-time energies.
//
// For a soft indicator phi and eps > 0 let X = eps^-1 (1 - phi) and
// u = (L + X)^-1 d. The relaxed energy is E_eps(phi) = |u|_1 / |V|; for
// phi = chi_S it tends to the mean exit time tau(S) as eps -> 0.
//
// In X-coordinates, with v = (L + X)^-T 1 and M = L + X:
//   grad_X |u|_1    = -(u .* v)
//   hess_X |u|_1    = M^-T .* (u v^T) + M^-1 .* (v u^T)
// and the chain rule through X(phi) gives the phi-gradient
//   grad_phi E_eps  = (u .* v) / (|V| eps),
// which is strictly positive on strongly connected graphs. E_eps is convex in
// phi, so maximizers over {0 <= phi <= 1, sum phi = k} are indicators.
//
// The K-way energy is
//   Etilde_{delta,eps}(phi_1..phi_K) = sum_j 1 / (1 + delta |u_j|_1),
// minimized over the product of simplices. Two simpler K-way objectives,
// sum_j E_eps(chi_{S_j}) (maximized by putting every node in one class) and
// sum_j 1 / |u_j|_1 (no bang-bang guarantee), are deliberately not offered.

double relaxed_energy(const PoissonContext& ctx, const IndicatorVector& phi,
                      double epsilon, const SolverOptions& options = {});
double relaxed_energy(const Graph& g, const IndicatorVector& phi, double epsilon,
                      const SolverOptions& options = {});

// Gradient of E_eps with respect to phi.
Vector energy_gradient(const PoissonContext& ctx, const IndicatorVector& phi,
                       double epsilon, const SolverOptions& options = {});
Vector energy_gradient(const Graph& g, const IndicatorVector& phi, double epsilon,
                       const SolverOptions& options = {});

inline constexpr NodeIndex kHessianMaxNodes = 500;

// Dense Hessian of |u|_1 in X-coordinates. Throws CapExceeded above
// kHessianMaxNodes.
Eigen::MatrixXd energy_hessian_x(const PoissonContext& ctx, const IndicatorVector& phi,
                                 double epsilon);

// Dense Hessian of E_eps in phi-coordinates: hess_X / (|V| eps^2).
Eigen::MatrixXd energy_hessian(const PoissonContext& ctx, const IndicatorVector& phi,
                               double epsilon);
Eigen::MatrixXd energy_hessian(const Graph& g, const IndicatorVector& phi, double epsilon);

// One summand of the K-way energy from |u_j|_1.
inline double partition_energy_term(double u_l1, double delta) {
  return 1.0 / (1.0 + delta * u_l1);
}

// Etilde_{delta,eps}. The phis must sum to 1 at every node (within 1e-9).
double partition_energy(const PoissonContext& ctx, std::span<const IndicatorVector> phis,
                        double epsilon, double delta, const SolverOptions& options = {});
double partition_energy(const Graph& g, std::span<const IndicatorVector> phis,
                        double epsilon, double delta, const SolverOptions& options = {});

// Hard-partition convenience: phis are the class indicators of `labels`
// (values in [0, K)). Empty classes contribute with phi = 0.
double partition_energy(const PoissonContext& ctx, std::span<const int> labels, int K,
                        double epsilon, double delta, const SolverOptions& options = {});

}  // namespace trapclust
