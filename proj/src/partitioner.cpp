#include "trapclust/partitioner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "trapclust/detector.hpp"
#include "trapclust/energy.hpp"
#include "trapclust/errors.hpp"
#include "trapclust/eval.hpp"
#include "trapclust/log.hpp"

namespace trapclust {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void validate(const PoissonContext& ctx, const PartitionerConfig& cfg) {
  const NodeIndex n = ctx.size();
  if (cfg.K < 1 || cfg.K > n) {
    throw ValidationError("partitioner requires 1 <= K <= n (K=" + std::to_string(cfg.K) +
                          ", n=" + std::to_string(n) + ")");
  }
  if (!(cfg.nu > 0.0)) throw ValidationError("nu must be positive");
  if (cfg.restarts < 1) throw ValidationError("restarts must be >= 1");
  if (cfg.max_iters < 1) throw ValidationError("max_iters must be >= 1");
  if (cfg.supervision) {
    const auto& sup = *cfg.supervision;
    if (sup.lambda < 0.0) throw ValidationError("supervision weight must be >= 0");
    if (static_cast<NodeIndex>(sup.labels.size()) != n) {
      throw ValidationError("supervision labels must cover every node");
    }
    for (const auto& l : sup.labels) {
      if (l && (*l < 0 || *l >= cfg.K)) {
        throw ValidationError("supervision label " + std::to_string(*l) + " outside [0, K)");
      }
    }
  }
}

bool supervised(const PartitionerConfig& cfg) {
  return cfg.supervision && cfg.supervision->lambda > 0.0;
}

}  // namespace

double partitioner_epsilon(const PoissonContext& ctx, const PartitionerConfig& cfg) {
  if (cfg.epsilon) {
    if (!(*cfg.epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    return *cfg.epsilon;
  }
  if (!(cfg.epsilon_scale > 0.0)) throw ValidationError("epsilon scale must be positive");
  if (!(cfg.nu > 0.0)) throw ValidationError("nu must be positive");
  return cfg.epsilon_scale * cfg.nu / ctx.frobenius();
}

std::vector<int> random_labels(NodeIndex n, int K, Rng& rng) {
  std::vector<int> labels(static_cast<std::size_t>(n));
  std::uniform_int_distribution<int> pick(0, K - 1);
  for (auto& l : labels) l = pick(rng);
  if (n >= K) {
    const NodeSet anchors = random_subset(n, K, rng);
    std::vector<int> classes(static_cast<std::size_t>(K));
    std::iota(classes.begin(), classes.end(), 0);
    std::shuffle(classes.begin(), classes.end(), rng);
    for (int j = 0; j < K; ++j) labels[anchors[j]] = classes[j];
  }
  return labels;
}

PartitionRun partition_from(const PoissonContext& ctx, const PartitionerConfig& cfg,
                            std::vector<int> initial, Rng& rng) {
  validate(ctx, cfg);
  const NodeIndex n = ctx.size();
  const int K = cfg.K;
  if (static_cast<NodeIndex>(initial.size()) != n) {
    throw ValidationError("initial labels must cover every node");
  }
  for (int l : initial) {
    if (l < 0 || l >= K) throw ValidationError("initial label outside [0, K)");
  }
  const double eps = partitioner_epsilon(ctx, cfg);
  const double lambda = supervised(cfg) ? cfg.supervision->lambda : 0.0;

  std::vector<std::unique_ptr<ShiftedLaplacianSolver>> solvers(static_cast<std::size_t>(K));
  std::vector<RelaxedSolution> warm(static_cast<std::size_t>(K));
  std::optional<double> empty_l1;
  auto empty_class_l1 = [&]() {
    if (!empty_l1) {
      const RegularizedSystem sys(ctx, IndicatorVector(std::vector<double>(n, 0.0)), eps);
      empty_l1 = solve_regularized(sys, cfg.solver, false).u.sum();
    }
    return *empty_l1;
  };

  Eigen::MatrixXd scores(n, K);
  std::vector<double> l1(static_cast<std::size_t>(K));
  std::vector<NodeIndex> counts(static_cast<std::size_t>(K));

  // Solves every nonempty class for `labels`; fills l1, and scores when
  // with_scores is set.
  auto evaluate = [&](const std::vector<int>& labels, bool with_scores) {
    std::fill(counts.begin(), counts.end(), 0);
    for (int l : labels) ++counts[l];
    for_each_index(K, cfg.execution, [&](std::int64_t j) {
      if (counts[j] == 0) {
        if (with_scores) scores.col(j).setConstant(kNegInf);
        return;
      }
      if (counts[j] == n) {
        // phi_j = 1 makes the system singular; |u_j|_1 is unbounded.
        l1[j] = std::numeric_limits<double>::infinity();
        if (with_scores) scores.col(j).setZero();
        return;
      }
      std::vector<double> phi(static_cast<std::size_t>(n), 0.0);
      for (NodeIndex i = 0; i < n; ++i) phi[i] = labels[i] == j ? 1.0 : 0.0;
      const RegularizedSystem sys(ctx, IndicatorVector(std::move(phi)), eps);
      if (!solvers[j]) solvers[j] = std::make_unique<ShiftedLaplacianSolver>(ctx, cfg.solver);
      const RelaxedSolution* guess = warm[j].u.size() > 0 ? &warm[j] : nullptr;
      RelaxedSolution sol = solve_regularized(*solvers[j], sys, with_scores, guess);
      l1[j] = sol.u.sum();
      if (with_scores) {
        const double scale = 1.0 + eps * l1[j];
        scores.col(j) = sol.u.cwiseProduct(sol.v) / (scale * scale);
        warm[j] = std::move(sol);
      }
    });
    double energy = 0.0;
    for (int j = 0; j < K; ++j) {
      if (counts[j] == 0) l1[j] = empty_class_l1();
      energy += partition_energy_term(l1[j], eps);
    }
    return energy;
  };

  PartitionRun run;
  run.labels = std::move(initial);
  std::vector<int> before;
  std::vector<int> next(static_cast<std::size_t>(n));
  for (int it = 0; it < cfg.max_iters; ++it) {
    run.energy_trace.push_back(evaluate(run.labels, true));
    ++run.iterations;
    if (lambda > 0.0) {
      for (NodeIndex i = 0; i < n; ++i) {
        const auto& l = cfg.supervision->labels[i];
        if (!l) continue;
        for (int j = 0; j < K; ++j) scores(i, j) += j == *l ? 2.0 * lambda : -2.0 * lambda;
      }
    }

    bool fixed = true;
    for (NodeIndex i = 0; i < n && fixed; ++i) {
      fixed = scores(i, run.labels[i]) >= scores.row(i).maxCoeff();
    }
    if (fixed) {
      run.converged = true;
      break;
    }

    for (NodeIndex i = 0; i < n; ++i) {
      int best = 0;
      int ties = 1;
      for (int j = 1; j < K; ++j) {
        if (scores(i, j) > scores(i, best)) {
          best = j;
          ties = 1;
        } else if (scores(i, j) == scores(i, best)) {
          ++ties;
          if (std::uniform_int_distribution<int>(1, ties)(rng) == 1) best = j;
        }
      }
      next[i] = best;
    }
    if (cfg.reseed_empty) {
      std::fill(counts.begin(), counts.end(), 0);
      for (int l : next) ++counts[l];
      for (int j = 0; j < K; ++j) {
        if (counts[j] > 0) continue;
        NodeIndex weakest = -1;
        for (NodeIndex i = 0; i < n; ++i) {
          if (counts[next[i]] < 2) continue;
          if (weakest < 0 || scores(i, next[i]) < scores(weakest, next[weakest])) weakest = i;
        }
        if (weakest < 0) break;
        --counts[next[weakest]];
        next[weakest] = j;
        counts[j] = 1;
      }
    }
    if (next == before) {
      run.two_cycle = true;
      break;
    }
    before = run.labels;
    run.labels = next;
  }
  if (!run.converged && !run.two_cycle) {
    run.energy_trace.push_back(evaluate(run.labels, false));
  }
  run.class_energies = l1;
  return run;
}

Partition partition(const PoissonContext& ctx, const PartitionerConfig& cfg,
                    const std::optional<std::vector<std::optional<int>>>& metadata) {
  validate(ctx, cfg);
  ctx.warn_if_not_strongly_connected("partition");
  const NodeIndex n = ctx.size();

  std::optional<Eigen::MatrixXd> embedding;
  if (cfg.init == PartitionInit::kSpectral) {
    try {
      embedding = spectral_embedding(ctx, cfg.K);
    } catch (const SolverError& e) {
      warn(std::string("partition: spectral initialization failed (") + e.what() +
           "); using random initialization");
    }
  }

  std::vector<PartitionRun> runs(static_cast<std::size_t>(cfg.restarts));
  for_each_index(cfg.restarts, cfg.execution, [&](std::int64_t r) {
    PartitionerConfig local = cfg;
    local.execution = Execution::kSerial;
    Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(r));
    std::vector<int> init = embedding ? kmeans(*embedding, cfg.K, rng) : random_labels(n, cfg.K, rng);
    if (supervised(cfg)) {
      for (NodeIndex i = 0; i < n; ++i) {
        if (const auto& l = cfg.supervision->labels[i]) init[i] = *l;
      }
    }
    runs[r] = partition_from(ctx, local, std::move(init), rng);
  });

  Partition out;
  out.epsilon = partitioner_epsilon(ctx, cfg);
  std::size_t best = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    out.restart_energies.push_back(runs[r].energy_trace.back());
    out.restart_traces.push_back(runs[r].energy_trace);
    if (runs[r].energy_trace.back() < runs[best].energy_trace.back()) best = r;
  }
  PartitionRun& winner = runs[best];
  out.labels = std::move(winner.labels);
  out.class_energies = std::move(winner.class_energies);
  out.energy_trace = std::move(winner.energy_trace);
  out.energy = out.energy_trace.back();
  out.iterations = winner.iterations;
  out.converged = winner.converged;
  out.best_restart = static_cast<int>(best);
  std::vector<bool> used(static_cast<std::size_t>(cfg.K), false);
  for (int l : out.labels) used[l] = true;
  out.nonempty_classes = static_cast<int>(std::count(used.begin(), used.end(), true));
  out.degenerate = out.nonempty_classes <= 1 && cfg.K > 1;
  if (metadata) out.purity = purity(out.labels, *metadata);
  return out;
}

Partition partition(const Graph& g, const PartitionerConfig& cfg) {
  const PoissonContext ctx(g);
  return partition(ctx, cfg);
}

Partition partition_ssl(const PoissonContext& ctx, const PartitionerConfig& cfg,
                        const std::optional<std::vector<std::optional<int>>>& metadata) {
  if (!cfg.supervision) throw ValidationError("partition_ssl needs supervision labels");
  if (!(cfg.supervision->lambda >= 0.0)) {
    throw ValidationError("partition_ssl needs a nonnegative supervision weight");
  }
  return partition(ctx, cfg, metadata);
}

namespace {

Eigen::SparseMatrix<double> symmetrized_laplacian(const PoissonContext& ctx) {
  Eigen::SparseMatrix<double> sym =
      0.5 * (ctx.laplacian() + Eigen::SparseMatrix<double>(ctx.laplacian_transpose()));
  sym.makeCompressed();
  return sym;
}

// Orthonormal basis of the columns of x.
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& x) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  return qr.householderQ() * Eigen::MatrixXd::Identity(x.rows(), x.cols());
}

}  // namespace

Eigen::MatrixXd spectral_embedding(const PoissonContext& ctx, int K) {
  const NodeIndex n = ctx.size();
  if (K < 1 || K > n) throw ValidationError("embedding dimension out of range");
  const Eigen::SparseMatrix<double> sym = symmetrized_laplacian(ctx);

  if (n <= kDenseEigenMaxNodes) {
    const Eigen::MatrixXd dense(sym);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
    if (es.info() != Eigen::Success) throw SolverError("dense eigensolver failed");
    return es.eigenvectors().leftCols(K);
  }

  // Shift below the spectrum (Gershgorin) so the smallest eigenvalues
  // dominate under the inverse.
  double lower = std::numeric_limits<double>::infinity();
  double scale = 0.0;
  for (int c = 0; c < sym.outerSize(); ++c) {
    double diag = 0.0, off = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(sym, c); it; ++it) {
      if (it.row() == c) {
        diag = it.value();
      } else {
        off += std::abs(it.value());
      }
    }
    lower = std::min(lower, diag - off);
    scale = std::max(scale, diag + off);
  }
  const double shift = std::min(lower, 0.0) - 1e-6 * scale;
  Eigen::SparseMatrix<double> shifted = sym;
  for (NodeIndex i = 0; i < n; ++i) shifted.coeffRef(i, i) -= shift;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) throw SolverError("shift-invert factorization failed");

  const int block = static_cast<int>(std::min<NodeIndex>(n, 2 * K + 5));
  Rng rng = make_rng(0x5eed, static_cast<std::uint64_t>(K));
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, block);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  x = orthonormalize(x);

  for (int it = 0; it < 2000; ++it) {
    Eigen::MatrixXd y(n, block);
    for (int c = 0; c < block; ++c) y.col(c) = ldlt.solve(x.col(c));
    x = orthonormalize(y);
    if (it % 5 != 4) continue;
    // Rayleigh-Ritz on the current subspace.
    const Eigen::MatrixXd h = x.transpose() * (sym * x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(0.5 * (h + h.transpose()));
    const Eigen::MatrixXd ritz = x * small.eigenvectors();
    const Eigen::MatrixXd residual = sym * ritz.leftCols(K) -
                                     ritz.leftCols(K) * small.eigenvalues().head(K).asDiagonal();
    if (residual.colwise().norm().maxCoeff() <= 1e-8 * std::max(scale, 1.0)) {
      return ritz.leftCols(K);
    }
    x = ritz;
  }
  throw SolverError("subspace iteration did not converge");
}

std::vector<int> kmeans(const Eigen::MatrixXd& points, int K, Rng& rng, int max_iters) {
  const Eigen::Index n = points.rows();
  if (K < 1 || K > n) throw ValidationError("k-means: K out of range");
  Eigen::MatrixXd centers(K, points.cols());
  std::vector<double> dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());

  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = points.row(pick(rng));
  for (int c = 1; c < K; ++c) {
    for (Eigen::Index i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], (points.row(i) - centers.row(c - 1)).squaredNorm());
    }
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    Eigen::Index chosen;
    if (total > 0.0) {
      std::discrete_distribution<Eigen::Index> d2(dist.begin(), dist.end());
      chosen = d2(rng);
    } else {
      chosen = pick(rng);
    }
    centers.row(c) = points.row(chosen);
  }

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best;
      (centers.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (labels[i] != static_cast<int>(best)) {
        labels[i] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, points.cols());
    std::vector<Eigen::Index> sizes(static_cast<std::size_t>(K), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[i]) += points.row(i);
      ++sizes[labels[i]];
    }
    for (int c = 0; c < K; ++c) {
      if (sizes[c] > 0) {
        centers.row(c) = sums.row(c) / static_cast<double>(sizes[c]);
        continue;
      }
      // Empty cluster: move its center to the point farthest from its own.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = (points.row(i) - centers.row(labels[i])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centers.row(c) = points.row(far);
    }
  }
  return labels;
}

std::vector<int> spectral_kmeans_init(const PoissonContext& ctx, int K, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0);
  if (K == 1) return std::vector<int>(static_cast<std::size_t>(ctx.size()), 0);
  try {
    return kmeans(spectral_embedding(ctx, K), K, rng);
  } catch (const SolverError& e) {
    warn(std::string("spectral initialization failed (") + e.what() +
         "); using random initialization");
    return random_labels(ctx.size(), K, rng);
  }
}

SweepResult epsilon_sweep(const PoissonContext& ctx, const PartitionerConfig& cfg,
                          const std::vector<double>& ell_values,
                          const std::optional<std::vector<std::optional<int>>>& metadata) {
  SweepResult table;
  table.columns = {"ell",      "nu",         "epsilon",   "seed",    "purity",
                   "energy",   "nonempty",   "iterations", "converged", "status",
                   "wall_ms"};
  table.rows.resize(ell_values.size());
  for_each_index(static_cast<std::int64_t>(ell_values.size()), cfg.execution,
                 [&](std::int64_t i) {
                   PartitionerConfig local = cfg;
                   local.nu = std::exp(0.2 * ell_values[i]);
                   local.epsilon.reset();
                   local.execution = Execution::kSerial;
                   const auto start = std::chrono::steady_clock::now();
                   const double nan = std::numeric_limits<double>::quiet_NaN();
                   Partition p;
                   std::string status = "ok";
                   try {
                     p = partition(ctx, local, metadata);
                   } catch (const SolverError& e) {
                     warn("epsilon sweep at ell=" + format_number(ell_values[i]) + ": " + e.what());
                     p.epsilon = partitioner_epsilon(ctx, local);
                     p.energy = nan;
                     status = "solver_error";
                   }
                   const double ms = std::chrono::duration<double, std::milli>(
                                         std::chrono::steady_clock::now() - start)
                                         .count();
                   table.rows[i] = {ell_values[i],
                                    local.nu,
                                    p.epsilon,
                                    static_cast<std::int64_t>(cfg.seed),
                                    p.purity.value_or(nan),
                                    p.energy,
                                    static_cast<std::int64_t>(p.nonempty_classes),
                                    static_cast<std::int64_t>(p.iterations),
                                    static_cast<std::int64_t>(p.converged ? 1 : 0),
                                    status,
                                    ms};
                 });
  return table;
}

}  // namespace trapclust
