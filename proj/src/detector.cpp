#include "trapclust/detector.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "trapclust/errors.hpp"
#include "trapclust/log.hpp"

namespace trapclust {

double detector_epsilon(const PoissonContext& ctx, const DetectorConfig& cfg) {
  if (cfg.epsilon) {
    if (!(*cfg.epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    return *cfg.epsilon;
  }
  if (!(cfg.epsilon_scale >= 1.0)) throw ValidationError("epsilon scale C must be >= 1");
  return cfg.epsilon_scale / ctx.frobenius();
}

Vector detect_ssl_score(const Vector& u, const Vector& v, double epsilon,
                        const std::optional<DetectorSupervision>& supervision) {
  Vector scores = u.cwiseProduct(v);
  if (!supervision || supervision->lambda == 0.0) return scores;
  scores /= epsilon;
  const double bump = 2.0 * supervision->lambda;
  for (NodeIndex i : supervision->inside) scores[i] += bump;
  for (NodeIndex i : supervision->outside) scores[i] -= bump;
  return scores;
}

NodeSet random_subset(NodeIndex n, NodeIndex k, Rng& rng) {
  if (k < 0 || k > n) throw ValidationError("subset size out of range");
  std::vector<NodeIndex> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (NodeIndex i = 0; i < k; ++i) {
    std::uniform_int_distribution<NodeIndex> pick(i, n - 1);
    std::swap(perm[i], perm[pick(rng)]);
  }
  perm.resize(static_cast<std::size_t>(k));
  std::sort(perm.begin(), perm.end());
  return perm;
}

NodeSet select_top_k(const Vector& scores, NodeIndex k, Rng& rng) {
  const auto n = static_cast<NodeIndex>(scores.size());
  if (k < 0 || k > n) throw ValidationError("k out of range");
  std::vector<std::uint64_t> key(static_cast<std::size_t>(n));
  for (auto& x : key) x = rng();
  std::vector<NodeIndex> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto before = [&](NodeIndex a, NodeIndex b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return key[a] < key[b];
  };
  std::nth_element(order.begin(), order.begin() + k, order.end(), before);
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

namespace {

void validate(const PoissonContext& ctx, const DetectorConfig& cfg) {
  const NodeIndex n = ctx.size();
  if (cfg.k < 1 || cfg.k >= n) {
    throw ValidationError("detector requires 1 <= k < n (k=" + std::to_string(cfg.k) +
                          ", n=" + std::to_string(n) + ")");
  }
  if (cfg.restarts < 1) throw ValidationError("restarts must be >= 1");
  if (cfg.max_iters < 1) throw ValidationError("max_iters must be >= 1");
  if (cfg.supervision) {
    const auto& sup = *cfg.supervision;
    if (sup.lambda < 0.0) throw ValidationError("supervision weight must be >= 0");
    const auto inside = membership(n, sup.inside);
    for (NodeIndex i : sup.outside) {
      if (i < 0 || i >= n) throw ValidationError("supervised node out of range");
      if (inside[i]) {
        throw ValidationError("node '" + ctx.graph().name(i) +
                              "' labeled both inside and outside");
      }
    }
  }
}

// S maximizes sum_{l in S} score_l over |S| = k (ties allowed).
bool is_linear_maximizer(const Vector& scores, const std::vector<bool>& in_set) {
  double min_in = std::numeric_limits<double>::infinity();
  double max_out = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (in_set[i]) {
      min_in = std::min(min_in, scores[i]);
    } else {
      max_out = std::max(max_out, scores[i]);
    }
  }
  return min_in >= max_out;
}

}  // namespace

NodeSet rearrangement_step(const PoissonContext& ctx, const NodeSet& set,
                           const DetectorConfig& cfg, Rng& rng) {
  validate(ctx, cfg);
  const double eps = detector_epsilon(ctx, cfg);
  const RegularizedSystem sys(ctx, IndicatorVector::from_set(ctx.size(), set), eps);
  const RelaxedSolution sol = solve_regularized(sys, cfg.solver);
  return select_top_k(detect_ssl_score(sol.u, sol.v, eps, cfg.supervision), cfg.k, rng);
}

bool is_rearrangement_fixed_point(const PoissonContext& ctx, const NodeSet& set,
                                  const DetectorConfig& cfg) {
  const double eps = detector_epsilon(ctx, cfg);
  const RegularizedSystem sys(ctx, IndicatorVector::from_set(ctx.size(), set), eps);
  const RelaxedSolution sol = solve_regularized(sys, cfg.solver);
  const Vector scores = detect_ssl_score(sol.u, sol.v, eps, cfg.supervision);
  return is_linear_maximizer(scores, membership(ctx.size(), set));
}

DetectorRun detect_from(const PoissonContext& ctx, const DetectorConfig& cfg,
                        NodeSet initial, Rng& rng) {
  validate(ctx, cfg);
  const NodeIndex n = ctx.size();
  initial = normalize_set(n, std::move(initial));
  if (static_cast<NodeIndex>(initial.size()) != cfg.k) {
    throw ValidationError("initial set must have exactly k nodes");
  }
  const double eps = detector_epsilon(ctx, cfg);
  ShiftedLaplacianSolver solver(ctx, cfg.solver);

  DetectorRun run;
  run.set = std::move(initial);
  RelaxedSolution previous;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const RegularizedSystem sys(ctx, IndicatorVector::from_set(n, run.set), eps);
    RelaxedSolution sol = solve_regularized(solver, sys, true, it > 0 ? &previous : nullptr);
    run.energy_trace.push_back(sol.u.sum() / static_cast<double>(n));
    ++run.iterations;
    const Vector scores = detect_ssl_score(sol.u, sol.v, eps, cfg.supervision);
    if (is_linear_maximizer(scores, membership(n, run.set))) {
      run.converged = true;
      break;
    }
    run.set = select_top_k(scores, cfg.k, rng);
    previous = std::move(sol);
  }
  if (!run.converged) {
    const RegularizedSystem sys(ctx, IndicatorVector::from_set(n, run.set), eps);
    const RelaxedSolution sol = solve_regularized(solver, sys, false, &previous);
    run.energy_trace.push_back(sol.u.sum() / static_cast<double>(n));
  }
  return run;
}

DetectorResult detect(const PoissonContext& ctx, const DetectorConfig& cfg) {
  validate(ctx, cfg);
  ctx.warn_if_not_strongly_connected("detect");
  if (cfg.supervision && cfg.supervision->lambda > 0.0 &&
      static_cast<NodeIndex>(cfg.supervision->inside.size()) > cfg.k) {
    warn("detect: " + std::to_string(cfg.supervision->inside.size()) +
         " nodes labeled inside exceed k=" + std::to_string(cfg.k) +
         "; not all labels can be honored");
  }

  std::vector<DetectorRun> runs(static_cast<std::size_t>(cfg.restarts));
  for_each_index(cfg.restarts, cfg.execution, [&](std::int64_t r) {
    Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(r));
    NodeSet init = random_subset(ctx.size(), cfg.k, rng);
    runs[r] = detect_from(ctx, cfg, std::move(init), rng);
  });

  DetectorResult result;
  result.epsilon = detector_epsilon(ctx, cfg);
  std::size_t best = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    result.restart_energies.push_back(runs[r].energy_trace.back());
    if (runs[r].energy_trace.back() > runs[best].energy_trace.back()) best = r;
  }
  DetectorRun& winner = runs[best];
  result.set = std::move(winner.set);
  result.energy_trace = std::move(winner.energy_trace);
  result.energy = result.energy_trace.back();
  result.iterations = winner.iterations;
  result.converged = winner.converged;
  result.best_restart = static_cast<int>(best);
  result.exact_met = solve_exact_met(ctx, result.set, cfg.solver).tau;
  return result;
}

DetectorResult detect(const Graph& g, const DetectorConfig& cfg) {
  const PoissonContext ctx(g);
  return detect(ctx, cfg);
}

SweepResult k_sweep(const PoissonContext& ctx, const std::vector<NodeIndex>& k_values,
                    const DetectorConfig& cfg) {
  SweepResult table;
  table.columns = {"k", "seed", "tau", "energy", "iterations", "converged", "wall_ms"};
  table.rows.resize(k_values.size());
  for_each_index(static_cast<std::int64_t>(k_values.size()), cfg.execution,
                 [&](std::int64_t i) {
                   DetectorConfig local = cfg;
                   local.k = k_values[i];
                   local.execution = Execution::kSerial;
                   const auto start = std::chrono::steady_clock::now();
                   const DetectorResult res = detect(ctx, local);
                   const double ms = std::chrono::duration<double, std::milli>(
                                         std::chrono::steady_clock::now() - start)
                                         .count();
                   table.rows[i] = {static_cast<std::int64_t>(local.k),
                                    static_cast<std::int64_t>(cfg.seed),
                                    res.exact_met,
                                    res.energy,
                                    static_cast<std::int64_t>(res.iterations),
                                    static_cast<std::int64_t>(res.converged ? 1 : 0),
                                    ms};
                 });
  return table;
}

std::vector<NodeIndex> k_sweep_breaks(const std::vector<NodeIndex>& k_values,
                                      const std::vector<double>& tau, int count) {
  if (k_values.size() != tau.size()) throw ValidationError("k/tau length mismatch");
  std::vector<std::pair<double, NodeIndex>> second;
  for (std::size_t i = 1; i + 1 < tau.size(); ++i) {
    second.emplace_back(std::abs(tau[i + 1] - 2.0 * tau[i] + tau[i - 1]), k_values[i]);
  }
  std::stable_sort(second.begin(), second.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<NodeIndex> out;
  for (std::size_t i = 0; i < second.size() && static_cast<int>(out.size()) < count; ++i) {
    out.push_back(second[i].second);
  }
  return out;
}

}  // namespace trapclust
