#include <doctest.h>

#include <algorithm>
#include <set>

#include "support/fixtures.hpp"
#include "trapclust/energy.hpp"
#include "trapclust/errors.hpp"
#include "trapclust/eval.hpp"
#include "trapclust/partitioner.hpp"

using namespace trapclust;

namespace {

// Labels up to a permutation of class ids.
std::vector<int> canonical(const std::vector<int>& labels) {
  std::vector<int> map(labels.size() + 1, -1);
  std::vector<int> out;
  int next = 0;
  for (int l : labels) {
    if (map[static_cast<std::size_t>(l)] < 0) map[static_cast<std::size_t>(l)] = next++;
    out.push_back(map[static_cast<std::size_t>(l)]);
  }
  return out;
}

bool descending(const std::vector<double>& trace) {
  for (std::size_t t = 1; t < trace.size(); ++t) {
    if (trace[t] > trace[t - 1]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("two triangles split into the triangles and match brute force") {
  const Graph g = testing::two_triangles();
  const PoissonContext ctx(g);
  PartitionerConfig cfg;
  cfg.K = 2;
  cfg.epsilon = 0.05;
  cfg.restarts = 8;
  const Partition p = partition(ctx, cfg);
  CHECK(canonical(p.labels) == std::vector<int>{0, 0, 0, 1, 1, 1});
  const BestPartition best = brute_force_best_partition(g, 2, 0.05);
  CHECK(canonical(best.labels) == std::vector<int>{0, 0, 0, 1, 1, 1});
  CHECK(p.energy == doctest::Approx(best.energy).epsilon(1e-12));
  CHECK(p.energy ==
        doctest::Approx(partition_energy(ctx, p.labels, 2, 0.05, 0.05)).epsilon(1e-12));
  CHECK(p.nonempty_classes == 2);
  CHECK_FALSE(p.degenerate);
  CHECK(p.restart_traces.size() == 8);
  for (const auto& trace : p.restart_traces) CHECK(descending(trace));
}

TEST_CASE("two-node graph with K = 2 puts one node in each class") {
  const Graph g = testing::path_graph(2);
  PartitionerConfig cfg;
  cfg.K = 2;
  cfg.epsilon = 0.1;
  const Partition p = partition(g, cfg);
  CHECK(p.labels[0] != p.labels[1]);
}

TEST_CASE("K must not exceed n") {
  PartitionerConfig cfg;
  cfg.K = 4;
  CHECK_THROWS_AS(partition(testing::path_graph(3), cfg), ValidationError);
}

TEST_CASE("serial and parallel restarts agree") {
  const Graph g = testing::random_strong_graph(40, 0.1, 3, false);
  const PoissonContext ctx(g);
  PartitionerConfig cfg;
  cfg.K = 3;
  cfg.restarts = 4;
  cfg.seed = 5;
  cfg.execution = Execution::kSerial;
  const Partition a = partition(ctx, cfg);
  cfg.execution = Execution::kParallel;
  const Partition b = partition(ctx, cfg);
  CHECK(a.labels == b.labels);
  CHECK(a.restart_energies == b.restart_energies);
}

TEST_CASE("relabeling the initial partition relabels the result") {
  const Graph g = testing::random_strong_graph(30, 0.15, 8, false);
  const PoissonContext ctx(g);
  PartitionerConfig cfg;
  cfg.K = 3;
  cfg.epsilon = 0.05;
  Rng draw = make_rng(1);
  const std::vector<int> init = random_labels(30, 3, draw);
  const std::vector<int> perm{2, 0, 1};
  std::vector<int> permuted;
  for (int l : init) permuted.push_back(perm[static_cast<std::size_t>(l)]);
  Rng r1 = make_rng(2), r2 = make_rng(2);
  const PartitionRun a = partition_from(ctx, cfg, init, r1);
  const PartitionRun b = partition_from(ctx, cfg, permuted, r2);
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    CHECK(b.labels[i] == perm[static_cast<std::size_t>(a.labels[i])]);
  }
  CHECK(a.energy_trace.back() == doctest::Approx(b.energy_trace.back()).epsilon(1e-12));
}

TEST_CASE("supervision") {
  const Graph g = testing::random_strong_graph(24, 0.2, 4, false);
  const PoissonContext ctx(g);
  PartitionerConfig cfg;
  cfg.K = 3;
  cfg.restarts = 3;
  cfg.seed = 17;

  SUBCASE("lambda = 0 equals the unsupervised run") {
    const Partition plain = partition(ctx, cfg);
    PartitionSupervision sup;
    sup.labels.assign(24, std::nullopt);
    sup.labels[0] = 2;
    sup.labels[5] = 1;
    sup.lambda = 0.0;
    cfg.supervision = sup;
    const Partition ssl = partition_ssl(ctx, cfg);
    CHECK(plain.labels == ssl.labels);
    CHECK(plain.restart_energies == ssl.restart_energies);
  }
  SUBCASE("huge lambda with every node labeled reproduces the labels") {
    Rng rng = make_rng(3);
    const std::vector<int> truth = random_labels(24, 3, rng);
    PartitionSupervision sup;
    for (int l : truth) sup.labels.emplace_back(l);
    sup.lambda = 1e6;
    cfg.supervision = sup;
    CHECK(partition_ssl(ctx, cfg).labels == truth);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(partition_ssl(ctx, cfg), ValidationError);
    PartitionSupervision sup;
    sup.labels.assign(24, std::nullopt);
    sup.labels[3] = 7;
    sup.lambda = 1.0;
    cfg.supervision = sup;
    CHECK_THROWS_AS(partition_ssl(ctx, cfg), ValidationError);
    sup.labels[3] = 0;
    sup.lambda = -1.0;
    cfg.supervision = sup;
    CHECK_THROWS_AS(partition_ssl(ctx, cfg), ValidationError);
  }
}

TEST_CASE("spectral embedding recovers the Fiedler split of two triangles") {
  const Graph g = testing::two_triangles();
  const PoissonContext ctx(g);
  const Eigen::MatrixXd emb = spectral_embedding(ctx, 2);
  REQUIRE(emb.rows() == 6);
  REQUIRE(emb.cols() == 2);
  const Eigen::VectorXd f = emb.col(1);
  for (int i : {0, 1, 2}) CHECK(f[i] * f[5] < 0.0);
  for (int i : {3, 4}) CHECK(f[i] * f[5] > 0.0);
  CHECK(canonical(spectral_kmeans_init(ctx, 2, 0)) == std::vector<int>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("k-means separates well-spaced clusters") {
  Eigen::MatrixXd pts(6, 2);
  pts << 0, 0, 0.1, 0, 0, 0.1, 5, 5, 5.1, 5, 5, 5.1;
  Rng rng = make_rng(0);
  CHECK(canonical(kmeans(pts, 2, rng)) == std::vector<int>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("random labels are surjective") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng = make_rng(s);
    const auto labels = random_labels(7, 5, rng);
    CHECK(std::set<int>(labels.begin(), labels.end()).size() == 5);
  }
}

TEST_CASE("epsilon sweep is deterministic and uses nu = exp(0.2 ell)") {
  const Graph g = testing::two_triangles();
  const PoissonContext ctx(g);
  PartitionerConfig cfg;
  cfg.K = 2;
  cfg.restarts = 2;
  const std::vector<std::optional<int>> meta{0, 0, 0, 1, 1, 1};
  const SweepResult a = epsilon_sweep(ctx, cfg, {-5.0, 0.0, 5.0}, meta);
  const SweepResult b = epsilon_sweep(ctx, cfg, {-5.0, 0.0, 5.0}, meta);
  REQUIRE(a.rows.size() == 3);
  CHECK(a.number(1, "nu") == doctest::Approx(1.0));
  CHECK(a.number(2, "nu") == doctest::Approx(std::exp(1.0)));
  CHECK(a.number(2, "epsilon") ==
        doctest::Approx(50.0 * std::exp(1.0) / laplacian_frobenius(g)));
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(a.number(r, "energy") == b.number(r, "energy"));
    CHECK(a.number(r, "purity") == b.number(r, "purity"));
  }
}
