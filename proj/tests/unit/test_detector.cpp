#include <doctest.h>

#include <algorithm>
#include <set>

#include "support/fixtures.hpp"
#include "trapclust/detector.hpp"
#include "trapclust/errors.hpp"
#include "trapclust/eval.hpp"

using namespace trapclust;

TEST_CASE("two triangles: k = 3 finds a triangle and matches brute force") {
  const Graph g = testing::two_triangles();
  DetectorConfig cfg;
  cfg.k = 3;
  cfg.restarts = 10;
  cfg.epsilon = 0.05;
  const DetectorResult r = detect(g, cfg);
  CHECK((r.set == NodeSet{0, 1, 2} || r.set == NodeSet{3, 4, 5}));
  const BestSubgraph best = brute_force_best_subgraph(g, 3);
  CHECK(r.exact_met == doctest::Approx(best.tau).epsilon(1e-12));
  CHECK(r.converged);
  CHECK(r.restart_energies.size() == 10);
  CHECK(r.energy == *std::max_element(r.restart_energies.begin(), r.restart_energies.end()));
}

TEST_CASE("k = 1 gives tau = 1/n") {
  const Graph g = testing::random_strong_graph(12, 0.3, 3);
  DetectorConfig cfg;
  cfg.k = 1;
  CHECK(detect(g, cfg).exact_met == doctest::Approx(1.0 / 12.0));
}

TEST_CASE("k must be in [1, n)") {
  const Graph g = testing::path_graph(4);
  DetectorConfig cfg;
  cfg.k = 0;
  CHECK_THROWS_AS(detect(g, cfg), ValidationError);
  cfg.k = 4;
  CHECK_THROWS_AS(detect(g, cfg), ValidationError);
}

TEST_CASE("energy trace increases and the result is a fixed point") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Graph g = testing::random_strong_graph(40, 0.1, seed);
    const PoissonContext ctx(g);
    DetectorConfig cfg;
    cfg.k = 8;
    cfg.seed = seed;
    Rng rng = make_rng(seed, 77);
    const DetectorRun run = detect_from(ctx, cfg, random_subset(40, 8, rng), rng);
    REQUIRE(run.converged);
    for (std::size_t t = 1; t < run.energy_trace.size(); ++t) {
      CHECK(run.energy_trace[t] > run.energy_trace[t - 1]);
    }
    CHECK(is_rearrangement_fixed_point(ctx, run.set, cfg));
  }
}

TEST_CASE("serial and parallel restarts give identical results") {
  const Graph g = testing::random_strong_graph(60, 0.08, 5);
  const PoissonContext ctx(g);
  DetectorConfig cfg;
  cfg.k = 10;
  cfg.restarts = 6;
  cfg.seed = 42;
  cfg.execution = Execution::kSerial;
  const DetectorResult a = detect(ctx, cfg);
  cfg.execution = Execution::kParallel;
  const DetectorResult b = detect(ctx, cfg);
  CHECK(a.set == b.set);
  CHECK(a.restart_energies == b.restart_energies);
  CHECK(a.best_restart == b.best_restart);
}

TEST_CASE("top-k tie-breaking is uniform and seeded") {
  const Vector scores = Vector::Constant(6, 1.0);
  std::set<NodeSet> seen;
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng = make_rng(s);
    const NodeSet pick = select_top_k(scores, 2, rng);
    CHECK(pick.size() == 2);
    seen.insert(pick);
    Rng again = make_rng(s);
    CHECK(select_top_k(scores, 2, again) == pick);
  }
  CHECK(seen.size() == 15);

  Vector distinct(5);
  distinct << 0.1, 0.5, 0.3, 0.9, 0.2;
  Rng rng = make_rng(0);
  CHECK(select_top_k(distinct, 2, rng) == NodeSet{1, 3});
}

TEST_CASE("supervision") {
  const Graph g = testing::two_triangles(0.3);
  const PoissonContext ctx(g);
  DetectorConfig cfg;
  cfg.k = 3;
  cfg.restarts = 4;
  cfg.seed = 9;

  SUBCASE("lambda = 0 matches the unsupervised run") {
    const DetectorResult plain = detect(ctx, cfg);
    cfg.supervision = DetectorSupervision{{0}, {5}, 0.0};
    const DetectorResult ssl = detect(ctx, cfg);
    CHECK(plain.set == ssl.set);
    CHECK(plain.restart_energies == ssl.restart_energies);
  }
  SUBCASE("large lambda forces labeled nodes") {
    cfg.supervision = DetectorSupervision{{0, 4}, {1}, 1e6};
    const DetectorResult r = detect(ctx, cfg);
    CHECK(std::binary_search(r.set.begin(), r.set.end(), 0));
    CHECK(std::binary_search(r.set.begin(), r.set.end(), 4));
    CHECK_FALSE(std::binary_search(r.set.begin(), r.set.end(), 1));
  }
  SUBCASE("score form") {
    Vector u(3), v(3);
    u << 1.0, 2.0, 3.0;
    v << 1.0, 1.0, 1.0;
    const Vector plain = detect_ssl_score(u, v, 0.5, std::nullopt);
    CHECK(plain[2] == doctest::Approx(3.0));
    const Vector s = detect_ssl_score(u, v, 0.5, DetectorSupervision{{0}, {2}, 1.0});
    CHECK(s[0] == doctest::Approx(2.0 + 2.0));
    CHECK(s[1] == doctest::Approx(4.0));
    CHECK(s[2] == doctest::Approx(6.0 - 2.0));
  }
}

TEST_CASE("k-sweep table and break locator") {
  const Graph g = testing::two_triangles();
  const PoissonContext ctx(g);
  DetectorConfig cfg;
  cfg.restarts = 3;
  const SweepResult t = k_sweep(ctx, {1, 2, 3, 4, 5}, cfg);
  REQUIRE(t.rows.size() == 5);
  CHECK(t.number(2, "k") == 3.0);
  CHECK(t.number(0, "tau") == doctest::Approx(1.0 / 6.0));

  const std::vector<NodeIndex> ks{10, 15, 20, 25, 30, 35, 40};
  const std::vector<double> tau{0, 1, 2, 5, 8, 8.5, 9};
  const auto br = k_sweep_breaks(ks, tau);
  REQUIRE(br.size() == 2);
  CHECK(std::set<NodeIndex>(br.begin(), br.end()) == std::set<NodeIndex>{20, 30});
}
