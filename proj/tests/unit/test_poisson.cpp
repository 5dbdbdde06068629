#include <doctest.h>

#include <string>
#include <vector>

#include "support/fixtures.hpp"
#include "trapclust/errors.hpp"
#include "trapclust/eval.hpp"
#include "trapclust/log.hpp"
#include "trapclust/poisson.hpp"

using namespace trapclust;

namespace {

// Captures warnings for the lifetime of the object.
struct WarningCapture {
  std::vector<std::string> messages;
  WarningSink previous;
  WarningCapture() {
    previous = set_warning_sink([this](const std::string& m) { messages.push_back(m); });
  }
  ~WarningCapture() { set_warning_sink(previous); }
};

}  // namespace

TEST_CASE("exact exit times on hand-solvable graphs") {
  SUBCASE("path 0-1-2, S = {0,1}") {
    const auto r = solve_exact_met(testing::path_graph(3), NodeSet{0, 1});
    CHECK(r.v[0] == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(r.v[1] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(r.v[2] == 0.0);
    CHECK(std::abs(r.tau - 7.0 / 3.0) <= 1e-12);
  }
  SUBCASE("two-node pair, S = {0}") {
    CHECK(solve_exact_met(testing::path_graph(2), NodeSet{0}).tau == doctest::Approx(0.5));
  }
  SUBCASE("directed 3-cycle, S = {0,1}") {
    const auto r = solve_exact_met(testing::directed_cycle(3), NodeSet{0, 1});
    CHECK(r.v[0] == doctest::Approx(2.0));
    CHECK(r.v[1] == doctest::Approx(1.0));
    CHECK(r.tau == doctest::Approx(1.0));
  }
  SUBCASE("singletons exit in one step") {
    const Graph g = testing::random_strong_graph(9, 0.4, 1);
    for (NodeIndex i = 0; i < g.size(); ++i) {
      CHECK(solve_exact_met(g, NodeSet{i}).tau == doctest::Approx(1.0 / 9.0));
    }
  }
}

TEST_CASE("exact exit times agree with the dense oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const NodeIndex n = 5 + static_cast<NodeIndex>(seed % 20);
    const Graph g = testing::random_strong_graph(n, 0.25, seed, seed % 2 == 0);
    Rng rng = make_rng(seed, 9);
    const NodeSet s = testing::random_set(n, 1 + static_cast<NodeIndex>(rng() % (n - 1)), rng);
    const double sparse = solve_exact_met(g, s).tau;
    const double dense = dense_mean_exit_time(g, s);
    CHECK(sparse == doctest::Approx(dense).epsilon(1e-11));
    SolverOptions iterative;
    iterative.kind = SolverKind::kIterative;
    CHECK(solve_exact_met(g, s, iterative).tau == doctest::Approx(dense).epsilon(1e-8));
  }
}

TEST_CASE("exact exit times validate the set") {
  const Graph g = testing::path_graph(4);
  CHECK_THROWS_AS(solve_exact_met(g, NodeSet{}), ValidationError);
  CHECK_THROWS_AS(solve_exact_met(g, NodeSet{0, 1, 2, 3}), ValidationError);
  CHECK_THROWS_AS(solve_exact_met(g, NodeSet{7}), ValidationError);
}

TEST_CASE("a closed class inside S is reported by name") {
  // 0 <-> 1 -> 2 <-> 3
  std::vector<Edge> e{{0, 1, 1}, {1, 0, 1}, {1, 2, 1}, {2, 3, 1}, {3, 2, 1}};
  const Graph g = Graph::from_edges(4, e, {"a", "b", "c", "d"});
  WarningCapture capture;
  try {
    solve_exact_met(g, NodeSet{1, 2, 3});
    FAIL("expected a solver error");
  } catch (const SolverError& err) {
    const std::string msg = err.what();
    CHECK(msg.find("c [scc") != std::string::npos);
    CHECK(msg.find("d [scc") != std::string::npos);
    CHECK(err.code() == ExitCode::kSolver);
  }
  REQUIRE(capture.messages.size() == 1);
  CHECK(capture.messages[0].find("not strongly connected") != std::string::npos);
}

TEST_CASE("non-strongly-connected graphs warn once per context and still solve") {
  std::vector<Edge> e{{0, 1, 1}, {1, 0, 1}, {1, 2, 1}, {2, 3, 1}, {3, 2, 1}};
  const Graph g = Graph::from_edges(4, e);
  const PoissonContext ctx(g);
  WarningCapture capture;
  CHECK(solve_exact_met(ctx, NodeSet{0, 1}).tau > 0.0);
  CHECK(solve_exact_met(ctx, NodeSet{0}).tau > 0.0);
  CHECK(capture.messages.size() == 1);
}

TEST_CASE("regularized system") {
  const Graph g = testing::random_strong_graph(15, 0.3, 4);
  const PoissonContext ctx(g);

  SUBCASE("phi == 1 is singular") {
    CHECK_THROWS_AS(RegularizedSystem(ctx, IndicatorVector(std::vector<double>(15, 1.0)), 0.1),
                    SolverError);
  }
  SUBCASE("epsilon must be positive") {
    CHECK_THROWS_AS(RegularizedSystem(ctx, IndicatorVector::from_set(15, NodeSet{0}), 0.0),
                    ValidationError);
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(RegularizedSystem(ctx, IndicatorVector::from_set(10, NodeSet{0}), 0.1),
                    ValidationError);
  }
  SUBCASE("forward and transpose residuals") {
    Rng rng = make_rng(3);
    const RegularizedSystem sys(ctx, IndicatorVector(testing::random_phi(15, rng)), 0.2);
    const RelaxedSolution sol = solve_regularized(sys);
    const SparseMatrix m = sys.matrix();
    CHECK((m * sol.u - ctx.degree()).norm() <= 1e-10 * ctx.degree().norm());
    const Vector ones = Vector::Ones(15);
    CHECK((SparseMatrix(m.transpose()) * sol.v - ones).norm() <= 1e-10 * ones.norm());
    CHECK(sol.residual_norms[0] <= 1e-10);
    CHECK(neumann_bound_check(sys, sol));
  }
  SUBCASE("direct and iterative backends agree") {
    Rng rng = make_rng(4);
    const RegularizedSystem sys(ctx, IndicatorVector(testing::random_phi(15, rng)), 0.05);
    SolverOptions direct, iterative;
    direct.kind = SolverKind::kDirect;
    iterative.kind = SolverKind::kIterative;
    const auto a = solve_regularized(sys, direct);
    const auto b = solve_regularized(sys, iterative);
    CHECK((a.u - b.u).norm() <= 1e-8 * a.u.norm());
    CHECK((a.v - b.v).norm() <= 1e-8 * a.v.norm());
  }
  SUBCASE("a reused solver matches fresh solves") {
    ShiftedLaplacianSolver solver(ctx);
    Rng rng = make_rng(5);
    for (int t = 0; t < 4; ++t) {
      const RegularizedSystem sys(ctx, IndicatorVector(testing::random_phi(15, rng)), 0.1);
      const auto reused = solve_regularized(solver, sys);
      const auto fresh = solve_regularized(sys);
      CHECK((reused.u - fresh.u).norm() <= 1e-12 * fresh.u.norm());
      CHECK((reused.v - fresh.v).norm() <= 1e-12 * fresh.v.norm());
    }
  }
  SUBCASE("without the transpose solve the bound check is not satisfied") {
    const RegularizedSystem sys(ctx, IndicatorVector::from_set(15, NodeSet{1, 2}), 0.1);
    CHECK_FALSE(neumann_bound_check(sys, solve_regularized(sys, {}, false)));
  }
}

TEST_CASE("relaxed u approaches the exact exit times as eps -> 0") {
  const Graph g = testing::random_strong_graph(20, 0.2, 8);
  const PoissonContext ctx(g);
  const NodeSet s{2, 3, 5, 7, 11, 13};
  const ExitTimes exact = solve_exact_met(ctx, s);
  double previous = std::numeric_limits<double>::infinity();
  for (double eps : {1e-2, 1e-3, 1e-4, 1e-5}) {
    const RegularizedSystem sys(ctx, IndicatorVector::from_set(20, s), eps);
    const double err = (solve_regularized(sys, {}, false).u - exact.v).lpNorm<Eigen::Infinity>();
    CHECK(err < previous);
    previous = err;
  }
  CHECK(previous < 1e-3);
}

TEST_CASE("solve before refactor is an error") {
  const Graph g = testing::path_graph(3);
  const PoissonContext ctx(g);
  const ShiftedLaplacianSolver solver(ctx);
  CHECK_THROWS_AS(solver.solve(Vector::Ones(3)), SolverError);
}
