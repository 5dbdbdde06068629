#include <doctest.h>

#include <vector>

#include <Eigen/Dense>

#include "support/fixtures.hpp"
#include "trapclust/energy.hpp"
#include "trapclust/errors.hpp"
#include "trapclust/eval.hpp"

using namespace trapclust;

TEST_CASE("relaxed energy agrees with the dense oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const NodeIndex n = 6 + static_cast<NodeIndex>(seed);
    const Graph g = testing::random_strong_graph(n, 0.3, seed);
    Rng rng = make_rng(seed);
    const auto phi = testing::random_phi(n, rng);
    const double eps = 0.02 * static_cast<double>(seed + 1);
    CHECK(relaxed_energy(g, IndicatorVector(phi), eps) ==
          doctest::Approx(dense_relaxed_energy(g, phi, eps)).epsilon(1e-11));
  }
}

TEST_CASE("gradient matches Richardson finite differences") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const NodeIndex n = 5 + static_cast<NodeIndex>(3 * seed);
    const Graph g = testing::random_strong_graph(n, 0.3, 100 + seed, seed % 2 == 1);
    const PoissonContext ctx(g);
    Rng rng = make_rng(seed, 1);
    const auto phi = testing::random_phi(n, rng, 0.2, 0.8);
    const double eps = 0.1;
    const Vector grad = energy_gradient(ctx, IndicatorVector(phi), eps);
    const Vector fd = testing::richardson_gradient(
        [&](const std::vector<double>& x) { return relaxed_energy(ctx, IndicatorVector(x), eps); },
        phi, 1e-3);
    CHECK((grad - fd).norm() <= 1e-6 * grad.norm());
    CHECK((grad.array() > 0.0).all());
  }
}

TEST_CASE("Hessian matches finite differences of the gradient") {
  const NodeIndex n = 9;
  const Graph g = testing::random_strong_graph(n, 0.35, 7);
  const PoissonContext ctx(g);
  Rng rng = make_rng(7);
  const auto phi = testing::random_phi(n, rng, 0.2, 0.8);
  const double eps = 0.2;
  const Eigen::MatrixXd h = energy_hessian(ctx, IndicatorVector(phi), eps);
  const double step = 1e-4;
  for (NodeIndex j = 0; j < n; ++j) {
    auto plus = phi, minus = phi;
    plus[static_cast<std::size_t>(j)] += step;
    minus[static_cast<std::size_t>(j)] -= step;
    const Vector col = (energy_gradient(ctx, IndicatorVector(plus), eps) -
                        energy_gradient(ctx, IndicatorVector(minus), eps)) /
                       (2.0 * step);
    CHECK((h.col(j) - col).norm() <= 1e-6 * h.norm());
  }
  const Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym).eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("on undirected graphs the X-Hessian is M^-1 .* (u v^T + v u^T)") {
  const NodeIndex n = 8;
  const Graph g = testing::random_strong_graph(n, 0.4, 11, false);
  REQUIRE(g.is_symmetric());
  const PoissonContext ctx(g);
  Rng rng = make_rng(11);
  const IndicatorVector phi(testing::random_phi(n, rng));
  const double eps = 0.3;
  const RegularizedSystem sys(ctx, phi, eps);
  const Eigen::MatrixXd minv = Eigen::MatrixXd(sys.matrix()).inverse();
  const Eigen::VectorXd u = minv * ctx.degree();
  const Eigen::VectorXd v = minv * Eigen::VectorXd::Ones(n);
  const Eigen::MatrixXd expect = minv.cwiseProduct(u * v.transpose() + v * u.transpose());
  const Eigen::MatrixXd hx = energy_hessian_x(ctx, phi, eps);
  CHECK((hx - expect).norm() <= 1e-10 * expect.norm());
  CHECK((hx - hx.transpose()).norm() <= 1e-10 * hx.norm());
}

TEST_CASE("Hessian size cap") {
  const Graph g = testing::directed_cycle(kHessianMaxNodes + 1);
  const PoissonContext ctx(g);
  CHECK_THROWS_AS(energy_hessian_x(ctx, IndicatorVector::from_set(g.size(), NodeSet{0}), 1.0),
                  CapExceeded);
}

TEST_CASE("K-way energy") {
  const Graph g = testing::two_triangles();
  const PoissonContext ctx(g);
  const double eps = 0.05;
  const std::vector<int> labels{0, 0, 0, 1, 1, 1};

  const auto a = IndicatorVector::from_set(6, NodeSet{0, 1, 2});
  const auto b = IndicatorVector::from_set(6, NodeSet{3, 4, 5});
  const double ua = 6.0 * dense_relaxed_energy(g, a.values(), eps);
  const double ub = 6.0 * dense_relaxed_energy(g, b.values(), eps);
  const double expect = partition_energy_term(ua, eps) + partition_energy_term(ub, eps);

  const std::vector<IndicatorVector> phis{a, b};
  CHECK(partition_energy(ctx, phis, eps, eps) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(partition_energy(ctx, labels, 2, eps, eps) == doctest::Approx(expect).epsilon(1e-12));

  SUBCASE("the planted split beats a mixed one") {
    const std::vector<int> mixed{0, 1, 0, 1, 0, 1};
    CHECK(partition_energy(ctx, labels, 2, eps, eps) < partition_energy(ctx, mixed, 2, eps, eps));
  }
  SUBCASE("an empty class contributes its phi = 0 term") {
    const double u0 = 6.0 * dense_relaxed_energy(g, std::vector<double>(6, 0.0), eps);
    CHECK(partition_energy(ctx, labels, 3, eps, eps) ==
          doctest::Approx(expect + partition_energy_term(u0, eps)).epsilon(1e-12));
  }
  SUBCASE("phis must sum to one") {
    const std::vector<IndicatorVector> bad{a, a};
    CHECK_THROWS_AS(partition_energy(ctx, bad, eps, eps), ValidationError);
  }
}

TEST_CASE("two-node pair closed form") {
  const Graph g = testing::path_graph(2);
  for (double eps : {0.5, 0.1, 1e-3}) {
    CHECK(relaxed_energy(g, IndicatorVector::from_set(2, NodeSet{0}), eps) ==
          doctest::Approx((1.0 + 4.0 * eps) / 2.0).epsilon(1e-13));
  }
}

TEST_CASE("forward and transpose solves agree on 1^T (L + X)^-1 d") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Graph g = testing::random_strong_graph(25, 0.15, 300 + seed);
    const PoissonContext ctx(g);
    Rng rng = make_rng(seed);
    const RegularizedSystem sys(ctx, IndicatorVector(testing::random_phi(25, rng)), 0.1);
    const RelaxedSolution sol = solve_regularized(sys);
    CHECK(sol.u.sum() == doctest::Approx(ctx.degree().dot(sol.v)).epsilon(1e-8));
  }
}
