#include <doctest.h>

#include <sstream>

#include "support/fixtures.hpp"
#include "trapclust/errors.hpp"
#include "trapclust/graph.hpp"

using namespace trapclust;

TEST_CASE("edge list: comments, default weights and parallel edges") {
  std::istringstream in(
      "# header\n"
      "a b 2.5\n"
      "b a\n"
      "a b 0.5  # duplicate is summed\n"
      "\n"
      "b c 1\n"
      "c a 3\n");
  const Graph g = load_edge_list(in);
  REQUIRE(g.size() == 3);
  CHECK(g.name(0) == "a");
  CHECK(g.name(2) == "c");
  CHECK(g.weight(0, 1) == doctest::Approx(3.0));
  CHECK(g.weight(1, 0) == 1.0);
  CHECK(g.weight(0, 2) == 0.0);
  CHECK(g.out_degree()[1] == doctest::Approx(2.0));
  CHECK(g.num_edges() == 4);
}

TEST_CASE("edge list errors carry line numbers or node names") {
  SUBCASE("too many fields") {
    std::istringstream in("a b 1\na b c d\n");
    try {
      load_edge_list(in);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(e.code() == ExitCode::kValidation);
    }
  }
  SUBCASE("bad weight") {
    std::istringstream in("a b x\n");
    CHECK_THROWS_AS(load_edge_list(in), ParseError);
  }
  SUBCASE("negative weight") {
    std::istringstream in("a b -1\nb a 1\n");
    CHECK_THROWS_WITH_AS(load_edge_list(in), doctest::Contains("negative"), ValidationError);
  }
  SUBCASE("dangling node is named") {
    std::istringstream in("a b 1\nb c 1\n");
    CHECK_THROWS_WITH_AS(load_edge_list(in), doctest::Contains("'c'"), ValidationError);
  }
}

TEST_CASE("self-loop option rescues dangling nodes") {
  std::istringstream in("a b 1\n");
  LoadOptions opts;
  opts.self_loop_weight = 0.5;
  const Graph g = load_edge_list(in, opts);
  CHECK(g.weight(1, 1) == 0.5);
  CHECK(g.out_degree()[0] == doctest::Approx(1.5));
}

TEST_CASE("symmetrize averages A and its transpose") {
  std::istringstream in("a b 2\nb a 4\nb c 2\nc b 2\n");
  LoadOptions opts;
  opts.symmetrize = true;
  const Graph g = load_edge_list(in, opts);
  CHECK(g.is_symmetric());
  CHECK(g.weight(0, 1) == doctest::Approx(3.0));
  CHECK(g.weight(1, 0) == doctest::Approx(3.0));
}

TEST_CASE("MatrixMarket symmetric pattern") {
  std::istringstream in(
      "%%MatrixMarket matrix coordinate pattern symmetric\n"
      "% comment\n"
      "3 3 2\n"
      "2 1\n"
      "3 2\n");
  const Graph g = load_matrix_market(in);
  REQUIRE(g.size() == 3);
  CHECK(g.name(0) == "1");
  CHECK(g.weight(0, 1) == 1.0);
  CHECK(g.weight(1, 0) == 1.0);
  CHECK(g.weight(2, 1) == 1.0);
  CHECK(g.is_symmetric());
}

TEST_CASE("MatrixMarket rejects malformed input") {
  std::istringstream bad_header("%%MatrixMarket matrix array real general\n2 2\n");
  CHECK_THROWS_AS(load_matrix_market(bad_header), ParseError);
  std::istringstream short_body(
      "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 2 1\n2 1 1\n");
  CHECK_THROWS_AS(load_matrix_market(short_body), ParseError);
}

TEST_CASE("save and reload round-trips weights exactly") {
  const Graph g = testing::random_strong_graph(12, 0.3, 5);
  std::stringstream buf;
  save_edge_list(g, buf);
  const Graph h = load_edge_list(buf);
  REQUIRE(h.size() == g.size());
  for (NodeIndex i = 0; i < g.size(); ++i) {
    const NodeIndex hi = *h.find(g.name(i));
    auto cols = g.neighbors(i);
    auto ws = g.weights(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      CHECK(h.weight(hi, *h.find(g.name(cols[k]))) == ws[k]);
    }
  }
}

TEST_CASE("labels: first-appearance class ids, unknown nodes ignored, conflicts rejected") {
  const Graph g = testing::two_triangles();
  std::istringstream in("0 left\n5 right\n1 left\nghost right\n");
  const NodeLabels labels = load_labels(in, g);
  CHECK(labels.num_classes() == 2);
  CHECK(labels.class_names[0] == "left");
  CHECK(labels.label[0] == 0);
  CHECK(labels.label[5] == 1);
  CHECK_FALSE(labels.label[3].has_value());
  CHECK(labels.num_labeled() == 3);

  std::istringstream conflict("0 left\n0 right\n");
  CHECK_THROWS_AS(load_labels(conflict, g), ValidationError);
}

TEST_CASE("node set reader rejects unknown names") {
  const Graph g = testing::two_triangles();
  std::istringstream ok("2 0\n1\n");
  CHECK(load_node_set(ok, g) == NodeSet{0, 1, 2});
  std::istringstream bad("0 nope\n");
  CHECK_THROWS_AS(load_node_set(bad, g), ParseError);
}

TEST_CASE("Laplacian is D - A with the self-loop on the diagonal") {
  std::vector<Edge> e{{0, 1, 2.0}, {1, 0, 1.0}, {1, 1, 0.5}, {0, 2, 1.0}, {2, 0, 4.0}};
  const Graph g = Graph::from_edges(3, e);
  const Eigen::MatrixXd L(laplacian(g));
  Eigen::MatrixXd expect(3, 3);
  expect << 3.0, -2.0, -1.0,
           -1.0, 1.0, 0.0,
           -4.0, 0.0, 4.0;
  CHECK((L - expect).norm() == doctest::Approx(0.0));
  CHECK(L.rowwise().sum().norm() == doctest::Approx(0.0));
  CHECK(laplacian_frobenius(g) == doctest::Approx(expect.norm()));
}

TEST_CASE("strong connectivity, components and closed subsets") {
  CHECK(is_strongly_connected(testing::directed_cycle(5)));
  // 0 <-> 1 -> 2 <-> 3: {2,3} is closed.
  std::vector<Edge> e{{0, 1, 1}, {1, 0, 1}, {1, 2, 1}, {2, 3, 1}, {3, 2, 1}};
  const Graph g = Graph::from_edges(4, e);
  CHECK_FALSE(is_strongly_connected(g));
  const auto scc = strongly_connected_components(g);
  CHECK(scc[0] == scc[1]);
  CHECK(scc[2] == scc[3]);
  CHECK(scc[0] != scc[2]);
  CHECK(closed_subset(g, NodeSet{1, 2, 3}) == NodeSet{2, 3});
  CHECK(closed_subset(g, NodeSet{0, 1}).empty());
}

TEST_CASE("indicator vectors") {
  CHECK_THROWS_AS(IndicatorVector({0.5, 1.5}), ValidationError);
  const auto phi = IndicatorVector::from_set(4, NodeSet{1, 3});
  CHECK(phi.is_binary());
  CHECK(phi.support_size() == 2.0);
  CHECK_FALSE(phi.is_all_ones());
  CHECK(IndicatorVector({1.0, 1.0}).is_all_ones());
  CHECK_FALSE(IndicatorVector({0.25, 1.0}).is_binary());
}

TEST_CASE("compensated sum is exact where naive summation is not") {
  const std::vector<double> xs{1e16, 1.0, -1e16, 1.0};
  CHECK(compensated_sum(xs) == 2.0);
}

TEST_CASE("normalize_set sorts, dedups and range-checks") {
  CHECK(normalize_set(5, {3, 1, 3, 0}) == NodeSet{0, 1, 3});
  CHECK_THROWS_AS(normalize_set(5, {5}), ValidationError);
}
