#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "bracketdyn/complex.hpp"
#include "bracketdyn/graphs.hpp"
#include "test_util.hpp"

using namespace bracketdyn;

namespace {

// Six-node toy graph (one triangle, one pendant path) entered with the same
// edge ordering and orientations as the worked example the incidence
// convention was fixed against. Canonical storage flips edge 4 to (1,4), so
// its d0 row and d1 column carry the opposite sign.
const std::vector<std::array<int, 2>> kToyEdges = {{0, 1}, {1, 2}, {1, 3}, {3, 4}, {4, 1}, {4, 5}};

} // namespace

TEST_CASE("toy graph incidence matrices match the reference convention") {
  CliqueComplex cx = build_complex(6, kToyEdges);
  REQUIRE(cx.count(0) == 6);
  REQUIRE(cx.count(1) == 6);
  REQUIRE(cx.count(2) == 1);

  const Mat expected_d0(6, 6,
                        {-1, 1, 0, 0, 0, 0, //
                         0, -1, 1, 0, 0, 0, //
                         0, -1, 0, 1, 0, 0, //
                         0, 0, 0, -1, 1, 0, //
                         0, -1, 0, 0, 1, 0, //
                         0, 0, 0, 0, -1, 1});
  const Mat expected_d1(1, 6, {0, 0, 1, 1, -1, 0});

  CHECK(max_abs(sub(cx.d0.dense(), expected_d0)) == 0.0);
  CHECK(max_abs(sub(cx.d1.dense(), expected_d1)) == 0.0);
}

TEST_CASE("triangle and path clique counts") {
  CliqueComplex k3 = build_complex(3, complete_graph(3).edges);
  CHECK(k3.count(2) == 1);
  CHECK(k3.d1.n_rows == 1);
  CHECK(k3.d1.n_cols == 3);

  CliqueComplex path = build_complex(3, {{0, 1}, {1, 2}});
  CHECK(path.count(2) == 0);
  CHECK(path.d1.n_rows == 0);
  CHECK(path.d1.n_cols == 2);
}

TEST_CASE("construction errors name the offending edge") {
  CHECK_THROWS_WITH_AS(build_complex(3, {{0, 0}}), doctest::Contains("self-loop"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(build_complex(2, {{0, 5}}), doctest::Contains("(0,5)"),
                       std::invalid_argument);
  CHECK_THROWS_AS(build_complex(3, {{0, 1}, {1, 0}}), std::invalid_argument);
}

TEST_CASE("graph gradient basics") {
  CliqueComplex cx = build_complex(2, {{0, 1}});
  Cochain q{0, Mat(2, 1, {0.0, 1.0})};
  Cochain dq = apply_d(cx, q);
  CHECK(dq.degree == 1);
  CHECK(dq.values(0, 0) == doctest::Approx(1.0));

  // Constants are in the kernel on any graph.
  Rng rng(11);
  for (int t = 0; t < 5; ++t) {
    CliqueComplex rcx = testutil::random_complex(rng);
    Cochain c{0, Mat::full(rcx.n, 3, 2.5)};
    CHECK(max_abs(apply_d(rcx, c).values) == 0.0);
  }

  CHECK_THROWS_AS(apply_d(cx, Cochain{2, Mat(0, 1)}), std::invalid_argument);
}

TEST_CASE("d1 d0 = 0 exactly, including the toy graph") {
  CliqueComplex cx = build_complex(6, kToyEdges);
  Rng rng(3);
  // Integer-valued features keep every operation exact in double arithmetic.
  Mat q(6, 4);
  for (size_t i = 0; i < q.size(); ++i) q.data()[i] = double(rng.uniform_int(-50, 50));
  CHECK(max_abs(d_apply(cx, 1, d_apply(cx, 0, q))) == 0.0);

  for (int t = 0; t < 20; ++t) {
    CliqueComplex rcx = testutil::random_triangle_complex(rng);
    Mat composed = matmul(rcx.d1.dense(), rcx.d0.dense());
    CHECK(max_abs(composed) == 0.0); // integer arithmetic
  }
}

TEST_CASE("single-edge divergence") {
  CliqueComplex cx = build_complex(2, {{0, 1}});
  Cochain g{1, Mat(1, 1, {1.0})};
  Cochain div = apply_d_transpose(cx, g);
  CHECK(div.degree == 0);
  CHECK(div.values(0, 0) == doctest::Approx(-1.0));
  CHECK(div.values(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("transpose adjointness over random graphs and degrees") {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    CliqueComplex cx = testutil::random_triangle_complex(rng);
    const int f = 1 + (t % 3);
    for (int k = 0; k <= 1; ++k) {
      if (cx.count(k + 1) == 0) continue;
      Mat a = rng.normal_mat(cx.count(k), f);
      Mat b = rng.normal_mat(cx.count(k + 1), f);
      const double lhs = dot_all(d_apply(cx, k, a), b);
      const double rhs = dot_all(a, dt_apply(cx, k, b));
      CHECK(rel_diff(lhs, rhs) <= 1e-13);
    }
  }
}

TEST_CASE("combinatorial Laplacian equals D - A exactly") {
  Rng rng(19);
  for (int t = 0; t < 20; ++t) {
    CliqueComplex cx = testutil::random_complex(rng, 16, 0.3);
    Mat lap = matmul(transpose(cx.d0.dense()), cx.d0.dense());
    Mat dma(cx.n, cx.n);
    for (int i = 0; i < cx.n; ++i) dma(i, i) = double(cx.degree[i]);
    for (const auto& e : cx.edges) {
      dma(e[0], e[1]) -= 1.0;
      dma(e[1], e[0]) -= 1.0;
    }
    CHECK(max_abs(sub(lap, dma)) == 0.0);
  }
}

TEST_CASE("hodge decomposition: exact input stays exact") {
  Rng rng(23);
  for (int t = 0; t < 5; ++t) {
    CliqueComplex cx = testutil::random_triangle_complex(rng);
    Mat q = rng.normal_mat(cx.n, 2);
    Cochain p{1, d_apply(cx, 0, q)};
    HodgeParts parts = hodge_decompose(cx, p);
    CHECK(max_abs(sub(parts.exact.values, p.values)) <= 1e-10);
    CHECK(max_abs(parts.harmonic.values) <= 1e-10);
    CHECK(max_abs(parts.coexact.values) <= 1e-10);
  }
}

TEST_CASE("hodge decomposition: coexact input on the triangle") {
  CliqueComplex cx = build_complex(3, complete_graph(3).edges);
  Cochain p{1, dt_apply(cx, 1, Mat::ones(1, 1))};
  HodgeParts parts = hodge_decompose(cx, p);
  CHECK(max_abs(sub(parts.coexact.values, p.values)) <= 1e-10);
  CHECK(max_abs(parts.exact.values) <= 1e-10);
  CHECK(max_abs(parts.harmonic.values) <= 1e-10);
}

TEST_CASE("hodge decomposition: C4 cycle is harmonic, against a dense oracle") {
  CliqueComplex cx = build_complex(4, cycle_graph(4).edges);
  // The unit flow around the cycle, written against canonical orientations:
  // edge (0,3) is traversed backwards.
  Mat flow(4, 1, {1.0, 1.0, 1.0, -1.0});
  HodgeParts parts = hodge_decompose(cx, Cochain{1, flow});
  CHECK(max_abs(sub(parts.harmonic.values, flow)) <= 1e-10);
  CHECK(max_abs(parts.exact.values) <= 1e-10);
  CHECK(max_abs(parts.coexact.values) <= 1e-10);

  // Independent dense projection onto the complement of span(d0).
  Mat grad_basis = cx.d0.dense(); // columns span Im d0 in edge space
  Mat proj = testutil::project_onto_colspan(grad_basis, flow);
  Mat oracle_harmonic = sub(flow, proj);
  CHECK(max_abs(sub(parts.harmonic.values, oracle_harmonic)) <= 1e-10);
}

TEST_CASE("hodge parts are orthogonal and sum to the input") {
  Rng rng(31);
  for (int t = 0; t < 10; ++t) {
    CliqueComplex cx = testutil::random_triangle_complex(rng);
    Mat p = rng.normal_mat(cx.count(1), 2);
    HodgeParts parts = hodge_decompose(cx, Cochain{1, p});
    Mat sum = add(add(parts.exact.values, parts.harmonic.values), parts.coexact.values);
    CHECK(max_abs(sub(sum, p)) <= 1e-10);
    CHECK(std::fabs(dot_all(parts.exact.values, parts.harmonic.values)) <= 1e-10);
    CHECK(std::fabs(dot_all(parts.exact.values, parts.coexact.values)) <= 1e-10);
    CHECK(std::fabs(dot_all(parts.harmonic.values, parts.coexact.values)) <= 1e-10);
  }
}

TEST_CASE("graph IO round trip") {
  GraphSpec g = load_graph([] {
    const char* path = "test_graph_tmp.txt";
    std::ofstream out(path);
    out << "# toy\n0 1\n1 2\n";
    return std::string(path);
  }());
  CHECK(g.n == 3);
  CHECK(g.edges.size() == 2);

  {
    std::ofstream out("test_graph_tmp.json");
    out << R"({"n": 4, "edges": [[0,1],[2,3]]})";
  }
  GraphSpec gj = load_graph("test_graph_tmp.json");
  CHECK(gj.n == 4);
  CHECK(gj.edges.size() == 2);
  std::remove("test_graph_tmp.txt");
  std::remove("test_graph_tmp.json");
}
