#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "pnf/errors.hpp"
#include "pnf/generators.hpp"
#include "pnf/portal.hpp"
#include "pnf/spanning_tree.hpp"
#include "test_util.hpp"

using namespace pnf;

namespace {

SpanningTree build_tree(int n, const std::vector<Edge>& edges, const Vector& r,
                        uint64_t seed = 0) {
  LsstResult ls = lsst(n, edges, r, seed);
  return SpanningTree(n, edges, r, ls.tree_edges);
}

std::vector<int> off_tree_edges(const SpanningTree& t, int m) {
  std::vector<int> off;
  for (int i = 0; i < m; ++i)
    if (!t.in_tree(i)) off.push_back(i);
  return off;
}

}  // namespace

TEST_CASE("lsst on a tree returns the tree, total stretch m") {
  GeneratedGraph g = make_recursive_tree(20, 3);
  Vector r = Vector::Ones(19);
  LsstResult ls = lsst(20, g.edges, r, 0);
  CHECK(ls.tree_edges.size() == 19);
  CHECK(ls.total_stretch == doctest::Approx(19.0));
}

TEST_CASE("lsst on a cycle drops one edge with stretch n-1") {
  const int n = 12;
  std::vector<Edge> c;
  for (int i = 0; i < n; ++i) c.push_back({std::min(i, (i + 1) % n), std::max(i, (i + 1) % n)});
  Vector r = Vector::Ones(n);
  LsstResult ls = lsst(n, c, r, 1);
  CHECK(ls.tree_edges.size() == n - 1);
  SpanningTree t(n, c, r, ls.tree_edges);
  CHECK(t.total_stretch() == doctest::Approx(static_cast<double>(n - 1) + (n - 1)));
}

TEST_CASE("lsst throws on disconnected input") {
  std::vector<Edge> two = {{0, 1}, {2, 3}};
  CHECK_THROWS_AS(lsst(4, two, Vector::Ones(2), 0), ShapeError);
}

TEST_CASE("lsst grid average stretch bound") {
  GeneratedGraph g = make_grid(16, 16);
  Vector r = Vector::Ones(static_cast<Eigen::Index>(g.edges.size()));
  LsstResult ls = lsst(256, g.edges, r, 0);
  const double log2n = std::log2(256.0);
  MESSAGE("grid 16x16 average stretch: ", ls.average_stretch);
  CHECK(ls.average_stretch <= 20.0 * log2n * log2n);
}

TEST_CASE("tree path machinery") {
  // Path 0-1-2-3 with resistances 1,2,3.
  std::vector<Edge> pe = {{0, 1}, {1, 2}, {2, 3}, {0, 3}};
  Vector r(4);
  r << 1, 2, 3, 1;
  SpanningTree t(4, pe, r, {0, 1, 2});
  CHECK(t.path_resistance(0, 3) == doctest::Approx(6.0));
  CHECK(t.path_length(0, 3) == 3);
  CHECK(t.lca(0, 3) == 0);
  CHECK(t.stretch(3) == doctest::Approx(6.0));
  // Signed traversal 3 -> 0 visits edges in reverse orientation.
  double signsum = 0.0;
  t.for_each_path_edge(3, 0, [&](int e, double s) { signsum += s; (void)e; });
  CHECK(signsum == doctest::Approx(-3.0));
}

TEST_CASE("find_portal on the 4-path with one off-tree edge, nhat=1") {
  std::vector<Edge> pe = {{0, 1}, {1, 2}, {2, 3}, {0, 3}};
  Vector r = Vector::Ones(4);
  SpanningTree t(4, pe, r, {0, 1, 2});
  std::vector<int> portals = find_portal(t, {3}, 1);
  REQUIRE(portals.size() == 1);
  CHECK(portals[0] >= 0);
  CHECK(portals[0] <= 3);
  CHECK(t.stretch(3) == doctest::Approx(3.0));

  // Routing through the single portal yields a self-loop.
  Instance inst(4, pe, Vector::Ones(4), r, 1.0, 2.0);
  TreePortalRouting tr = tree_portal_route(inst, t, {3}, portals);
  REQUIRE(tr.edges.size() == 1);
  CHECK(tr.edges[0].image.self_loop());
  CHECK(tr.edges[0].portal_case <= 1);
}

TEST_CASE("find_portal on a star with leaf-to-leaf edges, nhat=1") {
  // Star center 0, leaves 1..6; off-tree edges between leaves.
  std::vector<Edge> es;
  for (int v = 1; v <= 6; ++v) es.push_back({0, v});
  es.push_back({1, 2});
  es.push_back({3, 4});
  es.push_back({5, 6});
  Vector r = Vector::Ones(9);
  SpanningTree t(7, es, r, {0, 1, 2, 3, 4, 5});
  std::vector<int> portals = find_portal(t, {6, 7, 8}, 1);
  REQUIRE(portals.size() == 1);
  CHECK(portals[0] == 0);  // the center

  // Congestion bound: each tree edge used by <= 10 mhat / nhat edges.
  std::vector<int> count(9, 0);
  Instance inst(7, es, Vector::Ones(9), r, 1.0, 2.0);
  TreePortalRouting tr = tree_portal_route(inst, t, {6, 7, 8}, portals);
  for (const RoutedEdge& re : tr.edges) {
    for (auto [e, s] : re.seg_u) count[static_cast<size_t>(e)]++;
    for (auto [e, s] : re.seg_v) count[static_cast<size_t>(e)]++;
  }
  for (int c : count) CHECK(c <= 10 * 3 / 1);
}

TEST_CASE("find_portal post-hoc bounds on random graphs and grids") {
  for (int trial = 0; trial < 6; ++trial) {
    GeneratedGraph g = trial % 2 == 0 ? make_grid(8, 8)
                                      : make_random_connected(60, 140, 900 + trial);
    const int m = static_cast<int>(g.edges.size());
    Vector r = Vector::Ones(m);
    SpanningTree t = build_tree(g.vertex_count, g.edges, r, trial);
    std::vector<int> off = off_tree_edges(t, m);
    const int mhat = static_cast<int>(off.size());
    if (mhat == 0) continue;
    for (int nhat : {1, std::max(1, mhat / 4), mhat}) {
      std::vector<int> portals = find_portal(t, off, nhat);
      CHECK(static_cast<int>(portals.size()) <= nhat);
      Instance inst(g.vertex_count, g.edges, Vector::Zero(m), r, 1.0, 2.0);
      TreePortalRouting tr = tree_portal_route(inst, t, off, portals);
      // Per-tree-edge congestion count and stretch-mass bounds (Lemma 4.3).
      std::vector<int> count(static_cast<size_t>(m), 0);
      std::vector<double> mass(static_cast<size_t>(m), 0.0);
      double total_stretch = 0.0;
      for (int e : off) total_stretch += t.stretch(e);
      for (const RoutedEdge& re : tr.edges) {
        for (auto seg : {&re.seg_u, &re.seg_v})
          for (auto [e, s] : *seg) {
            count[static_cast<size_t>(e)]++;
            mass[static_cast<size_t>(e)] += re.stretch;
          }
      }
      for (int i = 0; i < m; ++i) {
        CHECK(count[static_cast<size_t>(i)] <= 10.0 * mhat / nhat);
        CHECK(mass[static_cast<size_t>(i)] <=
              10.0 / nhat * total_stretch + 1e-9);
      }
    }
  }
}

TEST_CASE("tree_portal_route direct case and gradient preservation") {
  // Path tree 0-1-2, tree gradients 1,1; off-tree edge (0,2) with g=5.
  std::vector<Edge> es = {{0, 1}, {1, 2}, {0, 2}};
  Vector g(3), r(3);
  g << 1, 1, 5;
  r << 1, 1, 1;
  Instance inst(3, es, g, r, 1.0, 2.0);
  SpanningTree t(3, es, r, {0, 1});

  SUBCASE("single portal at the middle vertex gives a self-loop with g=3") {
    TreePortalRouting tr = tree_portal_route(inst, t, {2}, {1});
    REQUIRE(tr.edges.size() == 1);
    CHECK(tr.edges[0].image.self_loop());
    CHECK(tr.edges[0].image.u == 1);
    CHECK(std::abs(tr.edges[0].g_routed) == doctest::Approx(3.0));
    // Unit flow on the routed edge maps back to a flow with the same
    // gradient dot product.
    FlowVector unit = FlowVector::Zero(3);
    unit[2] = 1.0;
    FlowVector back = tr.reverse.apply(unit);
    CHECK(inst.gradient().dot(back) ==
          doctest::Approx(tr.routed.gradient()[2]).epsilon(1e-12));
  }

  SUBCASE("both endpoints portals routes the edge to itself") {
    TreePortalRouting tr = tree_portal_route(inst, t, {2}, {0, 2});
    REQUIRE(tr.edges.size() == 1);
    CHECK(!tr.edges[0].image.self_loop());
    CHECK(tr.edges[0].g_routed == doctest::Approx(5.0));
    CHECK(tr.edges[0].seg_u.empty());
    CHECK(tr.edges[0].seg_v.empty());
  }

  SUBCASE("zero gradient routes to zero gradients") {
    Instance z(3, es, Vector::Zero(3), r, 1.0, 2.0);
    TreePortalRouting tr = tree_portal_route(z, t, {2}, {1});
    CHECK(tr.routed.gradient().cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
}

TEST_CASE("routing maps preserve residues and gradient dots on random flows") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    GeneratedGraph g = make_random_connected(24, 60, 1000 + trial);
    const int m = 60;
    Vector grad(m), r(m);
    for (int i = 0; i < m; ++i) grad[i] = uni(rng);
    r.setConstant(0.5);
    Instance inst(24, g.edges, grad, r, 1.0, 2.0);
    SpanningTree t = build_tree(24, g.edges, r, 2000 + trial);
    std::vector<int> off = off_tree_edges(t, m);
    if (off.empty()) continue;
    std::vector<int> portals = find_portal(t, off, std::max<int>(1, off.size() / 3));
    TreePortalRouting tr = tree_portal_route(inst, t, off, portals);

    for (int rep = 0; rep < 20; ++rep) {
      FlowVector f(m);
      for (int i = 0; i < m; ++i) f[i] = uni(rng);
      FlowVector routed = tr.forward.apply(f);
      CHECK((residues(tr.routed, routed) - residues(inst, f)).cwiseAbs().maxCoeff() <=
            1e-8);
      FlowVector back = tr.reverse.apply(f);
      CHECK((residues(inst, back) - residues(tr.routed, f)).cwiseAbs().maxCoeff() <=
            1e-8);
      // Gradient dot preservation for the reverse direction: flow on routed
      // edges mapped back sees the original gradient identically.
      const double lhs = inst.gradient().dot(back);
      const double rhs = tr.routed.gradient().dot(f);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
    }

    // Stored stretch matches an independent recomputation.
    for (const RoutedEdge& re : tr.edges) {
      double sum = 0.0;
      for (auto seg : {&re.seg_u, &re.seg_v})
        for (auto [e, s] : *seg) sum += r[e];
      CHECK(re.stretch == doctest::Approx(sum / r[re.orig]).epsilon(1e-12));
    }
  }
}
