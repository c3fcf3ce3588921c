#include <doctest.h>

#include <cmath>
#include <random>

#include "pnf/generators.hpp"
#include "pnf/graph_operator.hpp"
#include "pnf/oracle.hpp"
#include "pnf/solver.hpp"
#include "test_util.hpp"

using namespace pnf;

namespace {

// Exhaustive min s-t cut, unit capacities, n <= ~20.
int brute_force_min_cut(int n, const std::vector<Edge>& edges, int s, int t) {
  int best = static_cast<int>(edges.size()) + 1;
  for (uint32_t mask = 0; mask < (uint32_t{1} << n); ++mask) {
    if (!(mask >> s & 1) || (mask >> t & 1)) continue;
    int cut = 0;
    for (const Edge& e : edges)
      if (((mask >> e.u) & 1) != ((mask >> e.v) & 1)) ++cut;
    best = std::min(best, cut);
  }
  return best;
}

std::vector<Edge> complete_graph(int n) {
  std::vector<Edge> es;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) es.push_back({u, v});
  return es;
}

}  // namespace

TEST_CASE("reference_solve single edge") {
  Instance one(2, {{0, 1}}, Vector::Constant(1, 1.5), Vector::Ones(1), 0.5, 3.0);
  DemandVector b(2);
  b << 0.8, -0.8;
  OracleResult res = reference_solve(one, b);
  // The flow is forced; the objective is the direct formula.
  CHECK(res.flow[0] == doctest::Approx(0.8));
  CHECK(res.objective ==
        doctest::Approx(1.5 * 0.8 - smoothed_power(1.0, 0.5, 0.8, 3.0)));
  CHECK(res.converged);
}

TEST_CASE("reference_solve p=2 matches dense electrical closed form") {
  GeneratedGraph g = make_random_connected(10, 20, 301);
  Instance inst = make_random_instance(g, 2.0, 302);
  DemandVector b = make_random_demand(10, 303);
  OracleResult res = reference_solve(inst, b);
  // Quadratic program: maximize g.f - f.(R+sI)f with B^T f = b.
  Eigen::MatrixXd B = testutil::dense_incidence(10, g.edges);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(20, 20);
  for (int i = 0; i < 20; ++i)
    H(i, i) = 2.0 * (inst.resistance()[i] + inst.s()[i]);
  Eigen::MatrixXd K(30, 30);
  K.setZero();
  K.topLeftCorner(20, 20) = H;
  K.topRightCorner(20, 10) = B;
  K.bottomLeftCorner(10, 20) = B.transpose();
  Eigen::VectorXd rhs(30);
  rhs.head(20) = inst.gradient();
  rhs.tail(10) = b;
  Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
  FlowVector fstar = sol.head(20);
  CHECK((res.flow - fstar).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(res.objective == doctest::Approx(objective(inst, fstar)).epsilon(1e-8));
}

TEST_CASE("reference_solve agrees with base_case_solve on 100 instances") {
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5 + trial % 16;
    const int m = std::min(3 * n, n * (n - 1) / 2);
    GeneratedGraph g = make_random_connected(n, m, 310 + trial);
    const double ps[] = {2, 3, 4, 8};
    Instance inst = make_random_instance(g, ps[trial % 4], 410 + trial);
    DemandVector b = make_random_demand(n, 510 + trial);
    OracleResult res = reference_solve(inst, b);
    FlowVector f = base_case_solve(inst, b);
    CHECK(objective(inst, f) == doctest::Approx(res.objective).epsilon(1e-6));
    CHECK(testutil::residues_match(inst, res.flow, b, 1e-9));
  }
}

TEST_CASE("oracle stationarity and tolerance self-consistency") {
  GeneratedGraph g = make_random_connected(12, 26, 601);
  Instance inst = make_random_instance(g, 4.0, 602);
  DemandVector b = make_random_demand(12, 603);
  OracleResult tight = reference_solve(inst, b, 1e-10);
  OracleResult loose = reference_solve(inst, b, 2e-10);
  CHECK(loose.objective <= tight.objective + 2e-10);

  // g - grad h_p is orthogonal to the cycle space at the optimum.
  GraphOperator op(12, g.edges);
  Vector resid = inst.gradient();
  for (int i = 0; i < 26; ++i)
    resid[i] -= smoothed_power_grad(inst.resistance()[i], inst.s()[i],
                                    tight.flow[i], inst.p());
  CHECK(op.cycle_project(resid).cycle_part.norm() <= 1e-8);
  CHECK(tight.kkt_residual <= 1e-8);
}

TEST_CASE("exact_maxflow closed forms") {
  CHECK(exact_maxflow(2, {{0, 1}}, 0, 1) == 1);
  std::vector<Edge> k4 = complete_graph(4);
  for (int s = 0; s < 4; ++s)
    for (int t = 0; t < 4; ++t)
      if (s != t) CHECK(exact_maxflow(4, k4, s, t) == 3);
  // Disconnected pair.
  CHECK(exact_maxflow(4, {{0, 1}, {2, 3}}, 0, 3) == 0);
}

TEST_CASE("exact_maxflow equals the brute-force min cut on n<=12") {
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 6 + trial % 7;
    GeneratedGraph g = make_random_connected(n, 2 * n, 700 + trial);
    std::mt19937_64 rng(800 + trial);
    const int s = static_cast<int>(rng() % n);
    int t = static_cast<int>(rng() % n);
    if (t == s) t = (t + 1) % n;
    CHECK(exact_maxflow(n, g.edges, s, t) ==
          brute_force_min_cut(n, g.edges, s, t));
  }
}
