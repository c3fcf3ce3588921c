#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "pnf/apps.hpp"
#include "pnf/generators.hpp"
#include "pnf/graph_operator.hpp"
#include "pnf/oracle.hpp"
#include "test_util.hpp"

using namespace pnf;

namespace {

// Independent primal oracle: damped Newton on the free voltages for
// min sum_e |x_u - x_v|^p with the labels pinned.
Vector ssl_primal_oracle(const SslProblem& prob, int iters = 300) {
  const int n = prob.vertex_count;
  std::vector<int> free_id(static_cast<size_t>(n), -1);
  std::vector<char> pinned(static_cast<size_t>(n), 0);
  Vector x = Vector::Zero(n);
  for (size_t i = 0; i < prob.labeled.size(); ++i) {
    pinned[static_cast<size_t>(prob.labeled[i])] = 1;
    x[prob.labeled[i]] = prob.labels[i];
  }
  int nf = 0;
  for (int v = 0; v < n; ++v)
    if (!pinned[static_cast<size_t>(v)]) free_id[static_cast<size_t>(v)] = nf++;
  if (nf == 0) return x;
  const double p = prob.p;
  auto value = [&](const Vector& xv) {
    double s = 0.0;
    for (const Edge& e : prob.edges)
      s += std::pow(std::abs(xv[e.u] - xv[e.v]), p);
    return s;
  };
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(nf);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(nf, nf);
    for (const Edge& e : prob.edges) {
      const double d = x[e.u] - x[e.v];
      const double ad = std::max(std::abs(d), 1e-9);
      const double g1 = p * std::pow(ad, p - 1.0) * (d < 0 ? -1.0 : 1.0);
      const double w = p * (p - 1.0) * std::pow(ad, p - 2.0);
      const int iu = free_id[static_cast<size_t>(e.u)];
      const int iv = free_id[static_cast<size_t>(e.v)];
      if (iu >= 0) grad[iu] += g1;
      if (iv >= 0) grad[iv] -= g1;
      if (iu >= 0) hess(iu, iu) += w;
      if (iv >= 0) hess(iv, iv) += w;
      if (iu >= 0 && iv >= 0) {
        hess(iu, iv) -= w;
        hess(iv, iu) -= w;
      }
    }
    if (grad.norm() <= 1e-12) break;
    hess.diagonal().array() += 1e-12;
    Eigen::VectorXd step = hess.ldlt().solve(grad);
    double t = 1.0;
    const double base = value(x);
    Vector xn = x;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x;
      for (int v = 0; v < n; ++v)
        if (free_id[static_cast<size_t>(v)] >= 0)
          xn[v] -= t * step[free_id[static_cast<size_t>(v)]];
      if (value(xn) <= base) break;
      t *= 0.5;
    }
    if ((xn - x).cwiseAbs().maxCoeff() <= 1e-14) break;
    x = xn;
  }
  return x;
}

double ssl_dual_objective(const SslDual& d, const FlowVector& f) {
  double v = d.dual.gradient().dot(f);
  for (int i = 0; i < f.size(); ++i)
    v -= d.c_q * std::pow(std::abs(f[i]), d.q);
  return v;
}

FlowVector solve_dual(const SslDual& d) {
  auto [f, rep] = solve_smoothed(
      d.dual, DemandVector::Zero(d.dual.vertex_count()),
      FlowVector::Zero(d.dual.edge_count()), 1e-10);
  (void)rep;
  return f;
}

}  // namespace

TEST_CASE("ssl_dual_transform: all vertices labeled gives self-loops") {
  SslProblem prob;
  prob.vertex_count = 3;
  prob.edges = {{0, 1}, {1, 2}};
  prob.labeled = {0, 1, 2};
  prob.labels = {0.0, 2.0, 1.0};
  prob.p = 1.5;
  SslDual d = ssl_dual_transform(prob);
  for (const Edge& e : d.dual.edges()) CHECK(e.self_loop());
  CHECK(d.q == doctest::Approx(3.0));
  CHECK(d.c_q == doctest::Approx(0.5 * std::pow(1.5, -3.0)));
  // Gradients are the label differences.
  CHECK(std::abs(d.dual.gradient()[0]) == doctest::Approx(2.0));
  CHECK(std::abs(d.dual.gradient()[1]) == doctest::Approx(1.0));
}

TEST_CASE("ssl path a-c-b, labels 0 and 1, p=2: x_c = 0.5") {
  SslProblem prob;
  prob.vertex_count = 3;
  prob.edges = {{0, 1}, {1, 2}};
  prob.labeled = {0, 2};
  prob.labels = {0.0, 1.0};
  prob.p = 2.0;
  SslDual d = ssl_dual_transform(prob);
  FlowVector f = solve_dual(d);
  Vector x = ssl_recover_voltages(prob, d, f);
  CHECK(x[0] == doctest::Approx(0.0));
  CHECK(x[2] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("ssl p=2 4-cycle with two labels matches the harmonic solution") {
  SslProblem prob;
  prob.vertex_count = 4;
  prob.edges = {{0, 1}, {1, 2}, {2, 3}, {0, 3}};
  prob.labeled = {0, 2};
  prob.labels = {0.0, 1.0};
  prob.p = 2.0;
  SslDual d = ssl_dual_transform(prob);
  Vector x = ssl_recover_voltages(prob, d, solve_dual(d));
  CHECK(x[1] == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(x[3] == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("ssl all labels equal recovers constant voltages") {
  GeneratedGraph g = make_random_connected(8, 14, 901);
  SslProblem prob;
  prob.vertex_count = 8;
  prob.edges = g.edges;
  prob.labeled = {0, 5};
  prob.labels = {0.7, 0.7};
  prob.p = 1.5;
  SslDual d = ssl_dual_transform(prob);
  FlowVector f = solve_dual(d);
  CHECK(ssl_dual_objective(d, f) <= 1e-8);
  Vector x = ssl_recover_voltages(prob, d, f);
  for (int v = 0; v < 8; ++v) CHECK(x[v] == doctest::Approx(0.7).epsilon(1e-6));
}

TEST_CASE("ssl weak duality and near-optimal primal recovery") {
  const double ps[] = {1.2, 1.5, 2.0};
  for (int trial = 0; trial < 6; ++trial) {
    GeneratedGraph g = make_random_connected(10, 18, 910 + trial);
    SslProblem prob;
    prob.vertex_count = 10;
    prob.edges = g.edges;
    prob.labeled = {0, 3, 7};
    prob.labels = {0.0, 1.0, -0.5};
    prob.p = ps[trial % 3];
    SslDual d = ssl_dual_transform(prob);
    FlowVector f = solve_dual(d);
    Vector x = ssl_recover_voltages(prob, d, f);
    const double primal = ssl_primal_objective(prob, x);
    // Weak duality between our two outputs.
    CHECK(ssl_dual_objective(d, f) <= primal + 1e-8);
    // Recovered primal within (1 + 1e-3) of the independent oracle.
    Vector xo = ssl_primal_oracle(prob);
    const double opt = ssl_primal_objective(prob, xo);
    CHECK(primal <= (1.0 + 1e-3) * opt + 1e-9);
  }
}

TEST_CASE("mwu_maxflow single edge") {
  MwuResult r = mwu_maxflow(2, {{0, 1}}, 0, 1, 0.1);
  CHECK(r.value == 1);
}

TEST_CASE("mwu_maxflow K4 matches exact_maxflow") {
  std::vector<Edge> k4;
  for (int u = 0; u < 4; ++u)
    for (int v = u + 1; v < 4; ++v) k4.push_back({u, v});
  MwuResult r = mwu_maxflow(4, k4, 0, 3, 0.1);
  const int exact = exact_maxflow(4, k4, 0, 3);
  CHECK(exact == 3);
  CHECK(r.value >= static_cast<int>(std::floor(0.9 * exact)));
  CHECK(r.value <= exact);
  // Width bound and final congestion.
  CHECK(r.width_bound <= std::pow(6.0 / 0.1, 1.0 / 2.0) + 1e-9);
  CHECK(r.flow.cwiseAbs().maxCoeff() <= 1.0 + 1e-6);
}

TEST_CASE("mwu_maxflow on random unit graphs") {
  for (int trial = 0; trial < 3; ++trial) {
    GeneratedGraph g = make_random_connected(12, 26, 920 + trial);
    const int s = 0, t = 11;
    const int exact = exact_maxflow(12, g.edges, s, t);
    MwuResult r = mwu_maxflow(12, g.edges, s, t, 0.1);
    CHECK(r.value >= static_cast<int>(std::floor(0.9 * exact)));
    CHECK(r.value <= exact);
    CHECK(r.flow.cwiseAbs().maxCoeff() <= 1.0 + 1e-6);
    // The returned flow routes value units from s to t.
    Instance carrier(12, g.edges, Vector::Zero(26), Vector::Ones(26), 1.0, 2.0);
    DemandVector res = residues(carrier, r.flow);
    CHECK(res[s] >= (1.0 - 0.15) * r.value);
    for (int v = 0; v < 12; ++v)
      if (v != s && v != t) CHECK(std::abs(res[v]) <= 1e-6);
  }
}
