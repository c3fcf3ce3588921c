#include <doctest.h>

#include <cmath>
#include <random>

#include "pnf/generators.hpp"
#include "pnf/graph_operator.hpp"
#include "pnf/oracle.hpp"
#include "pnf/refine.hpp"
#include "test_util.hpp"

using namespace pnf;

TEST_CASE("build_residual closed forms") {
  Instance one(2, {{0, 1}}, Vector::Constant(1, 2.0), Vector::Ones(1), 1.0, 2.0);

  // f0 = 0, p=2: g' = 2^p g; r' = r + s|0|^0 = r + s (the p=2 smoothing keeps
  // the quadratic part of s in the resistance).
  ResidualProblem rp0 = build_residual(one, FlowVector::Zero(1));
  CHECK(rp0.instance.gradient()[0] == doctest::Approx(8.0));
  CHECK(rp0.instance.resistance()[0] == doctest::Approx(2.0));

  // f0 = 0, p>2: |0|^{p-2} = 0 so r' = r.
  Instance cubic(2, {{0, 1}}, Vector::Constant(1, 2.0), Vector::Ones(1), 1.0,
                 3.0);
  ResidualProblem rpc = build_residual(cubic, FlowVector::Zero(1));
  CHECK(rpc.instance.resistance()[0] == doctest::Approx(1.0));

  // p=2, f0=0.25: grad h = 2*0.25 + 2*0.25 = 1; g' = 4(2-1) = 4; r' = 2.
  FlowVector f0(1);
  f0 << 0.25;
  ResidualProblem rp = build_residual(one, f0);
  CHECK(rp.instance.gradient()[0] == doctest::Approx(4.0));
  CHECK(rp.instance.resistance()[0] == doctest::Approx(2.0));
  CHECK(rp.instance.s()[0] == doctest::Approx(1.0));
}

TEST_CASE("residual optimum dominates the scaled gap (Theorem 3.2)") {
  std::mt19937_64 rng(21);
  const double ps[] = {2, 3, 4};
  for (int trial = 0; trial < 30; ++trial) {
    GeneratedGraph g = make_random_connected(8, 14, 100 + trial);
    Instance inst = make_random_instance(g, ps[trial % 3], 200 + trial);
    DemandVector b = make_random_demand(8, 300 + trial);
    GraphOperator op(8, g.edges);
    FlowVector f0 = op.electrical_flow(b);

    OracleResult opt = reference_solve(inst, b);
    ResidualProblem rp = build_residual(inst, f0);
    OracleResult ropt = reference_solve(rp.instance, DemandVector::Zero(8));

    const double p = inst.p();
    const double gap = opt.objective - objective(inst, f0);
    CHECK(ropt.objective >= std::exp2(p) * gap - 1e-6 * (1.0 + std::abs(gap)));
  }
}

TEST_CASE("apply_update") {
  FlowVector f0(3), d(3);
  f0 << 1, 2, 3;
  d << 6.4, 0, -6.4;
  CHECK((apply_update(f0, FlowVector::Zero(3), 2.0) - f0).norm() ==
        doctest::Approx(0.0));
  FlowVector f1 = apply_update(f0, d, 2.0);
  CHECK(f1[0] == doctest::Approx(1.0 + 6.4 / 64.0));
  CHECK(f1[2] == doctest::Approx(3.0 - 6.4 / 64.0));

  // Circulation updates keep residues.
  std::vector<Edge> tri = {{0, 1}, {1, 2}, {0, 2}};
  Instance t(3, tri, Vector::Zero(3), Vector::Ones(3), 1.0, 2.0);
  FlowVector circ(3);
  circ << 1, 1, -1;
  CHECK((residues(t, apply_update(f0, circ, 2.0)) - residues(t, f0)).norm() <=
        1e-12);
}

TEST_CASE("refine_loop with the oracle as inner solver") {
  GeneratedGraph g = make_random_connected(8, 14, 31);
  Instance inst = make_random_instance(g, 3.0, 32);
  DemandVector b = make_random_demand(8, 33);
  auto inner = [&](const Instance& h) {
    return reference_solve(h, DemandVector::Zero(h.vertex_count())).flow;
  };

  SUBCASE("already-optimal start exits with near-zero residual") {
    OracleResult opt = reference_solve(inst, b);
    RefineResult rr = refine_loop(inst, b, opt.flow, inner);
    CHECK(rr.gap_certificate <= 1e-6);
    CHECK((rr.flow - opt.flow).cwiseAbs().maxCoeff() <= 1e-6);
  }

  SUBCASE("electrical start converges monotonically to the optimum") {
    GraphOperator op(8, g.edges);
    FlowVector f0 = op.electrical_flow(b);
    RefineResult rr = refine_loop(inst, b, f0, inner);
    for (size_t i = 1; i < rr.trajectory.size(); ++i)
      CHECK(rr.trajectory[i].objective >= rr.trajectory[i - 1].objective - 1e-12);
    OracleResult opt = reference_solve(inst, b);
    const double init_gap = opt.objective - objective(inst, f0);
    CHECK(opt.objective - objective(inst, rr.flow) <= 1e-6 * (1.0 + init_gap));
    CHECK(testutil::residues_match(inst, rr.flow, b));
  }
}

TEST_CASE("self-loop refinement reaches the 1-D optimum") {
  // A self-loop carries circulation freely, so the unconstrained 1-D optimum
  // of max 2f - f^2 - f^2 (f* = 1/2, obj 1/2) is reachable from f = 0.
  Instance one(1, {{0, 0}}, Vector::Constant(1, 2.0), Vector::Ones(1), 1.0, 2.0);
  DemandVector b = DemandVector::Zero(1);
  auto inner = [&](const Instance& h) {
    return reference_solve(h, DemandVector::Zero(1)).flow;
  };
  RefineResult rr = refine_loop(one, b, FlowVector::Zero(1), inner);
  CHECK(objective(one, rr.flow) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("sandwich inequality (Theorem 3.2 resistance form)") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double ps[] = {2, 3, 4, 8};
  for (int i = 0; i < 1000; ++i) {
    const double p = ps[i % 4];
    const double r = 2.0 * uni(rng), s = 2.0 * uni(rng);
    const double x = 3.0 * uni(rng) - 1.5, d = 3.0 * uni(rng) - 1.5;
    const double rmod = r + s * std::pow(std::abs(x), p - 2.0);
    const double mid = smoothed_power(r, s, x + d, p) - smoothed_power(r, s, x, p) -
                       d * smoothed_power_grad(r, s, x, p);
    const double env = smoothed_power(rmod, s, d, p);
    const double tol = 1e-9 * (1.0 + std::abs(mid) + env);
    CHECK(std::exp2(-p) * env <= mid + tol);
    CHECK(mid <= std::exp2(2.0 * p) * env + tol);
  }
}

TEST_CASE("geometric gap decay with the oracle inner solver") {
  GeneratedGraph g = make_random_connected(8, 13, 51);
  const double p = 2.0;
  Instance inst = make_random_instance(g, p, 52);
  DemandVector b = make_random_demand(8, 53);
  GraphOperator op(8, g.edges);
  FlowVector f = op.electrical_flow(b);
  OracleResult opt = reference_solve(inst, b);
  auto inner = [&](const Instance& h) {
    return reference_solve(h, DemandVector::Zero(8)).flow;
  };
  double gap = opt.objective - objective(inst, f);
  RefineOptions opts;
  opts.max_iters = 1;
  const double rate = 1.0 - std::exp2(-4.0 * p - 1.0);
  for (int t = 0; t < 15 && gap > 1e-10; ++t) {
    RefineResult rr = refine_loop(inst, b, f, inner, opts);
    f = rr.flow;
    const double next = opt.objective - objective(inst, f);
    CHECK(next <= rate * gap + 1e-12);
    gap = next;
  }
}

TEST_CASE("gradient matches finite differences") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double ps[] = {2, 2.5, 3, 4, 8};
  for (int i = 0; i < 200; ++i) {
    const double p = ps[i % 5];
    const double r = uni(rng), s = uni(rng);
    double x = 2.0 * uni(rng) - 1.0;
    if (std::abs(x) < 0.2) x = x < 0 ? -0.2 : 0.2;  // away from the kink
    const double h = 1e-6 * std::max(1.0, std::abs(x));
    const double fd =
        (smoothed_power(r, s, x + h, p) - smoothed_power(r, s, x - h, p)) /
        (2.0 * h);
    const double an = smoothed_power_grad(r, s, x, p);
    CHECK(an == doctest::Approx(fd).epsilon(1e-5));
  }
}
