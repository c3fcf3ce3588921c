#pragma once

#include <vector>

#include "pnf/instance.hpp"
#include "pnf/solver.hpp"

namespace pnf {

/// Semi-supervised regression: min_x sum_e |x_u - x_v|^p with x pinned to
/// `labels` on `labeled`, p in (1.01, 2).
struct SslProblem {
  int vertex_count = 0;
  std::vector<Edge> edges;
  std::vector<int> labeled;
  std::vector<double> labels;
  double p = 1.5;
};

/// Dual circulation instance: labeled vertices merged into one supernode,
/// gradient g_e = s_u [u labeled] - s_v [v labeled], objective
/// g.f - c_q sum |f|^q with q = p/(p-1), c_q = (p-1) p^{-q}. Edge order
/// matches the primal; `edge_sign` converts dual-instance flow back to the
/// primal edge orientation.
struct SslDual {
  Instance dual;
  int supernode = 0;
  std::vector<int> vertex_map;     // primal vertex -> dual vertex
  std::vector<double> edge_sign;   // dual flow * sign = flow in primal (u->v)
  double q = 2.0;
  double c_q = 0.25;
};

SslDual ssl_dual_transform(const SslProblem& prob);

/// Voltage recovery from a near-optimal dual circulation: inverts
/// (Bx)_e = sign(f_e) (|f_e|/p)^{q-1} along a BFS tree from the labeled
/// set; inconsistent inversions fall back to a least-squares fit over all
/// edges with the labels pinned.
Vector ssl_recover_voltages(const SslProblem& prob, const SslDual& dual,
                            const FlowVector& dual_flow);

/// Primal objective sum_e |x_u - x_v|^p.
double ssl_primal_objective(const SslProblem& prob, const Vector& x);

struct MwuConfig {
  double inner_accuracy_multiplier = 0.01;
  int max_iterations = 2500;  // cap on the width-based schedule rho log(m)/eps^2
  RecursionConfig solver;
};

struct MwuResult {
  FlowVector flow;        // averaged, scaled to congestion <= 1
  int value = 0;          // largest feasible integral value found
  double width_bound = 0.0;
  int iterations = 0;
  bool width_clipped = false;
};

/// Approximate unit-capacity max flow by multiplicative weights over the
/// smoothed oracle sum r_e f_e^2 + (eps ||r||_1 / m) |f_e|^p. p defaults to
/// ceil(log^{0.1} n) clamped to [2, 32] when passed as 0.
MwuResult mwu_maxflow(int vertex_count, const std::vector<Edge>& edges, int s,
                      int t, double eps, double p = 0.0,
                      const MwuConfig& cfg = {});

}  // namespace pnf
