#pragma once

#include <vector>

#include "pnf/instance.hpp"

namespace pnf {

struct OracleResult {
  FlowVector flow;
  double objective = 0.0;
  double kkt_residual = 0.0;  // cycle-space norm of g - grad h at the flow
  int iterations = 0;
  bool converged = false;
};

/// Reference convex solver, independent of the production path: routes the
/// demand along a spanning forest, parametrizes the feasible set by
/// fundamental cycles, and runs damped Newton on the resulting
/// unconstrained concave maximization (dense linear algebra throughout).
OracleResult reference_solve(const Instance& inst, const DemandVector& b,
                             double tol = 1e-10);

/// Exact unit-capacity undirected max s-t flow via BFS augmenting paths.
int exact_maxflow(int vertex_count, const std::vector<Edge>& edges, int s,
                  int t);

}  // namespace pnf
