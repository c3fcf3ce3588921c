#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pnf/instance.hpp"
#include "pnf/ultrasparsify.hpp"

namespace pnf {

struct RecursionConfig {
  double kappa = 0.0;   // <= 1 means auto: max(2, m^{1/sqrt(p-1)})
  double delta = 1e-9;  // additive error budget
  int max_outer_iters = 20;
  int base_case_edge_threshold = 64;
  int recursion_depth_limit = 10;
  int fallback_edge_threshold = 600;  // direct solve rescue for stalled steps
  double base_tol = 1e-10;
  UltraSparsifyConfig sparsify;
  uint64_t seed = 0;
};

struct LevelStats {
  int depth = 0;
  int vertices = 0;
  int edges = 0;
  int child_edges = 0;
  double elapsed_ms = 0.0;
};

struct SolveReport {
  std::vector<double> objectives;            // after each outer iteration
  std::vector<double> residual_objectives;   // inner certificate per iteration
  std::vector<double> iter_elapsed_ms;       // cumulative wall time per iteration
  std::vector<char> accepted;
  std::vector<LevelStats> levels;
  int map_applications = 0;
  int base_case_calls = 0;
  int fallback_steps = 0;
  double gap_certificate = 0.0;
  double kappa_used = 0.0;
  double delta_used = 0.0;
  uint64_t seed = 0;
  bool converged = false;
  std::string stop_reason;
};

/// Direct equality-constrained solver for small instances: damped Newton on
/// the edge flows with a dense KKT system, projected-gradient fallback.
/// Returns a flow with residues b whose cycle-space gradient norm is below
/// tol * (1 + ||g||).
FlowVector base_case_solve(const Instance& inst, const DemandVector& b,
                           double tol = 1e-10);

/// Algorithm: iterate residual construction, ultra-sparsification,
/// elimination, loop solving and recursion, mapping the child solution back
/// and taking a damped step. Returns a flow with residues b.
std::pair<FlowVector, SolveReport> recursive_preconditioning(
    const Instance& inst, const DemandVector& b, const FlowVector& f0,
    const RecursionConfig& cfg = {});

/// p-norm minimizing flow: min ||f||_p^p subject to residues b, to relative
/// accuracy 3 m^{-c}. Internally maximizes -||f||_p^p via the smoothed
/// machinery with g = 0, r = 0, s = 1.
std::pair<FlowVector, SolveReport> pflows(int vertex_count,
                                          const std::vector<Edge>& edges,
                                          const DemandVector& b, double p,
                                          double c,
                                          const RecursionConfig& cfg = {});

/// Top-level smoothed-objective solver (maximization convention): repeats
/// recursive preconditioning with warm starts until the gap certificate is
/// below `accuracy`.
std::pair<FlowVector, SolveReport> solve_smoothed(const Instance& inst,
                                                  const DemandVector& b,
                                                  const FlowVector& f0,
                                                  double accuracy,
                                                  const RecursionConfig& cfg = {});

}  // namespace pnf
