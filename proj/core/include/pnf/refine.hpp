#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pnf/instance.hpp"

namespace pnf {

/// Circulation instance whose approximate maximizers improve a base point on
/// the source instance:
///   g' = 2^p (g - grad h_p(r,s,.)|_{f0}),   r' = r + s |f0|^{p-2}.
struct ResidualProblem {
  Instance instance;   // circulation problem (demand is zero)
  FlowVector base_point;
};

ResidualProblem build_residual(const Instance& inst, const FlowVector& f0);

/// f0 + 2^{-3p} delta; residues are unchanged when delta is a circulation.
FlowVector apply_update(const FlowVector& f0, const FlowVector& delta,
                        double p);

struct RefineIterate {
  double objective = 0.0;
  double residual_objective = 0.0;
  double step = 0.0;       // chosen step length lambda
  bool accepted = false;
  double elapsed_ms = 0.0;
};

struct RefineResult {
  FlowVector flow;
  std::vector<RefineIterate> trajectory;
  double gap_certificate = 0.0;  // last accepted residual objective
  bool converged = false;
  std::string stop_reason;
};

/// Inner solver contract: approximately maximizes a circulation instance
/// (objective >= 0 is always feasible via the zero circulation).
using InnerSolver = std::function<FlowVector(const Instance&)>;

struct RefineOptions {
  double gap_target = 1e-9;
  int max_iters = 200;
  bool line_search = true;  // search lambda in {2^{-3p}, ..., 1}
};

/// Outer refinement loop: build residual -> inner solve -> damped update,
/// until the achieved residual objective falls below gap_target. Steps with
/// negative residual objective are rejected and recorded.
RefineResult refine_loop(const Instance& inst, const DemandVector& b,
                         const FlowVector& f0, const InnerSolver& inner,
                         const RefineOptions& opts = {});

}  // namespace pnf
