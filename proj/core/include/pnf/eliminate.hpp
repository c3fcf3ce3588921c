#pragma once

#include <vector>

#include "pnf/flow_map.hpp"
#include "pnf/instance.hpp"

namespace pnf {

/// Result of repeatedly removing non-selfloop degree-1 vertices and
/// contracting maximal degree-2 paths (cycles hanging off a single vertex
/// become self-loops there). The map sends circulations on the reduced
/// instance to circulations on the original with equal residues: contracted
/// edges spread their flow along the original path, pendant edges get zero.
struct EliminationResult {
  Instance reduced;
  FlowMap map_to_original;   // reduced edge space -> original edge space
  double kappa_elim = 1.0;   // |V|^{1/(p-1)}
};

EliminationResult eliminate(const Instance& inst);

/// Splits an instance into its non-selfloop part and its self-loops-only
/// part; the union of the two reconstructs the original edge set.
struct LoopSplit {
  Instance loop_free;
  Instance loops;
  std::vector<int> loop_free_index;  // loop_free edge -> original edge
  std::vector<int> loop_index;       // loops edge -> original edge
};

LoopSplit remove_loops(const Instance& inst);

/// Per-loop 1-D maximization of g f - r f^2 - s |f|^p to relative accuracy
/// delta/p via the bracketing z = min{g/(2r), (g/(p s))^{1/(p-1)}} and binary
/// search on [z/2, z]. Requires delta in (0, 1/p].
FlowVector solve_loops(const Instance& loops, double delta);

}  // namespace pnf
