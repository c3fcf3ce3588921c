#pragma once

#include <cstdint>
#include <vector>

#include "pnf/flow_map.hpp"
#include "pnf/instance.hpp"

namespace pnf {

struct UltraSparsifyConfig {
  double c1 = 1.0;           // tau = c1 * m * log^{c2} n / (kappa * m_ri)
  double c2 = 1.0;
  double c_sample = 1.0;
  double c_partition = 1.0;
  double delta_exponent = 5.0;  // Decompose receives delta / m^exponent
  double kappa_sample = 4.0;    // kappa charged per sampling stage
  bool cap_tau_to_budget = true;  // additionally bound expected sample size by m/kappa
  int extra_bucket_iters = 4;     // per-bucket cap = ceil(log2 m) + this
  uint64_t seed = 0;
};

struct UltraSparsifyStats {
  int bucket_count = 0;
  std::vector<int> iterations_per_bucket;
  int tree_edges = 0;
  int input_self_loops = 0;
  int routed_self_loops = 0;
  int sampled_edges = 0;
  int leftover_edges = 0;
  double lsst_total_stretch = 0.0;
  double max_congestion_l2 = 0.0;  // measured A_2 over all routing rounds
  double max_congestion_lp = 0.0;  // measured A_p
  double kappa_scale = 1.0;
  double kappa_route = 1.0;
};

struct UltraSparsifierOutput {
  Instance sparsified;
  FlowMap map_to_sparse;   // source edge space -> sparsified edge space
  FlowMap map_to_source;   // sparsified edge space -> source edge space
  double kappa_forward = 1.0;
  double kappa_backward = 1.0;
  UltraSparsifyStats stats;
};

/// Full ultra-sparsification pipeline: low-stretch spanning tree, power-of-2
/// resistance rounding of off-tree edges (0 below delta), then per
/// (r, s)-bucket iterations of portal selection, tree-portal routing,
/// decomposition into uniform expanders and expander sampling, until each
/// bucket is below the m/kappa off-tree budget. The sparsified instance is
/// the tree plus self-loops, leftovers and sampled expander edges; both
/// maps preserve residues.
UltraSparsifierOutput ultra_sparsify(const Instance& inst, double kappa,
                                     double delta,
                                     const UltraSparsifyConfig& cfg = {});

}  // namespace pnf
