#pragma once

#include <random>
#include <vector>

#include "pnf/flow_map.hpp"
#include "pnf/instance.hpp"

namespace pnf {

struct SampleConfig {
  double c_sample = 1.0;
  int max_resamples = 5;
  double kappa_sample = 4.0;  // kappa charged to each sampling stage
};

struct SampleResult {
  Instance sampled;            // same vertex set, sampled edges only
  std::vector<int> edge_index; // sampled edge -> source edge index
  FlowMap to_sampled;          // source edge space -> sampled edge space
  FlowMap to_source;           // sampled edge space -> source edge space
  bool kept_unsampled = false; // all resamples disconnected the piece
  int resamples = 0;
  Vector ghat_source;          // cycle projection of the source gradient
  Vector ghat_sampled;         // cycle projection of its restriction
};

/// Uniformly samples the edges of an expander piece with probability tau,
/// scales r by tau and s by tau^p, and rebuilds the gradient so its
/// potential part is shared and its cycle part is re-projected. The two
/// maps are the electrical + cycle-gradient reconstructions; both preserve
/// residues. A sample that disconnects the piece's vertex set is redrawn
/// up to max_resamples times, after which the piece is kept unsampled.
SampleResult sample_and_fix_gradient(const Instance& piece, double tau,
                                     std::mt19937_64& rng,
                                     const SampleConfig& cfg = {});

}  // namespace pnf
