#pragma once

#include <cstdint>
#include <vector>

#include "pnf/instance.hpp"

namespace pnf {

struct GeneratedGraph {
  int vertex_count = 0;
  std::vector<Edge> edges;
};

/// rows x cols 4-neighbor grid.
GeneratedGraph make_grid(int rows, int cols);

/// Random d-regular multigraph via the configuration model, resampled until
/// simple and connected (n*d must be even).
GeneratedGraph make_random_regular(int n, int d, uint64_t seed);

/// `count` cliques of size `clique_size`, consecutive cliques joined by a
/// single bridge edge.
GeneratedGraph make_cliques_with_bridges(int clique_size, int count);

/// Uniform random recursive tree: vertex i attaches to a uniform j < i.
GeneratedGraph make_recursive_tree(int n, uint64_t seed);

/// Connected Erdos-Renyi-style graph: a random spanning tree plus extra
/// uniform edges up to m total (m >= n-1).
GeneratedGraph make_random_connected(int n, int m, uint64_t seed);

/// Random instance on the given graph: g uniform in [-1,1], r uniform in
/// [0.1, 1.1], s uniform scalar in [0.1, 1.1].
Instance make_random_instance(const GeneratedGraph& g, double p, uint64_t seed);

/// Balanced random demand vector supported on all vertices.
DemandVector make_random_demand(int n, uint64_t seed);

}  // namespace pnf
