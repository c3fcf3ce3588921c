#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pnf/instance.hpp"

namespace pnf {

/// Rooted spanning tree over an edge multiset, with LCA access, resistance
/// path sums and stretch bookkeeping. Tree paths are enumerated as signed
/// original edge indices: sign +1 means the edge is traversed from its
/// stored (min,max) orientation's tail to head.
class SpanningTree {
 public:
  SpanningTree() = default;
  SpanningTree(int vertex_count, const std::vector<Edge>& edges,
               const Vector& resistance, std::vector<int> tree_edges);

  int vertex_count() const { return n_; }
  const std::vector<int>& tree_edges() const { return tree_edges_; }
  bool in_tree(int edge_index) const { return in_tree_[static_cast<size_t>(edge_index)]; }

  int parent(int v) const { return parent_[static_cast<size_t>(v)]; }
  int parent_edge(int v) const { return parent_edge_[static_cast<size_t>(v)]; }
  int depth(int v) const { return depth_[static_cast<size_t>(v)]; }
  const std::vector<Edge>& edges() const { return edges_; }

  int lca(int u, int v) const;
  /// Sum of resistances along the tree path u..v.
  double path_resistance(int u, int v) const;
  int path_length(int u, int v) const;
  /// Visits tree path edges from u to v as (edge index, traversal sign).
  void for_each_path_edge(int u, int v,
                          const std::function<void(int, double)>& fn) const;
  /// Vertices along the tree path from u to v, inclusive.
  std::vector<int> path_vertices(int u, int v) const;

  /// Stretch of edge e w.r.t. the bare tree (no portals): tree edges have
  /// stretch 1, off-tree edges path_resistance/r_e. Edges with r_e = 0 use
  /// the smallest positive resistance as the denominator floor.
  double stretch(int edge_index) const;
  double total_stretch() const;

 private:
  int ancestor_at_depth(int u, int d) const;

  int n_ = 0;
  std::vector<Edge> edges_;
  Vector r_;
  std::vector<int> tree_edges_;
  std::vector<char> in_tree_;
  std::vector<int> parent_;       // parent vertex, -1 at root
  std::vector<int> parent_edge_;  // edge index to parent
  std::vector<int> depth_;
  std::vector<double> dist_r_;    // resistance-weighted depth
  std::vector<std::vector<int>> up_;  // binary lifting table
  double r_floor_ = 1.0;
};

struct LsstResult {
  std::vector<int> tree_edges;
  double total_stretch = 0.0;
  double average_stretch = 0.0;
};

/// Low-stretch spanning tree w.r.t. resistances as lengths: AKPW-style
/// cluster merging with randomized ball growing, compared against
/// shortest-path trees from a few roots; the tree with the smaller measured
/// total stretch wins. Throws on disconnected input.
LsstResult lsst(int vertex_count, const std::vector<Edge>& edges,
                const Vector& resistance, uint64_t seed = 0);

}  // namespace pnf
