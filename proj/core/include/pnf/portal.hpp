#pragma once

#include <vector>

#include "pnf/flow_map.hpp"
#include "pnf/instance.hpp"
#include "pnf/spanning_tree.hpp"

namespace pnf {

/// Selects up to `nhat` portal vertices for the given off-tree edges by the
/// Spielman-Teng tree decomposition: eta(e) = max(stretch(e), avg stretch);
/// subtrees are cut off bottom-up whenever their attached eta mass reaches
/// 2*sum(eta)/nhat, and the cut vertices become portals.
std::vector<int> find_portal(const SpanningTree& tree,
                             const std::vector<int>& off_edges, int nhat);

/// One off-tree edge after tree-portal moving. The image is either a real
/// edge between the two nearest portals or a self-loop at an anchor vertex;
/// seg_u is the tree path u -> anchor(u-side), seg_v the path
/// anchor(v-side) -> v, both as (tree edge index, traversal sign).
struct RoutedEdge {
  int orig = -1;
  Edge image{0, 0};
  double image_sign = 1.0;  // flow f_e appears as image_sign*f_e on the image
  int portal_case = 0;      // number of distinct portal anchors seen: 0, 1, 2
  double g_routed = 0.0;    // gradient on the image, normalized orientation
  double stretch = 0.0;
  std::vector<std::pair<int, double>> seg_u;
  std::vector<std::pair<int, double>> seg_v;
};

struct TreePortalRouting {
  std::vector<int> portals;
  std::vector<char> is_portal;
  std::vector<RoutedEdge> edges;  // one per routed off-tree edge
  /// Both maps act on the full edge index space of the source instance:
  /// routed edges are replaced in place by their images, everything else is
  /// untouched. forward reroutes bucket flow onto tree-portal paths; reverse
  /// routes image flow back along the same paths.
  FlowMap forward;
  FlowMap reverse;
  /// Source instance with the bucket edges replaced by their images
  /// (g = g_routed, r and s copied from the originals).
  Instance routed;
};

/// Routes the off-tree edges `off_edges` (which must share one r value and
/// one s value) through the tree-portal paths defined by `portals`. The
/// image gradients preserve the unit-flow gradient dot product.
TreePortalRouting tree_portal_route(const Instance& inst,
                                    const SpanningTree& tree,
                                    const std::vector<int>& off_edges,
                                    const std::vector<int>& portals);

}  // namespace pnf
