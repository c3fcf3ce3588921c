#include "pnf/portal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pnf/errors.hpp"

namespace pnf {

std::vector<int> find_portal(const SpanningTree& tree,
                             const std::vector<int>& off_edges, int nhat) {
  const int n = tree.vertex_count();
  if (nhat < 1 || nhat > static_cast<int>(off_edges.size()))
    throw ShapeError("find_portal: nhat must lie in [1, |E|]");

  std::vector<double> eta(off_edges.size(), 0.0);
  double total = 0.0;
  for (size_t i = 0; i < off_edges.size(); ++i) {
    eta[i] = tree.stretch(off_edges[i]);
    total += eta[i];
  }
  const double avg = total / static_cast<double>(off_edges.size());
  double eta_sum = 0.0;
  for (double& x : eta) {
    x = std::max(x, avg);
    eta_sum += x;
  }
  if (eta_sum <= 0.0) return {};
  const double threshold = 2.0 * eta_sum / static_cast<double>(nhat);

  // Per-vertex attached mass: each off-tree edge deposits eta at each
  // non-selfloop endpoint.
  std::vector<double> mass(static_cast<size_t>(n), 0.0);
  for (size_t i = 0; i < off_edges.size(); ++i) {
    const Edge& e = tree.edges()[static_cast<size_t>(off_edges[i])];
    if (e.self_loop()) continue;
    mass[static_cast<size_t>(e.u)] += eta[i];
    mass[static_cast<size_t>(e.v)] += eta[i];
  }

  // Bottom-up accumulation in decreasing depth order; a vertex whose
  // accumulated subtree mass reaches the threshold becomes a portal and its
  // mass stops propagating upward.
  std::vector<int> order(static_cast<size_t>(n));
  for (int v = 0; v < n; ++v) order[static_cast<size_t>(v)] = v;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return tree.depth(a) > tree.depth(b); });
  std::vector<int> portals;
  for (int v : order) {
    if (mass[static_cast<size_t>(v)] >= threshold &&
        static_cast<int>(portals.size()) < nhat) {
      portals.push_back(v);
      continue;
    }
    const int p = tree.parent(v);
    if (p >= 0) mass[static_cast<size_t>(p)] += mass[static_cast<size_t>(v)];
  }
  std::sort(portals.begin(), portals.end());
  return portals;
}

TreePortalRouting tree_portal_route(const Instance& inst,
                                    const SpanningTree& tree,
                                    const std::vector<int>& off_edges,
                                    const std::vector<int>& portals) {
  const int n = inst.vertex_count();
  const Eigen::Index m = inst.edge_count();
  if (!off_edges.empty()) {
    const double r0 = inst.resistance()[off_edges.front()];
    const double s0 = inst.s()[off_edges.front()];
    for (int ei : off_edges) {
      if (inst.resistance()[ei] != r0 || inst.s()[ei] != s0)
        throw ShapeError("tree_portal_route: bucket has non-uniform r or s");
      if (tree.in_tree(ei))
        throw ShapeError("tree_portal_route: bucket contains a tree edge");
    }
  }

  TreePortalRouting out;
  out.portals = portals;
  out.is_portal.assign(static_cast<size_t>(n), 0);
  for (int v : portals) out.is_portal[static_cast<size_t>(v)] = 1;

  double r_floor = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m; ++i)
    if (inst.resistance()[i] > 0.0) r_floor = std::min(r_floor, inst.resistance()[i]);
  if (!std::isfinite(r_floor)) r_floor = 1.0;

  std::vector<char> in_bucket(static_cast<size_t>(m), 0);
  for (int ei : off_edges) in_bucket[static_cast<size_t>(ei)] = 1;

  std::vector<Eigen::Triplet<double>> fwd, rev;
  for (Eigen::Index i = 0; i < m; ++i)
    if (!in_bucket[static_cast<size_t>(i)]) {
      fwd.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
      rev.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
    }

  std::vector<Edge> routed_edges = inst.edges();
  Vector routed_g = inst.gradient();

  for (int ei : off_edges) {
    const Edge& e = inst.edge(ei);
    RoutedEdge re;
    re.orig = ei;
    if (e.self_loop()) {
      // Self-loops are already local; they route to themselves.
      re.image = e;
      re.g_routed = inst.gradient()[ei];
      out.edges.push_back(std::move(re));
      fwd.emplace_back(ei, ei, 1.0);
      rev.emplace_back(ei, ei, 1.0);
      continue;
    }

    // Nearest portals on the tree path from each side.
    const std::vector<int> path = tree.path_vertices(e.u, e.v);
    int uhat = -1, vhat = -1;
    for (int x : path)
      if (out.is_portal[static_cast<size_t>(x)]) {
        if (uhat < 0) uhat = x;
        vhat = x;
      }
    int anchor_u, anchor_v;
    if (uhat < 0) {
      re.portal_case = 0;
      anchor_u = anchor_v = e.v;
      re.image = {e.v, e.v};
    } else if (uhat == vhat) {
      re.portal_case = 1;
      anchor_u = anchor_v = uhat;
      re.image = {uhat, uhat};
    } else {
      re.portal_case = 2;
      anchor_u = uhat;
      anchor_v = vhat;
      re.image = {std::min(uhat, vhat), std::max(uhat, vhat)};
      re.image_sign = uhat < vhat ? 1.0 : -1.0;
    }

    double seg_r = 0.0, seg_g = 0.0;
    tree.for_each_path_edge(e.u, anchor_u, [&](int ti, double sign) {
      re.seg_u.push_back({ti, sign});
      seg_r += inst.resistance()[ti];
      seg_g += sign * inst.gradient()[ti];
    });
    tree.for_each_path_edge(anchor_v, e.v, [&](int ti, double sign) {
      re.seg_v.push_back({ti, sign});
      seg_r += inst.resistance()[ti];
      seg_g += sign * inst.gradient()[ti];
    });
    const double r_e = inst.resistance()[ei];
    re.stretch = seg_r / (r_e > 0.0 ? r_e : r_floor);
    // Unit flow along the tree-portal path must keep the gradient dot
    // product of the original edge.
    re.g_routed = re.image_sign * (inst.gradient()[ei] - seg_g);

    routed_edges[static_cast<size_t>(ei)] = re.image;
    routed_g[ei] = re.g_routed;

    // Forward: f_e -> image + both tree segments traversed u -> v.
    fwd.emplace_back(ei, ei, re.image_sign);
    for (auto [ti, sign] : re.seg_u) fwd.emplace_back(ti, ei, sign);
    for (auto [ti, sign] : re.seg_v) fwd.emplace_back(ti, ei, sign);
    // Reverse: image flow h -> original edge + both segments reversed.
    rev.emplace_back(ei, ei, re.image_sign);
    for (auto [ti, sign] : re.seg_u) rev.emplace_back(ti, ei, -sign * re.image_sign);
    for (auto [ti, sign] : re.seg_v) rev.emplace_back(ti, ei, -sign * re.image_sign);

    out.edges.push_back(std::move(re));
  }

  Eigen::SparseMatrix<double> fmat(m, m), rmat(m, m);
  fmat.setFromTriplets(fwd.begin(), fwd.end());
  rmat.setFromTriplets(rev.begin(), rev.end());
  out.forward = FlowMap::sparse(std::move(fmat), 1.0);
  out.reverse = FlowMap::sparse(std::move(rmat), 1.0);
  out.routed = Instance(n, std::move(routed_edges), std::move(routed_g),
                        inst.resistance(), inst.s(), inst.p());
  return out;
}

}  // namespace pnf
