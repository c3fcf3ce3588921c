#include "pnf/spanning_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <random>

#include "pnf/errors.hpp"

namespace pnf {

SpanningTree::SpanningTree(int vertex_count, const std::vector<Edge>& edges,
                           const Vector& resistance, std::vector<int> tree_edges)
    : n_(vertex_count),
      edges_(edges),
      r_(resistance),
      tree_edges_(std::move(tree_edges)) {
  if (static_cast<Eigen::Index>(edges_.size()) != r_.size())
    throw ShapeError("SpanningTree: resistance size mismatch");
  in_tree_.assign(edges_.size(), 0);
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<size_t>(n_));
  for (int ti : tree_edges_) {
    const Edge& e = edges_[static_cast<size_t>(ti)];
    if (e.self_loop()) throw ShapeError("SpanningTree: self-loop tree edge");
    in_tree_[static_cast<size_t>(ti)] = 1;
    adj[static_cast<size_t>(e.u)].push_back({e.v, ti});
    adj[static_cast<size_t>(e.v)].push_back({e.u, ti});
  }
  if (static_cast<int>(tree_edges_.size()) != n_ - 1)
    throw ShapeError("SpanningTree: wrong number of tree edges");

  parent_.assign(static_cast<size_t>(n_), -1);
  parent_edge_.assign(static_cast<size_t>(n_), -1);
  depth_.assign(static_cast<size_t>(n_), 0);
  dist_r_.assign(static_cast<size_t>(n_), 0.0);
  std::vector<char> seen(static_cast<size_t>(n_), 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int reached = 0;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    ++reached;
    for (auto [v, ei] : adj[static_cast<size_t>(u)]) {
      if (seen[static_cast<size_t>(v)]) continue;
      seen[static_cast<size_t>(v)] = 1;
      parent_[static_cast<size_t>(v)] = u;
      parent_edge_[static_cast<size_t>(v)] = ei;
      depth_[static_cast<size_t>(v)] = depth_[static_cast<size_t>(u)] + 1;
      dist_r_[static_cast<size_t>(v)] = dist_r_[static_cast<size_t>(u)] + r_[ei];
      q.push(v);
    }
  }
  if (reached != n_) throw ShapeError("SpanningTree: edges do not span");

  int levels = 1;
  while ((1 << levels) < std::max(2, n_)) ++levels;
  up_.assign(static_cast<size_t>(levels), std::vector<int>(static_cast<size_t>(n_), -1));
  for (int v = 0; v < n_; ++v) up_[0][static_cast<size_t>(v)] = parent_[static_cast<size_t>(v)];
  for (int k = 1; k < levels; ++k)
    for (int v = 0; v < n_; ++v) {
      const int mid = up_[static_cast<size_t>(k - 1)][static_cast<size_t>(v)];
      up_[static_cast<size_t>(k)][static_cast<size_t>(v)] =
          mid < 0 ? -1 : up_[static_cast<size_t>(k - 1)][static_cast<size_t>(mid)];
    }

  double floor = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < r_.size(); ++i)
    if (r_[i] > 0.0) floor = std::min(floor, r_[i]);
  r_floor_ = std::isfinite(floor) ? floor : 1.0;
}

int SpanningTree::ancestor_at_depth(int u, int d) const {
  int diff = depth_[static_cast<size_t>(u)] - d;
  for (int k = 0; diff > 0; ++k, diff >>= 1)
    if (diff & 1) u = up_[static_cast<size_t>(k)][static_cast<size_t>(u)];
  return u;
}

int SpanningTree::lca(int u, int v) const {
  const int d = std::min(depth_[static_cast<size_t>(u)], depth_[static_cast<size_t>(v)]);
  u = ancestor_at_depth(u, d);
  v = ancestor_at_depth(v, d);
  if (u == v) return u;
  for (int k = static_cast<int>(up_.size()) - 1; k >= 0; --k) {
    const int au = up_[static_cast<size_t>(k)][static_cast<size_t>(u)];
    const int av = up_[static_cast<size_t>(k)][static_cast<size_t>(v)];
    if (au != av) {
      u = au;
      v = av;
    }
  }
  return parent_[static_cast<size_t>(u)];
}

double SpanningTree::path_resistance(int u, int v) const {
  const int a = lca(u, v);
  return dist_r_[static_cast<size_t>(u)] + dist_r_[static_cast<size_t>(v)] -
         2.0 * dist_r_[static_cast<size_t>(a)];
}

int SpanningTree::path_length(int u, int v) const {
  const int a = lca(u, v);
  return depth_[static_cast<size_t>(u)] + depth_[static_cast<size_t>(v)] -
         2 * depth_[static_cast<size_t>(a)];
}

void SpanningTree::for_each_path_edge(
    int u, int v, const std::function<void(int, double)>& fn) const {
  const int a = lca(u, v);
  // Ascend from u to the lca: each parent edge is traversed child -> parent.
  for (int x = u; x != a; x = parent_[static_cast<size_t>(x)]) {
    const int ei = parent_edge_[static_cast<size_t>(x)];
    const Edge& e = edges_[static_cast<size_t>(ei)];
    fn(ei, e.u == x ? 1.0 : -1.0);
  }
  // Descend from the lca to v: collect then emit in path order.
  std::vector<int> down;
  for (int x = v; x != a; x = parent_[static_cast<size_t>(x)])
    down.push_back(x);
  for (auto it = down.rbegin(); it != down.rend(); ++it) {
    const int ei = parent_edge_[static_cast<size_t>(*it)];
    const Edge& e = edges_[static_cast<size_t>(ei)];
    fn(ei, e.v == *it ? 1.0 : -1.0);
  }
}

std::vector<int> SpanningTree::path_vertices(int u, int v) const {
  const int a = lca(u, v);
  std::vector<int> out;
  for (int x = u; x != a; x = parent_[static_cast<size_t>(x)]) out.push_back(x);
  out.push_back(a);
  std::vector<int> down;
  for (int x = v; x != a; x = parent_[static_cast<size_t>(x)]) down.push_back(x);
  out.insert(out.end(), down.rbegin(), down.rend());
  return out;
}

double SpanningTree::stretch(int edge_index) const {
  if (in_tree_[static_cast<size_t>(edge_index)]) return 1.0;
  const Edge& e = edges_[static_cast<size_t>(edge_index)];
  if (e.self_loop()) return 0.0;
  const double path = path_resistance(e.u, e.v);
  const double re = r_[edge_index];
  if (re > 0.0) return path / re;
  return path == 0.0 ? 1.0 : path / r_floor_;
}

double SpanningTree::total_stretch() const {
  double total = 0.0;
  for (size_t i = 0; i < edges_.size(); ++i)
    total += stretch(static_cast<int>(i));
  return total;
}

namespace {

struct Dsu {
  std::vector<int> parent, rank_;
  explicit Dsu(int n) : parent(static_cast<size_t>(n)), rank_(static_cast<size_t>(n), 0) {
    for (int i = 0; i < n; ++i) parent[static_cast<size_t>(i)] = i;
  }
  int find(int x) {
    while (parent[static_cast<size_t>(x)] != x) {
      parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
      x = parent[static_cast<size_t>(x)];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[static_cast<size_t>(a)] < rank_[static_cast<size_t>(b)]) std::swap(a, b);
    parent[static_cast<size_t>(b)] = a;
    if (rank_[static_cast<size_t>(a)] == rank_[static_cast<size_t>(b)]) ++rank_[static_cast<size_t>(a)];
    return true;
  }
};

// Shortest-path tree from `root` w.r.t. resistances as lengths.
std::vector<int> shortest_path_tree(int n, const std::vector<Edge>& edges,
                                    const Vector& r, int root) {
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<size_t>(n));
  for (size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].self_loop()) continue;
    adj[static_cast<size_t>(edges[i].u)].push_back({edges[i].v, static_cast<int>(i)});
    adj[static_cast<size_t>(edges[i].v)].push_back({edges[i].u, static_cast<int>(i)});
  }
  std::vector<double> dist(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<int> via(static_cast<size_t>(n), -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[static_cast<size_t>(root)] = 0.0;
  pq.push({0.0, root});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[static_cast<size_t>(u)]) continue;
    for (auto [v, ei] : adj[static_cast<size_t>(u)]) {
      const double nd = d + r[ei];
      if (nd < dist[static_cast<size_t>(v)]) {
        dist[static_cast<size_t>(v)] = nd;
        via[static_cast<size_t>(v)] = ei;
        pq.push({nd, v});
      }
    }
  }
  std::vector<int> tree;
  for (int v = 0; v < n; ++v) {
    if (v == root) continue;
    if (via[static_cast<size_t>(v)] < 0)
      throw ShapeError("lsst: graph is disconnected");
    tree.push_back(via[static_cast<size_t>(v)]);
  }
  return tree;
}

// AKPW-flavoured forest growth: process edges by length class; within a
// class, grow random-radius balls over the current cluster graph and keep
// the BFS edges.
std::vector<int> cluster_merge_tree(int n, const std::vector<Edge>& edges,
                                    const Vector& r, std::mt19937_64& rng) {
  std::vector<int> order(edges.size());
  for (size_t i = 0; i < edges.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return r[a] < r[b]; });

  Dsu dsu(n);
  std::vector<int> tree;
  size_t pos = 0;
  while (pos < order.size() && static_cast<int>(tree.size()) < n - 1) {
    // Skip intra-cluster / self-loop edges.
    while (pos < order.size()) {
      const Edge& e = edges[static_cast<size_t>(order[pos])];
      if (!e.self_loop() && dsu.find(e.u) != dsu.find(e.v)) break;
      ++pos;
    }
    if (pos >= order.size()) break;
    const double base = r[order[pos]];
    const double limit = base == 0.0 ? 0.0 : 4.0 * base;
    std::vector<int> active;
    for (size_t k = pos; k < order.size(); ++k) {
      const int ei = order[k];
      if (r[ei] > limit) break;
      const Edge& e = edges[static_cast<size_t>(ei)];
      if (!e.self_loop() && dsu.find(e.u) != dsu.find(e.v)) active.push_back(ei);
    }

    // Cluster graph over representatives.
    std::vector<std::vector<std::pair<int, int>>> cadj(static_cast<size_t>(n));
    for (int ei : active) {
      const Edge& e = edges[static_cast<size_t>(ei)];
      const int a = dsu.find(e.u), b = dsu.find(e.v);
      cadj[static_cast<size_t>(a)].push_back({b, ei});
      cadj[static_cast<size_t>(b)].push_back({a, ei});
    }
    std::vector<int> reps;
    for (int ei : active) {
      reps.push_back(dsu.find(edges[static_cast<size_t>(ei)].u));
      reps.push_back(dsu.find(edges[static_cast<size_t>(ei)].v));
    }
    std::sort(reps.begin(), reps.end());
    reps.erase(std::unique(reps.begin(), reps.end()), reps.end());
    std::shuffle(reps.begin(), reps.end(), rng);

    std::vector<char> grabbed(static_cast<size_t>(n), 0);
    std::geometric_distribution<int> radius_dist(0.5);
    for (int root : reps) {
      if (grabbed[static_cast<size_t>(root)]) continue;
      const int radius = 1 + radius_dist(rng);
      std::queue<std::pair<int, int>> q;  // (cluster rep, hops)
      q.push({root, 0});
      grabbed[static_cast<size_t>(root)] = 1;
      while (!q.empty()) {
        auto [c, h] = q.front();
        q.pop();
        if (h >= radius) continue;
        for (auto [d, ei] : cadj[static_cast<size_t>(c)]) {
          if (grabbed[static_cast<size_t>(d)]) continue;
          const Edge& e = edges[static_cast<size_t>(ei)];
          if (dsu.find(e.u) == dsu.find(e.v)) continue;
          grabbed[static_cast<size_t>(d)] = 1;
          dsu.unite(e.u, e.v);
          tree.push_back(ei);
          q.push({d, h + 1});
        }
      }
    }
  }
  if (static_cast<int>(tree.size()) != n - 1)
    throw ShapeError("lsst: graph is disconnected");
  return tree;
}

}  // namespace

LsstResult lsst(int vertex_count, const std::vector<Edge>& edges,
                const Vector& resistance, uint64_t seed) {
  if (vertex_count <= 0) throw ShapeError("lsst: empty vertex set");
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);

  std::vector<std::vector<int>> candidates;
  candidates.push_back(cluster_merge_tree(vertex_count, edges, resistance, rng));
  candidates.push_back(shortest_path_tree(vertex_count, edges, resistance, 0));
  if (vertex_count > 2) {
    std::uniform_int_distribution<int> pick(1, vertex_count - 1);
    candidates.push_back(shortest_path_tree(vertex_count, edges, resistance, pick(rng)));
  }

  LsstResult best;
  double best_total = std::numeric_limits<double>::infinity();
  for (auto& tree : candidates) {
    SpanningTree st(vertex_count, edges, resistance, tree);
    const double total = st.total_stretch();
    if (total < best_total) {
      best_total = total;
      best.tree_edges = std::move(tree);
    }
  }
  best.total_stretch = best_total;
  best.average_stretch =
      edges.empty() ? 0.0 : best_total / static_cast<double>(edges.size());
  return best;
}

}  // namespace pnf
