#include "pnf/eliminate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "pnf/errors.hpp"

namespace pnf {

namespace {

struct WorkEdge {
  int u = 0, v = 0;
  double g = 0.0, r = 0.0, s = 0.0;
  std::vector<std::pair<int, double>> comp;  // (original edge, sign)
  bool alive = true;
};

std::vector<int> nonloop_degrees(int n, const std::vector<WorkEdge>& edges) {
  std::vector<int> deg(static_cast<size_t>(n), 0);
  for (const WorkEdge& e : edges) {
    if (!e.alive || e.u == e.v) continue;
    ++deg[static_cast<size_t>(e.u)];
    ++deg[static_cast<size_t>(e.v)];
  }
  return deg;
}

}  // namespace

EliminationResult eliminate(const Instance& inst) {
  const int n = inst.vertex_count();
  std::vector<WorkEdge> work;
  work.reserve(static_cast<size_t>(inst.edge_count()));
  for (int i = 0; i < inst.edge_count(); ++i) {
    WorkEdge e;
    e.u = inst.edge(i).u;
    e.v = inst.edge(i).v;
    e.g = inst.gradient()[i];
    e.r = inst.resistance()[i];
    e.s = inst.s()[i];
    e.comp = {{i, 1.0}};
    work.push_back(std::move(e));
  }

  bool changed = true;
  while (changed) {
    changed = false;

    // Pendant removal: a circulation is forced to zero on the only
    // non-selfloop edge at a degree-1 vertex.
    bool removed = true;
    while (removed) {
      removed = false;
      auto deg = nonloop_degrees(n, work);
      for (WorkEdge& e : work) {
        if (!e.alive || e.u == e.v) continue;
        if (deg[static_cast<size_t>(e.u)] == 1 ||
            deg[static_cast<size_t>(e.v)] == 1) {
          e.alive = false;
          --deg[static_cast<size_t>(e.u)];
          --deg[static_cast<size_t>(e.v)];
          removed = true;
          changed = true;
        }
      }
    }

    // Degree-2 path contraction.
    auto deg = nonloop_degrees(n, work);
    std::vector<std::vector<std::pair<int, int>>> inc(static_cast<size_t>(n));
    for (size_t i = 0; i < work.size(); ++i) {
      const WorkEdge& e = work[i];
      if (!e.alive || e.u == e.v) continue;
      inc[static_cast<size_t>(e.u)].push_back({e.v, static_cast<int>(i)});
      inc[static_cast<size_t>(e.v)].push_back({e.u, static_cast<int>(i)});
    }
    auto alive_incident = [&](int v, int skip_edge) {
      for (auto [w, ei] : inc[static_cast<size_t>(v)])
        if (ei != skip_edge && work[static_cast<size_t>(ei)].alive)
          return std::pair<int, int>{w, ei};
      return std::pair<int, int>{-1, -1};
    };

    std::vector<char> used(work.size(), 0);
    for (int start = 0; start < n; ++start) {
      if (deg[static_cast<size_t>(start)] != 2) continue;
      // Pick an unvisited incident edge to seed a maximal chain.
      int seed = -1;
      for (auto [w, ei] : inc[static_cast<size_t>(start)]) {
        (void)w;
        if (work[static_cast<size_t>(ei)].alive && !used[static_cast<size_t>(ei)]) {
          seed = ei;
          break;
        }
      }
      if (seed < 0) continue;

      // Walk in one direction to find an endpoint (or detect a cycle).
      auto walk = [&](int from, int via) {
        std::vector<int> chain_edges;
        std::vector<int> chain_verts = {from};
        int cur = from, edge = via;
        while (true) {
          chain_edges.push_back(edge);
          const WorkEdge& e = work[static_cast<size_t>(edge)];
          cur = (e.u == cur) ? e.v : e.u;
          chain_verts.push_back(cur);
          if (deg[static_cast<size_t>(cur)] != 2 || cur == from) break;
          auto [w, next] = alive_incident(cur, edge);
          (void)w;
          if (next < 0) break;
          edge = next;
        }
        return std::pair<std::vector<int>, std::vector<int>>{chain_edges,
                                                             chain_verts};
      };

      auto [edges_fwd, verts_fwd] = walk(start, seed);
      std::vector<int> chain_edges, chain_verts;
      const bool cycle = verts_fwd.back() == start;
      if (cycle) {
        chain_edges = edges_fwd;
        chain_verts = verts_fwd;
      } else {
        // Extend backwards from start through the other incident edge.
        auto [w, other] = alive_incident(start, seed);
        (void)w;
        if (other >= 0 && !used[static_cast<size_t>(other)]) {
          auto [edges_bwd, verts_bwd] = walk(start, other);
          std::reverse(edges_bwd.begin(), edges_bwd.end());
          std::reverse(verts_bwd.begin(), verts_bwd.end());
          chain_edges = std::move(edges_bwd);
          chain_verts = std::move(verts_bwd);
          chain_verts.pop_back();  // drops duplicate 'start'
        }
        chain_edges.insert(chain_edges.end(), edges_fwd.begin(), edges_fwd.end());
        chain_verts.insert(chain_verts.end(), verts_fwd.begin(), verts_fwd.end());
      }
      if (chain_edges.size() < 2) {
        used[static_cast<size_t>(seed)] = 1;
        continue;
      }
      bool reuse = false;
      for (int ei : chain_edges)
        if (used[static_cast<size_t>(ei)] || !work[static_cast<size_t>(ei)].alive)
          reuse = true;
      if (reuse) continue;

      // Contract the chain into one edge (or a self-loop for cycles).
      WorkEdge merged;
      merged.u = chain_verts.front();
      merged.v = chain_verts.back();
      if (cycle) {
        // Anchor isolated cycles at their lowest-index vertex.
        int anchor = *std::min_element(chain_verts.begin(), chain_verts.end() - 1);
        bool touches_rest = false;
        for (int v : chain_verts)
          if (deg[static_cast<size_t>(v)] != 2) touches_rest = true;
        if (!touches_rest) merged.u = merged.v = anchor;
      }
      merged.s = work[static_cast<size_t>(chain_edges[0])].s;
      for (size_t k = 0; k < chain_edges.size(); ++k) {
        WorkEdge& e = work[static_cast<size_t>(chain_edges[k])];
        const double sign = (e.u == chain_verts[k]) ? 1.0 : -1.0;
        merged.g += sign * e.g;
        merged.r += e.r;
        merged.s = std::min(merged.s, e.s);
        for (auto [oi, osign] : e.comp) merged.comp.push_back({oi, sign * osign});
        e.alive = false;
        used[static_cast<size_t>(chain_edges[k])] = 1;
      }
      if (cycle && merged.u == merged.v) {
        // Cycle contracted to a self-loop: the anchor loses two incidences.
        deg[static_cast<size_t>(merged.u)] = 0;
      }
      work.push_back(std::move(merged));
      used.push_back(1);
      changed = true;
      // Degrees of interior vertices dropped to zero; endpoints unchanged.
      for (size_t k = 1; k + 1 < chain_verts.size(); ++k)
        deg[static_cast<size_t>(chain_verts[k])] = 0;
    }
  }

  // Assemble the reduced instance with (min,max) orientation so the map
  // columns match the stored edge signs exactly.
  std::vector<Edge> edges;
  std::vector<double> g, r, s;
  std::vector<Eigen::Triplet<double>> trip;
  int col = 0;
  for (WorkEdge& e : work) {
    if (!e.alive) continue;
    double flip = 1.0;
    if (e.u > e.v) {
      std::swap(e.u, e.v);
      flip = -1.0;
    }
    edges.push_back({e.u, e.v});
    g.push_back(flip * e.g);
    r.push_back(e.r);
    s.push_back(e.s);
    for (auto [oi, sign] : e.comp) trip.emplace_back(oi, col, flip * sign);
    ++col;
  }

  EliminationResult out;
  out.reduced = Instance(
      n, std::move(edges), Eigen::Map<Vector>(g.data(), static_cast<Eigen::Index>(g.size())),
      Eigen::Map<Vector>(r.data(), static_cast<Eigen::Index>(r.size())),
      Eigen::Map<Vector>(s.data(), static_cast<Eigen::Index>(s.size())), inst.p());
  Eigen::SparseMatrix<double> a(inst.edge_count(), col);
  a.setFromTriplets(trip.begin(), trip.end());
  out.kappa_elim = std::pow(std::max(1, n), 1.0 / (inst.p() - 1.0));
  out.map_to_original = FlowMap::sparse(std::move(a), out.kappa_elim);
  return out;
}

LoopSplit remove_loops(const Instance& inst) {
  std::vector<Edge> free_edges, loop_edges;
  std::vector<double> fg, fr, fs, lg, lr, ls;
  LoopSplit out;
  for (int i = 0; i < inst.edge_count(); ++i) {
    const Edge& e = inst.edge(i);
    if (e.self_loop()) {
      loop_edges.push_back(e);
      lg.push_back(inst.gradient()[i]);
      lr.push_back(inst.resistance()[i]);
      ls.push_back(inst.s()[i]);
      out.loop_index.push_back(i);
    } else {
      free_edges.push_back(e);
      fg.push_back(inst.gradient()[i]);
      fr.push_back(inst.resistance()[i]);
      fs.push_back(inst.s()[i]);
      out.loop_free_index.push_back(i);
    }
  }
  auto vec = [](std::vector<double>& v) {
    return Vector(Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  out.loop_free = Instance(inst.vertex_count(), std::move(free_edges), vec(fg),
                           vec(fr), vec(fs), inst.p());
  out.loops = Instance(inst.vertex_count(), std::move(loop_edges), vec(lg),
                       vec(lr), vec(ls), inst.p());
  return out;
}

FlowVector solve_loops(const Instance& loops, double delta) {
  const double p = loops.p();
  if (!(delta > 0.0 && delta <= 1.0 / p))
    throw ShapeError("solve_loops: delta must lie in (0, 1/p]");
  FlowVector f = FlowVector::Zero(loops.edge_count());
  const int iters =
      static_cast<int>(std::ceil(std::log2(p / delta))) + 4;
  for (int i = 0; i < loops.edge_count(); ++i) {
    if (!loops.edge(i).self_loop())
      throw ShapeError("solve_loops: instance has a non-selfloop edge");
    const double g = loops.gradient()[i];
    const double r = loops.resistance()[i];
    const double s = loops.s()[i];
    const double a = std::abs(g);
    if (a == 0.0) continue;
    double z = std::numeric_limits<double>::infinity();
    if (r > 0.0) z = std::min(z, a / (2.0 * r));
    if (s > 0.0) z = std::min(z, std::pow(a / (p * s), 1.0 / (p - 1.0)));
    if (!std::isfinite(z))
      throw ShapeError("solve_loops: loop with zero r and s but nonzero g");
    // The optimum has the sign of g and lies in [z/2, z]; the derivative
    // a - 2 r x - p s x^{p-1} is decreasing, so bisect on it.
    double lo = 0.5 * z, hi = z;
    for (int it = 0; it < iters; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double d = a - 2.0 * r * mid - p * s * std::pow(mid, p - 1.0);
      if (d > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    const double x = 0.5 * (lo + hi);
    f[i] = g > 0.0 ? x : -x;
  }
  return f;
}

}  // namespace pnf
