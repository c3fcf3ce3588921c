#include "pnf/oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <queue>

#include "pnf/errors.hpp"

namespace pnf {

namespace {

struct Forest {
  std::vector<int> parent, parent_edge, order;  // BFS forest over components
  std::vector<double> parent_sign;  // +1 if parent edge points child -> parent
};

Forest build_forest(int n, const std::vector<Edge>& edges) {
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<size_t>(n));
  for (size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].self_loop()) continue;
    adj[static_cast<size_t>(edges[i].u)].push_back({edges[i].v, static_cast<int>(i)});
    adj[static_cast<size_t>(edges[i].v)].push_back({edges[i].u, static_cast<int>(i)});
  }
  Forest f;
  f.parent.assign(static_cast<size_t>(n), -1);
  f.parent_edge.assign(static_cast<size_t>(n), -1);
  f.parent_sign.assign(static_cast<size_t>(n), 0.0);
  std::vector<char> seen(static_cast<size_t>(n), 0);
  for (int root = 0; root < n; ++root) {
    if (seen[static_cast<size_t>(root)]) continue;
    seen[static_cast<size_t>(root)] = 1;
    std::queue<int> q;
    q.push(root);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      f.order.push_back(u);
      for (auto [v, ei] : adj[static_cast<size_t>(u)]) {
        if (seen[static_cast<size_t>(v)]) continue;
        seen[static_cast<size_t>(v)] = 1;
        f.parent[static_cast<size_t>(v)] = u;
        f.parent_edge[static_cast<size_t>(v)] = ei;
        f.parent_sign[static_cast<size_t>(v)] =
            edges[static_cast<size_t>(ei)].u == v ? 1.0 : -1.0;
        q.push(v);
      }
    }
  }
  return f;
}

}  // namespace

OracleResult reference_solve(const Instance& inst, const DemandVector& b,
                             double tol) {
  const int n = inst.vertex_count();
  const int m = inst.edge_count();
  if (b.size() != n) throw ShapeError("reference_solve: demand size mismatch");
  const double p = inst.p();
  const auto& edges = inst.edges();
  const Forest forest = build_forest(n, edges);

  // Particular solution: push accumulated subtree demand across each parent
  // edge, leaves first.
  FlowVector f = FlowVector::Zero(m);
  {
    DemandVector need = b;
    for (auto it = forest.order.rbegin(); it != forest.order.rend(); ++it) {
      const int v = *it;
      const int pe = forest.parent_edge[static_cast<size_t>(v)];
      if (pe < 0) {
        if (std::abs(need[v]) > 1e-9 * (1.0 + b.cwiseAbs().maxCoeff()))
          throw InfeasibleDemand("reference_solve: demand does not balance");
        continue;
      }
      f[pe] += forest.parent_sign[static_cast<size_t>(v)] * need[v];
      need[forest.parent[static_cast<size_t>(v)]] += need[v];
      need[v] = 0.0;
    }
  }

  // Fundamental cycle basis: one column per off-forest edge (self-loops are
  // their own cycles).
  std::vector<char> in_forest(static_cast<size_t>(m), 0);
  for (int v = 0; v < n; ++v)
    if (forest.parent_edge[static_cast<size_t>(v)] >= 0)
      in_forest[static_cast<size_t>(forest.parent_edge[static_cast<size_t>(v)])] = 1;
  Eigen::MatrixXd C(m, 0);
  {
    std::vector<Eigen::VectorXd> cols;
    for (int i = 0; i < m; ++i) {
      if (in_forest[static_cast<size_t>(i)]) continue;
      Eigen::VectorXd col = Eigen::VectorXd::Zero(m);
      col[i] = 1.0;
      const Edge& e = edges[static_cast<size_t>(i)];
      if (!e.self_loop()) {
        // Close the cycle along forest paths v -> root and u -> root.
        for (int x = e.v; forest.parent[static_cast<size_t>(x)] >= 0;
             x = forest.parent[static_cast<size_t>(x)]) {
          col[forest.parent_edge[static_cast<size_t>(x)]] +=
              forest.parent_sign[static_cast<size_t>(x)];
        }
        for (int x = e.u; forest.parent[static_cast<size_t>(x)] >= 0;
             x = forest.parent[static_cast<size_t>(x)]) {
          col[forest.parent_edge[static_cast<size_t>(x)]] -=
              forest.parent_sign[static_cast<size_t>(x)];
        }
      }
      cols.push_back(std::move(col));
    }
    C.resize(m, static_cast<Eigen::Index>(cols.size()));
    for (size_t k = 0; k < cols.size(); ++k)
      C.col(static_cast<Eigen::Index>(k)) = cols[k];
  }

  auto grad_h = [&](const FlowVector& x) {
    Vector g(m);
    for (int i = 0; i < m; ++i)
      g[i] = smoothed_power_grad(inst.resistance()[i], inst.s()[i], x[i], p);
    return g;
  };
  auto hess_h = [&](const FlowVector& x) {
    Vector h(m);
    for (int i = 0; i < m; ++i) {
      const double a = std::abs(x[i]);
      h[i] = 2.0 * inst.resistance()[i] +
             p * (p - 1.0) * inst.s()[i] *
                 (a == 0.0 ? (p == 2.0 ? 1.0 : 0.0) : std::pow(a, p - 2.0));
    }
    return h;
  };

  // Cycle-space projection for the certificate, dense least squares on the
  // incidence matrix.
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, n);
  for (int i = 0; i < m; ++i) {
    const Edge& e = edges[static_cast<size_t>(i)];
    if (e.self_loop()) continue;
    B(i, e.u) = 1.0;
    B(i, e.v) = -1.0;
  }
  const auto bqr = B.colPivHouseholderQr();
  auto cert = [&](const FlowVector& x) {
    Vector res = inst.gradient() - grad_h(x);
    Eigen::VectorXd psi = bqr.solve(res);
    return (res - B * psi).norm();
  };

  OracleResult out;
  const double gscale = 1.0 + inst.gradient().norm();
  double cur = objective(inst, f);
  const Eigen::Index k = C.cols();
  for (int it = 0; it < 300; ++it) {
    out.iterations = it;
    if (cert(f) <= tol * gscale) {
      out.converged = true;
      break;
    }
    if (k == 0) break;
    Vector res = inst.gradient() - grad_h(f);
    Eigen::VectorXd grad = C.transpose() * res;  // ascent gradient in y
    Eigen::MatrixXd H =
        C.transpose() * hess_h(f).asDiagonal() * C +
        1e-12 * Eigen::MatrixXd::Identity(k, k);
    Eigen::VectorXd dy = H.ldlt().solve(grad);
    Eigen::VectorXd df = C * dy;
    double slope = grad.dot(dy);
    if (!df.allFinite() || slope <= 0.0) {
      dy = grad;
      df = C * dy;
      slope = grad.dot(dy);
      if (slope <= 0.0) break;
    }
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 80; ++ls, step *= 0.5) {
      FlowVector candf = f + step * df;
      const double val = objective(inst, candf);
      if (val >= cur + 1e-4 * step * slope) {
        f = std::move(candf);
        cur = val;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  out.flow = f;
  out.objective = cur;
  out.kkt_residual = cert(f);
  out.converged = out.converged || out.kkt_residual <= tol * gscale;
  return out;
}

int exact_maxflow(int vertex_count, const std::vector<Edge>& edges, int s,
                  int t) {
  if (s == t) return 0;
  // Arc list with residual capacities; an undirected unit edge becomes a
  // forward/backward arc pair with capacity 1 each.
  struct Arc {
    int to, rev, cap;
  };
  std::vector<std::vector<Arc>> g(static_cast<size_t>(vertex_count));
  auto add = [&](int a, int b) {
    g[static_cast<size_t>(a)].push_back({b, static_cast<int>(g[static_cast<size_t>(b)].size()), 1});
    g[static_cast<size_t>(b)].push_back({a, static_cast<int>(g[static_cast<size_t>(a)].size()) - 1, 1});
  };
  for (const Edge& e : edges)
    if (!e.self_loop()) add(e.u, e.v);

  int flow = 0;
  while (true) {
    std::vector<int> prev_v(static_cast<size_t>(vertex_count), -1);
    std::vector<int> prev_a(static_cast<size_t>(vertex_count), -1);
    std::queue<int> q;
    q.push(s);
    prev_v[static_cast<size_t>(s)] = s;
    while (!q.empty() && prev_v[static_cast<size_t>(t)] < 0) {
      const int u = q.front();
      q.pop();
      for (size_t ai = 0; ai < g[static_cast<size_t>(u)].size(); ++ai) {
        const Arc& a = g[static_cast<size_t>(u)][ai];
        if (a.cap <= 0 || prev_v[static_cast<size_t>(a.to)] >= 0) continue;
        prev_v[static_cast<size_t>(a.to)] = u;
        prev_a[static_cast<size_t>(a.to)] = static_cast<int>(ai);
        q.push(a.to);
      }
    }
    if (prev_v[static_cast<size_t>(t)] < 0) break;
    for (int v = t; v != s; v = prev_v[static_cast<size_t>(v)]) {
      Arc& a = g[static_cast<size_t>(prev_v[static_cast<size_t>(v)])]
                [static_cast<size_t>(prev_a[static_cast<size_t>(v)])];
      a.cap -= 1;
      g[static_cast<size_t>(v)][static_cast<size_t>(a.rev)].cap += 1;
    }
    ++flow;
  }
  return flow;
}

}  // namespace pnf
