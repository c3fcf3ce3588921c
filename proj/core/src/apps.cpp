#include "pnf/apps.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <queue>

#include "pnf/errors.hpp"
#include "pnf/graph_operator.hpp"

namespace pnf {

SslDual ssl_dual_transform(const SslProblem& prob) {
  if (prob.labeled.empty()) throw ShapeError("ssl: label set is empty");
  if (prob.labeled.size() != prob.labels.size())
    throw ShapeError("ssl: labels do not match labeled set");
  if (!(prob.p > 1.01 && prob.p < 2.0 + 1e-12))
    throw ShapeError("ssl: p must lie in (1.01, 2]");
  const double q = prob.p / (prob.p - 1.0);
  if (q > 32.0)
    throw ShapeError("ssl: p too close to 1 for the solver exponent range");

  const int n = prob.vertex_count;
  std::vector<char> in_t(static_cast<size_t>(n), 0);
  std::vector<double> label_of(static_cast<size_t>(n), 0.0);
  for (size_t i = 0; i < prob.labeled.size(); ++i) {
    const int v = prob.labeled[i];
    if (v < 0 || v >= n) throw ShapeError("ssl: labeled vertex out of range");
    in_t[static_cast<size_t>(v)] = 1;
    label_of[static_cast<size_t>(v)] = prob.labels[i];
  }

  SslDual out;
  out.q = q;
  out.c_q = (prob.p - 1.0) * std::pow(prob.p, -q);
  out.vertex_map.assign(static_cast<size_t>(n), -1);
  int next = 1;  // 0 is the supernode
  out.supernode = 0;
  for (int v = 0; v < n; ++v)
    out.vertex_map[static_cast<size_t>(v)] = in_t[static_cast<size_t>(v)] ? 0 : next++;

  const int m = static_cast<int>(prob.edges.size());
  std::vector<Edge> dedges;
  Vector g(m);
  out.edge_sign.assign(static_cast<size_t>(m), 1.0);
  for (int i = 0; i < m; ++i) {
    const Edge& e = prob.edges[static_cast<size_t>(i)];
    double ge = (in_t[static_cast<size_t>(e.u)] ? label_of[static_cast<size_t>(e.u)] : 0.0) -
                (in_t[static_cast<size_t>(e.v)] ? label_of[static_cast<size_t>(e.v)] : 0.0);
    int mu = out.vertex_map[static_cast<size_t>(e.u)];
    int mv = out.vertex_map[static_cast<size_t>(e.v)];
    if (mu > mv) {
      std::swap(mu, mv);
      ge = -ge;
      out.edge_sign[static_cast<size_t>(i)] = -1.0;
    }
    dedges.push_back({mu, mv});
    g[i] = ge;
  }
  out.dual = Instance(next, std::move(dedges), std::move(g), Vector::Zero(m),
                      out.c_q, q);
  return out;
}

Vector ssl_recover_voltages(const SslProblem& prob, const SslDual& dual,
                            const FlowVector& dual_flow) {
  const int n = prob.vertex_count;
  const int m = static_cast<int>(prob.edges.size());
  if (dual_flow.size() != m) throw ShapeError("ssl: flow size mismatch");
  const double p = prob.p;
  const double q = dual.q;

  // Potential drop per primal edge (u -> v orientation).
  Vector z(m);
  for (int i = 0; i < m; ++i) {
    const double f = dual.edge_sign[static_cast<size_t>(i)] * dual_flow[i];
    z[i] = (f >= 0.0 ? 1.0 : -1.0) * std::pow(std::abs(f) / p, q - 1.0);
  }

  std::vector<char> in_t(static_cast<size_t>(n), 0);
  Vector x = Vector::Zero(n);
  for (size_t i = 0; i < prob.labeled.size(); ++i) {
    in_t[static_cast<size_t>(prob.labeled[i])] = 1;
    x[prob.labeled[i]] = prob.labels[i];
  }

  // Multi-source BFS from the labeled set, integrating z along tree edges.
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<size_t>(n));
  for (int i = 0; i < m; ++i) {
    const Edge& e = prob.edges[static_cast<size_t>(i)];
    if (e.self_loop()) continue;
    adj[static_cast<size_t>(e.u)].push_back({e.v, i});
    adj[static_cast<size_t>(e.v)].push_back({e.u, i});
  }
  std::vector<char> known(static_cast<size_t>(n), 0);
  std::queue<int> bfs;
  for (int v = 0; v < n; ++v)
    if (in_t[static_cast<size_t>(v)]) {
      known[static_cast<size_t>(v)] = 1;
      bfs.push(v);
    }
  while (!bfs.empty()) {
    const int u = bfs.front();
    bfs.pop();
    for (auto [v, ei] : adj[static_cast<size_t>(u)]) {
      if (known[static_cast<size_t>(v)]) continue;
      const Edge& e = prob.edges[static_cast<size_t>(ei)];
      x[v] = e.u == u ? x[u] - z[ei] : x[u] + z[ei];
      known[static_cast<size_t>(v)] = 1;
      bfs.push(v);
    }
  }
  for (int v = 0; v < n; ++v)
    if (!known[static_cast<size_t>(v)])
      throw ShapeError("ssl: graph is disconnected from the labeled set");

  // Consistency check of the tree inversion against all edges; fall back to
  // a pinned least-squares fit when the dual flow is too inexact.
  double worst = 0.0, scale = 1e-12;
  for (int i = 0; i < m; ++i) {
    const Edge& e = prob.edges[static_cast<size_t>(i)];
    if (e.self_loop()) continue;
    worst = std::max(worst, std::abs(x[e.u] - x[e.v] - z[i]));
    scale = std::max(scale, std::abs(z[i]));
  }
  if (worst > 1e-3 * (1.0 + scale)) {
    // min ||B_F x_F - (z - B_T s_T)||_2 over the free vertices.
    std::vector<int> free_id(static_cast<size_t>(n), -1);
    int nf = 0;
    for (int v = 0; v < n; ++v)
      if (!in_t[static_cast<size_t>(v)]) free_id[static_cast<size_t>(v)] = nf++;
    if (nf > 0) {
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, nf);
      Eigen::VectorXd rhs = z;
      for (int i = 0; i < m; ++i) {
        const Edge& e = prob.edges[static_cast<size_t>(i)];
        if (e.self_loop()) {
          rhs[i] = 0.0;
          continue;
        }
        for (auto [v, sg] : {std::pair<int, double>{e.u, 1.0}, {e.v, -1.0}}) {
          if (in_t[static_cast<size_t>(v)])
            rhs[i] -= sg * x[v];
          else
            A(i, free_id[static_cast<size_t>(v)]) = sg;
        }
      }
      Eigen::VectorXd xf = A.colPivHouseholderQr().solve(rhs);
      for (int v = 0; v < n; ++v)
        if (!in_t[static_cast<size_t>(v)]) x[v] = xf[free_id[static_cast<size_t>(v)]];
    }
  }
  return x;
}

double ssl_primal_objective(const SslProblem& prob, const Vector& x) {
  double total = 0.0;
  for (const Edge& e : prob.edges)
    if (!e.self_loop())
      total += std::pow(std::abs(x[e.u] - x[e.v]), prob.p);
  return total;
}

MwuResult mwu_maxflow(int vertex_count, const std::vector<Edge>& edges, int s,
                      int t, double eps, double p, const MwuConfig& cfg) {
  if (!(eps > 0.0 && eps < 0.5))
    throw ShapeError("mwu_maxflow: eps must lie in (0, 0.5)");
  if (s == t) throw ShapeError("mwu_maxflow: s equals t");
  const int m = static_cast<int>(edges.size());
  const double md = static_cast<double>(std::max(m, 2));
  if (p <= 0.0) {
    const double ln = std::log(std::max(2.0, static_cast<double>(vertex_count)));
    p = std::ceil(std::pow(ln, 0.1));
  }
  p = std::clamp(p, 2.0, 32.0);

  int deg_s = 0, deg_t = 0;
  for (const Edge& e : edges) {
    if (e.self_loop()) continue;
    deg_s += (e.u == s || e.v == s);
    deg_t += (e.u == t || e.v == t);
  }

  MwuResult best;
  best.flow = FlowVector::Zero(m);
  const double rho = std::pow(md / eps, 1.0 / p);
  best.width_bound = rho;

  GraphOperator op(vertex_count, edges);

  // Checks whether value F is (1+O(eps))-feasible; on success returns the
  // averaged flow scaled to congestion <= 1. Exits the schedule as soon as
  // the running average already routes F at congestion <= 1: that flow is
  // feasible outright, which is a stronger certificate than the averaged
  // regret bound the full schedule provides.
  auto attempt = [&](int F, FlowVector& out_flow, int& iters_used,
                     bool& clipped) {
    DemandVector b = DemandVector::Zero(vertex_count);
    b[s] = static_cast<double>(F);
    b[t] = -static_cast<double>(F);
    Vector r = Vector::Ones(m);
    FlowVector sum = FlowVector::Zero(m);
    FlowVector warm = op.electrical_flow(b);
    const int iters = std::min(
        cfg.max_iterations,
        std::max(8, static_cast<int>(std::ceil(rho * std::log(md) /
                                               (eps * eps)))));
    for (int it = 0; it < iters; ++it) {
      const double rsum = r.sum();
      const double sbar = eps * rsum / md;
      Instance inst(vertex_count, edges, Vector::Zero(m), r, sbar, p);
      const double inner_acc =
          std::max(1e-12, cfg.inner_accuracy_multiplier * eps * rsum);
      auto [f, rep] = solve_smoothed(inst, b, warm, inner_acc, cfg.solver);
      (void)rep;
      warm = f;  // next round's weights are close; reuse the iterate
      const double cost = smoothed_norm(r, sbar, f, p);
      if (cost > (1.0 + 1.1 * eps) * rsum) return false;  // infeasibility cert
      for (int i = 0; i < m; ++i)
        if (std::abs(f[i]) > rho) {
          f[i] = f[i] > 0.0 ? rho : -rho;
          clipped = true;
        }
      sum += f;
      iters_used = it + 1;
      FlowVector avg = sum / static_cast<double>(it + 1);
      if (avg.cwiseAbs().maxCoeff() <= 1.0) {
        out_flow = std::move(avg);
        return true;
      }
      for (int i = 0; i < m; ++i)
        r[i] *= 1.0 + (eps / rho) * std::abs(f[i]);
      // The oracle and the feasibility test are invariant under scaling r;
      // renormalize so the weights cannot overflow over many rounds.
      r *= md / r.sum();
    }
    FlowVector avg = sum / static_cast<double>(iters_used);
    const double cong = avg.cwiseAbs().maxCoeff();
    if (cong > 1.0) avg /= cong;
    out_flow = std::move(avg);
    return true;
  };

  int lo = 0, hi = std::min(deg_s, deg_t);
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    FlowVector flow;
    int used = 0;
    bool clipped = false;
    if (attempt(mid, flow, used, clipped)) {
      lo = mid;
      best.flow = std::move(flow);
      best.value = mid;
      best.iterations = used;
      best.width_clipped = best.width_clipped || clipped;
    } else {
      hi = mid - 1;
    }
  }
  return best;
}

}  // namespace pnf
