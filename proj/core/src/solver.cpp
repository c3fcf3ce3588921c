#include "pnf/solver.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>

#include "pnf/eliminate.hpp"
#include "pnf/errors.hpp"
#include "pnf/graph_operator.hpp"
#include "pnf/refine.hpp"

namespace pnf {

namespace {

void validate_p(double p) {
  if (!(p >= 2.0 && p <= 32.0))
    throw ShapeError("solver: p must lie in [2, 32]");
}

Vector objective_gradient(const Instance& inst, const FlowVector& f) {
  Vector grad(inst.edge_count());
  for (int i = 0; i < inst.edge_count(); ++i)
    grad[i] = inst.gradient()[i] -
              smoothed_power_grad(inst.resistance()[i], inst.s()[i], f[i],
                                  inst.p());
  return grad;
}

double auto_kappa(int m, double p) {
  return std::max(2.0, std::pow(static_cast<double>(std::max(m, 2)),
                                1.0 / std::sqrt(p - 1.0)));
}

// Routes the residue drift b - B^T f along a BFS forest, making the returned
// flow feasible to machine precision. The drift comes from inexact Laplacian
// solves inside electrical map stages and is ~1e-12 relative, so the
// objective change is negligible.
void repair_residues(const Instance& inst, const DemandVector& b,
                     FlowVector& f) {
  const int n = inst.vertex_count();
  const int m = inst.edge_count();
  if (m == 0) return;
  DemandVector d = b - residues(inst, f);
  if (d.cwiseAbs().maxCoeff() == 0.0) return;

  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<size_t>(n));
  for (int i = 0; i < m; ++i) {
    const Edge& e = inst.edge(i);
    if (e.self_loop()) continue;
    adj[static_cast<size_t>(e.u)].push_back({e.v, i});
    adj[static_cast<size_t>(e.v)].push_back({e.u, i});
  }
  std::vector<int> parent_edge(static_cast<size_t>(n), -1);
  std::vector<int> order;
  order.reserve(static_cast<size_t>(n));
  std::vector<char> seen(static_cast<size_t>(n), 0);
  for (int root = 0; root < n; ++root) {
    if (seen[static_cast<size_t>(root)]) continue;
    seen[static_cast<size_t>(root)] = 1;
    size_t head = order.size();
    order.push_back(root);
    while (head < order.size()) {
      const int u = order[head++];
      for (auto [v, ei] : adj[static_cast<size_t>(u)]) {
        if (seen[static_cast<size_t>(v)]) continue;
        seen[static_cast<size_t>(v)] = 1;
        parent_edge[static_cast<size_t>(v)] = ei;
        order.push_back(v);
      }
    }
  }
  // Fix each vertex via its parent edge, leaves first; the parent absorbs
  // the imbalance. Per component the drift sums to zero, so roots end
  // balanced.
  for (size_t i = order.size(); i-- > 0;) {
    const int v = order[i];
    const int ei = parent_edge[static_cast<size_t>(v)];
    if (ei < 0) continue;
    const Edge& e = inst.edge(ei);
    f[ei] += v == e.u ? d[v] : -d[v];
    d[v == e.u ? e.v : e.u] += d[v];
    d[v] = 0.0;
  }
}

}  // namespace

FlowVector base_case_solve(const Instance& inst, const DemandVector& b,
                           double tol) {
  validate_p(inst.p());
  const int n = inst.vertex_count();
  const int m = inst.edge_count();
  if (b.size() != n) throw ShapeError("base_case_solve: demand size mismatch");
  GraphOperator op(inst);
  for (int i = 0; i < m; ++i)
    if (inst.resistance()[i] == 0.0 && inst.s()[i] == 0.0 &&
        inst.gradient()[i] != 0.0 && inst.edge(i).self_loop())
      throw SolverFailure("base_case_solve: unbounded self-loop", 0.0);

  FlowVector f = m == 0 ? FlowVector() : op.electrical_flow(b);
  if (m == 0) return f;
  const double p = inst.p();
  const double gnorm = inst.gradient().norm();
  auto cert = [&](const FlowVector& x) {
    return op.cycle_project(objective_gradient(inst, x)).cycle_part.norm();
  };
  // Relative certificate scale: the smoothing gradient can dwarf g (e.g. for
  // reweighted instances), so include its magnitude at the current point.
  auto scale_at = [&](const FlowVector& x) {
    return 1.0 + gnorm + (inst.gradient() - objective_gradient(inst, x)).norm();
  };

  // Damped Newton with a dense KKT system; the incidence constraint rows are
  // rank deficient (one per component), handled by a complete orthogonal
  // decomposition.
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + n, m + n);
  for (int i = 0; i < m; ++i) {
    const Edge& e = inst.edge(i);
    if (e.self_loop()) continue;
    kkt(m + e.u, i) = 1.0;
    kkt(m + e.v, i) = -1.0;
    kkt(i, m + e.u) = 1.0;
    kkt(i, m + e.v) = -1.0;
  }
  auto phi = [&](const FlowVector& x) { return -objective(inst, x); };
  double cur = phi(f);
  bool newton_ok = true;
  for (int it = 0; it < 100 && newton_ok; ++it) {
    if (cert(f) <= tol * scale_at(f)) return f;
    Vector grad = -objective_gradient(inst, f);  // gradient of phi
    for (int i = 0; i < m; ++i) {
      const double a = std::abs(f[i]);
      const double h = 2.0 * inst.resistance()[i] +
                       p * (p - 1.0) * inst.s()[i] *
                           (a == 0.0 ? (p == 2.0 ? 1.0 : 0.0)
                                     : std::pow(a, p - 2.0));
      kkt(i, i) = std::max(h, 1e-12);
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + n);
    rhs.head(m) = -grad;
    Eigen::VectorXd sol =
        kkt.completeOrthogonalDecomposition().solve(rhs);
    Vector d = sol.head(m);
    const double slope = grad.dot(d);
    if (!d.allFinite() || slope >= 0.0) {
      newton_ok = false;
      break;
    }
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      FlowVector cand = f + step * d;
      const double val = phi(cand);
      if (val <= cur + 1e-4 * step * slope) {
        f = std::move(cand);
        cur = val;
        moved = true;
        break;
      }
    }
    if (!moved) newton_ok = false;
  }

  // Projected-gradient fallback: steps stay in the cycle space, so the
  // residues never change.
  for (int it = 0; it < 20000; ++it) {
    const double c = cert(f);
    if (c <= tol * scale_at(f)) return f;
    Vector d = op.cycle_project(objective_gradient(inst, f)).cycle_part;
    double step = 1.0;
    bool moved = false;
    const double slope = -d.squaredNorm();
    for (int ls = 0; ls < 80; ++ls, step *= 0.5) {
      FlowVector cand = f + step * d;
      const double val = phi(cand);
      if (val <= cur + 1e-4 * step * slope) {
        f = std::move(cand);
        cur = val;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  const double achieved = cert(f);
  if (achieved <= std::sqrt(tol) * scale_at(f)) return f;
  throw SolverFailure("base_case_solve: KKT residual did not converge",
                      achieved);
}

namespace {

struct Driver {
  RecursionConfig cfg;

  std::pair<FlowVector, SolveReport> solve(const Instance& inst,
                                           const DemandVector& b,
                                           const FlowVector& f0, double delta,
                                           int depth) {
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();
    validate_p(inst.p());
    const int m = inst.edge_count();
    const double p = inst.p();
    SolveReport rep;
    rep.seed = cfg.seed;
    rep.delta_used = delta;

    if (m <= cfg.base_case_edge_threshold ||
        depth >= cfg.recursion_depth_limit) {
      FlowVector f = base_case_solve(inst, b, cfg.base_tol);
      repair_residues(inst, b, f);
      rep.base_case_calls = 1;
      rep.converged = true;
      rep.stop_reason = "base case";
      rep.gap_certificate = 0.0;
      rep.objectives.push_back(objective(inst, f));
      rep.iter_elapsed_ms.push_back(
          std::chrono::duration<double, std::milli>(clock::now() - t_start)
              .count());
      LevelStats ls;
      ls.depth = depth;
      ls.vertices = inst.vertex_count();
      ls.edges = m;
      ls.elapsed_ms =
          std::chrono::duration<double, std::milli>(clock::now() - t_start)
              .count();
      rep.levels.push_back(ls);
      return {std::move(f), std::move(rep)};
    }

    const double kappa = cfg.kappa > 1.0 ? cfg.kappa : auto_kappa(m, p);
    rep.kappa_used = kappa;
    const int T = cfg.max_outer_iters;
    FlowVector f = f0;
    double cur_obj = objective(inst, f);
    const double lambda0 = std::exp2(-3.0 * p);

    for (int t = 0; t < T; ++t) {
      ResidualProblem res = build_residual(inst, f);
      const Instance& h1 = res.instance;

      FlowVector delta_h1 = precondition_step(h1, kappa, delta, T, depth, rep);
      double res_obj = objective(h1, delta_h1);

      bool accepted = false;
      double best_obj = cur_obj;
      FlowVector best_f;
      auto try_direction = [&](const FlowVector& dir) {
        for (double lam = lambda0; lam <= 1.0 + 1e-15; lam *= 2.0) {
          FlowVector cand = f + lam * dir;
          const double val = objective(inst, cand);
          if (val > best_obj) {
            best_obj = val;
            best_f = std::move(cand);
            accepted = true;
          }
        }
      };
      if (res_obj > 0.0) try_direction(delta_h1);

      if (m <= cfg.fallback_edge_threshold && (!accepted || res_obj > delta)) {
        // The preconditioned direction alone converges at a 2^{-O(p)} rate;
        // on instances small enough for a dense solve, also try the exact
        // residual maximizer and keep whichever step improves more.
        try {
          const double before = best_obj;
          FlowVector direct = base_case_solve(
              h1, DemandVector::Zero(inst.vertex_count()), cfg.base_tol);
          const double direct_obj = objective(h1, direct);
          res_obj = std::max(res_obj, direct_obj);
          if (direct_obj > 0.0) try_direction(direct);
          if (best_obj > before) ++rep.fallback_steps;
        } catch (const SolverFailure&) {
        }
      }

      rep.residual_objectives.push_back(res_obj);
      rep.accepted.push_back(accepted ? 1 : 0);
      if (accepted) {
        f = std::move(best_f);
        cur_obj = best_obj;
      }
      rep.objectives.push_back(cur_obj);
      rep.iter_elapsed_ms.push_back(
          std::chrono::duration<double, std::milli>(clock::now() - t_start)
              .count());
      rep.gap_certificate = res_obj;

      if (res_obj <= delta) {
        rep.converged = true;
        rep.stop_reason = "residual objective below budget";
        break;
      }
      if (!accepted) {
        rep.stop_reason = "no improving step";
        break;
      }
    }
    if (rep.stop_reason.empty()) rep.stop_reason = "iteration cap";
    repair_residues(inst, b, f);

    LevelStats ls;
    ls.depth = depth;
    ls.vertices = inst.vertex_count();
    ls.edges = m;
    ls.elapsed_ms =
        std::chrono::duration<double, std::milli>(clock::now() - t_start)
            .count();
    rep.levels.push_back(ls);
    return {std::move(f), std::move(rep)};
  }

  // One application of the UltraSparsify -> Eliminate -> RemoveLoops ->
  // SolveLoops -> recurse -> map-back pipeline to a residual circulation
  // instance.
  FlowVector precondition_step(const Instance& h1, double kappa, double delta,
                               int T, int depth, SolveReport& rep) {
    const int m = h1.edge_count();
    const double p = h1.p();
    const double gnorm = h1.gradient().norm();
    const double dprime =
        std::min(1.0, std::pow(std::max(gnorm, 1e-300), -p / (p - 1.0))) *
        delta / (4.0 * static_cast<double>(T) * static_cast<double>(m));

    UltraSparsifyConfig scfg = cfg.sparsify;
    scfg.seed = cfg.seed + static_cast<uint64_t>(depth) * 0x9e3779b9u +
                static_cast<uint64_t>(rep.residual_objectives.size());
    UltraSparsifierOutput us =
        ultra_sparsify(h1, kappa, std::max(dprime, 1e-300), scfg);

    EliminationResult el = eliminate(us.sparsified);
    LoopSplit split = remove_loops(el.reduced);
    FlowVector dl = solve_loops(split.loops, 1.0 / p);

    FlowVector dh4;
    if (split.loop_free.edge_count() == 0) {
      dh4 = FlowVector();
    } else if (split.loop_free.edge_count() >= m) {
      // Sparsification failed to shrink; recursing would not terminate.
      dh4 = base_case_solve(split.loop_free,
                            DemandVector::Zero(h1.vertex_count()),
                            cfg.base_tol);
      ++rep.base_case_calls;
    } else {
      // Loop removal can strand vertices whose edges were all self-loops;
      // compact them away so the child is connected for the sparsifier.
      const Instance& lf = split.loop_free;
      std::vector<int> vmap(static_cast<size_t>(lf.vertex_count()), -1);
      int nv = 0;
      for (const Edge& e : lf.edges()) {
        for (int v : {e.u, e.v})
          if (vmap[static_cast<size_t>(v)] < 0) vmap[static_cast<size_t>(v)] = nv++;
      }
      std::vector<Edge> cedges;
      cedges.reserve(lf.edges().size());
      for (const Edge& e : lf.edges())
        cedges.push_back({vmap[static_cast<size_t>(e.u)],
                          vmap[static_cast<size_t>(e.v)]});
      Instance child(nv, std::move(cedges), lf.gradient(), lf.resistance(),
                     lf.s(), p);
      if (!GraphOperator(child).connected()) {
        dh4 = base_case_solve(child, DemandVector::Zero(nv), cfg.base_tol);
        ++rep.base_case_calls;
      } else {
        auto [flow, sub] =
            solve(child, DemandVector::Zero(nv),
                  FlowVector::Zero(child.edge_count()), delta / T, depth + 1);
        dh4 = std::move(flow);
        rep.base_case_calls += sub.base_case_calls;
        rep.fallback_steps += sub.fallback_steps;
        rep.map_applications += sub.map_applications;
        for (auto& ls : sub.levels) rep.levels.push_back(ls);
      }
    }
    if (!rep.levels.empty()) rep.levels.back().child_edges = split.loop_free.edge_count();

    FlowVector dh3 = FlowVector::Zero(el.reduced.edge_count());
    for (size_t i = 0; i < split.loop_free_index.size(); ++i)
      dh3[split.loop_free_index[i]] = dh4[static_cast<Eigen::Index>(i)];
    for (size_t i = 0; i < split.loop_index.size(); ++i)
      dh3[split.loop_index[i]] = dl[static_cast<Eigen::Index>(i)];

    const double elim_scale =
        std::pow(static_cast<double>(us.sparsified.vertex_count()),
                 -1.0 / (p - 1.0));
    FlowVector dh2 = elim_scale * el.map_to_original.apply(dh3);
    FlowVector dh1 = us.map_to_source.apply(dh2) / us.kappa_backward;
    rep.map_applications += 2;
    return dh1;
  }
};

}  // namespace

std::pair<FlowVector, SolveReport> recursive_preconditioning(
    const Instance& inst, const DemandVector& b, const FlowVector& f0,
    const RecursionConfig& cfg) {
  if (f0.size() != inst.edge_count())
    throw ShapeError("recursive_preconditioning: warm start size mismatch");
  Driver d{cfg};
  auto out = d.solve(inst, b, f0, cfg.delta, 0);
  out.second.kappa_used =
      cfg.kappa > 1.0 ? cfg.kappa : auto_kappa(inst.edge_count(), inst.p());
  return out;
}

std::pair<FlowVector, SolveReport> solve_smoothed(const Instance& inst,
                                                  const DemandVector& b,
                                                  const FlowVector& f0,
                                                  double accuracy,
                                                  const RecursionConfig& cfg) {
  RecursionConfig c = cfg;
  // The requested accuracy is the gap target; running the recursion to a
  // tighter budget than the caller can observe is wasted work.
  c.delta = accuracy;
  FlowVector f = f0;
  SolveReport total;
  for (int round = 0; round < 10; ++round) {
    auto [flow, rep] = recursive_preconditioning(inst, b, f, c);
    f = std::move(flow);
    total.objectives.insert(total.objectives.end(), rep.objectives.begin(),
                            rep.objectives.end());
    total.residual_objectives.insert(total.residual_objectives.end(),
                                     rep.residual_objectives.begin(),
                                     rep.residual_objectives.end());
    total.accepted.insert(total.accepted.end(), rep.accepted.begin(),
                          rep.accepted.end());
    const double t_base =
        total.iter_elapsed_ms.empty() ? 0.0 : total.iter_elapsed_ms.back();
    for (double t : rep.iter_elapsed_ms)
      total.iter_elapsed_ms.push_back(t_base + t);
    for (auto& ls : rep.levels) total.levels.push_back(ls);
    total.map_applications += rep.map_applications;
    total.base_case_calls += rep.base_case_calls;
    total.fallback_steps += rep.fallback_steps;
    total.gap_certificate = rep.gap_certificate;
    total.kappa_used = rep.kappa_used;
    total.delta_used = rep.delta_used;
    total.stop_reason = rep.stop_reason;
    if (rep.gap_certificate <= accuracy) {
      total.converged = true;
      total.stop_reason = "gap certificate below accuracy";
      break;
    }
    if (rep.stop_reason == "no improving step") break;
  }
  return {std::move(f), std::move(total)};
}

std::pair<FlowVector, SolveReport> pflows(int vertex_count,
                                          const std::vector<Edge>& edges,
                                          const DemandVector& b, double p,
                                          double c,
                                          const RecursionConfig& cfg) {
  validate_p(p);
  const int m = static_cast<int>(edges.size());
  Instance inst(vertex_count, edges, Vector::Zero(m), Vector::Zero(m),
                Vector::Ones(m), p);
  GraphOperator op(vertex_count, edges);
  if (!op.connected()) throw ShapeError("pflows: graph must be connected");
  FlowVector f0 = op.electrical_flow(b);

  const double md = static_cast<double>(std::max(m, 2));
  const double f0p = smoothed_norm(Vector::Zero(m), Vector::Ones(m), f0, p);
  const double accuracy =
      std::min(1.0, f0p / (std::exp2(p) * std::pow(md, 0.5 * p) *
                           std::pow(md, c)));
  auto out = solve_smoothed(inst, b, f0, std::max(accuracy, 1e-14), cfg);
  return out;
}

}  // namespace pnf
