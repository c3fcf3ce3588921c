#include "pnf/refine.hpp"

#include <chrono>
#include <cmath>

#include "pnf/errors.hpp"

namespace pnf {

ResidualProblem build_residual(const Instance& inst, const FlowVector& f0) {
  if (f0.size() != inst.edge_count())
    throw ShapeError("build_residual: base point does not match instance");
  if (!f0.allFinite()) throw ShapeError("build_residual: non-finite base point");
  const double p = inst.p();
  const double two_p = std::exp2(p);
  const Eigen::Index m = inst.edge_count();
  Vector gp(m), rp(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double grad = smoothed_power_grad(inst.resistance()[i], inst.s()[i],
                                            f0[i], p);
    gp[i] = two_p * (inst.gradient()[i] - grad);
    const double a = std::abs(f0[i]);
    rp[i] = inst.resistance()[i] +
            inst.s()[i] * (a == 0.0 ? (p == 2.0 ? 1.0 : 0.0) : std::pow(a, p - 2.0));
  }
  ResidualProblem out;
  out.instance = Instance(inst.vertex_count(), inst.edges(), std::move(gp),
                          std::move(rp), inst.s(), p);
  out.base_point = f0;
  return out;
}

FlowVector apply_update(const FlowVector& f0, const FlowVector& delta,
                        double p) {
  if (f0.size() != delta.size()) throw ShapeError("apply_update: size mismatch");
  return f0 + std::exp2(-3.0 * p) * delta;
}

RefineResult refine_loop(const Instance& inst, const DemandVector& b,
                         const FlowVector& f0, const InnerSolver& inner,
                         const RefineOptions& opts) {
  (void)b;  // residues are preserved by circulation updates; b documents intent
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const double p = inst.p();

  RefineResult out;
  out.flow = f0;
  double current_obj = objective(inst, out.flow);

  for (int it = 0; it < opts.max_iters; ++it) {
    ResidualProblem res = build_residual(inst, out.flow);
    FlowVector delta = inner(res.instance);
    const double res_obj = objective(res.instance, delta);

    RefineIterate rec;
    rec.residual_objective = res_obj;

    if (res_obj <= opts.gap_target) {
      rec.objective = current_obj;
      rec.elapsed_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      out.trajectory.push_back(rec);
      out.converged = true;
      out.stop_reason = "gap certificate below target";
      break;
    }

    // Damped update with optional line search over lambda in {2^{-3p},...,1}.
    double best_lambda = std::exp2(-3.0 * p);
    FlowVector best_flow = out.flow + best_lambda * delta;
    double best_obj = objective(inst, best_flow);
    if (opts.line_search) {
      for (double lambda = 2.0 * best_lambda; lambda <= 1.0 + 1e-15; lambda *= 2.0) {
        FlowVector cand = out.flow + lambda * delta;
        const double cand_obj = objective(inst, cand);
        if (cand_obj > best_obj) {
          best_obj = cand_obj;
          best_flow = std::move(cand);
          best_lambda = lambda;
        }
      }
    }

    if (best_obj > current_obj) {
      out.flow = std::move(best_flow);
      current_obj = best_obj;
      rec.accepted = true;
      rec.step = best_lambda;
      out.gap_certificate = res_obj;
    } else {
      // Rejected step: with an inexact inner solver the guaranteed increment
      // only exists when the residual objective is nonnegative and the damped
      // point does not regress.
      rec.accepted = false;
    }
    rec.objective = current_obj;
    rec.elapsed_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    out.trajectory.push_back(rec);

    if (!rec.accepted) {
      out.stop_reason = "no improving step";
      break;
    }
  }
  if (out.stop_reason.empty()) out.stop_reason = "iteration cap";
  return out;
}

}  // namespace pnf
