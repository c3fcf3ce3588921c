#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "pnf/errors.hpp"

namespace pnf {

using Vector = Eigen::VectorXd;
// Per-edge signed flow values, relative to the instance's fixed orientation.
using FlowVector = Eigen::VectorXd;
// Per-vertex residues; must sum to zero.
using DemandVector = Eigen::VectorXd;

struct Edge {
  int u = 0;
  int v = 0;
  bool self_loop() const { return u == v; }
};

/// Smoothed p-norm instance: graph + per-edge gradient g, l2^2 resistance r,
/// lp weight s, exponent p >= 2. Objective on a flow f is
///   g.f - sum_e (r_e f_e^2 + s_e |f_e|^p).
/// Edges keep a fixed orientation, normalized to (min,max) endpoint order at
/// construction. s is stored per edge; most inputs carry a uniform scalar and
/// uniform_s() reports whether that still holds.
class Instance {
 public:
  Instance() = default;
  Instance(int vertex_count, std::vector<Edge> edges, Vector gradient,
           Vector resistance, double s_scalar, double p);
  Instance(int vertex_count, std::vector<Edge> edges, Vector gradient,
           Vector resistance, Vector s_per_edge, double p);

  int vertex_count() const { return n_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int i) const { return edges_[static_cast<size_t>(i)]; }

  const Vector& gradient() const { return g_; }
  const Vector& resistance() const { return r_; }
  const Vector& s() const { return s_; }
  double p() const { return p_; }

  bool uniform_s(double rel_tol = 1e-12) const;
  /// Uniform s value; throws if s is not uniform.
  double s_scalar() const;

  bool has_self_loops() const;

 private:
  void validate() const;

  int n_ = 0;
  std::vector<Edge> edges_;
  Vector g_;
  Vector r_;
  Vector s_;
  double p_ = 2.0;
};

/// h_p(r, s, x) = r x^2 + s |x|^p.
double smoothed_power(double r, double s, double x, double p);

/// sum_i (r_i x_i^2 + s |x_i|^p).
double smoothed_norm(const Vector& r, double s, const Vector& x, double p);
double smoothed_norm(const Vector& r, const Vector& s, const Vector& x,
                     double p);

/// d/dx h_p(r, s, x) = 2 r x + p s |x|^{p-2} x.
double smoothed_power_grad(double r, double s, double x, double p);
Vector smoothed_norm_grad(const Vector& r, const Vector& s, const Vector& x,
                          double p);

/// g.f - sum_e h_p(r_e, s_e, f_e).
double objective(const Instance& inst, const FlowVector& f);

/// Net out-flow per vertex under the fixed orientation; self-loops contribute
/// nothing.
DemandVector residues(const Instance& inst, const FlowVector& f);

/// Edge-disjoint union on the same vertex set; edge indices of g1 come first.
Instance union_instances(const Instance& g1, const Instance& g2);

}  // namespace pnf
