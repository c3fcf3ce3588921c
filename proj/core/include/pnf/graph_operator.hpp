#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "pnf/instance.hpp"

namespace pnf {

struct ProjectionResult {
  Vector cycle_part;     // ghat, with B^T ghat ~ 0
  Vector potential;      // psi, with g = ghat + B psi
  double residual_norm;  // ||B^T ghat||_2 achieved
};

/// Incidence/Laplacian operators for the underlying graph of an Instance
/// (unit edge weights). Immutable after construction; solves are reentrant.
class GraphOperator {
 public:
  GraphOperator(int vertex_count, const std::vector<Edge>& edges);
  explicit GraphOperator(const Instance& inst)
      : GraphOperator(inst.vertex_count(), inst.edges()) {}

  int vertex_count() const { return n_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }

  /// B x: per-edge potential differences x_u - x_v (0 on self-loops).
  Vector incidence_apply(const Vector& x) const;
  /// B^T f: per-vertex residues.
  Vector incidence_transpose_apply(const Vector& f) const;
  /// L x with L = B^T B.
  Vector laplacian_apply(const Vector& x) const;

  const Vector& degrees() const { return degree_; }
  int component_count() const { return component_count_; }
  const std::vector<int>& component_of() const { return component_; }
  bool connected() const;

  /// Solves L x = b to ||Lx-b|| <= eps ||b||, per connected component, with
  /// x summing to zero on each component. b must balance per component.
  /// Preconditioned CG with a Jacobi preconditioner; dense Cholesky fallback
  /// for n <= 2000 when CG stalls.
  Vector laplacian_solve(const DemandVector& b, double eps = 1e-10) const;

  /// g = ghat + B psi with psi = argmin ||g - B psi||.
  ProjectionResult cycle_project(const Vector& g, double eps = 1e-10) const;

  /// f = B L^+ b; the minimum-energy flow with residues b.
  FlowVector electrical_flow(const DemandVector& b, double eps = 1e-10) const;

 private:
  Vector pcg(const Vector& b, double eps, bool& converged,
             double& achieved) const;
  Vector dense_solve(const Vector& b) const;

  int n_ = 0;
  std::vector<Edge> edges_;
  Vector degree_;
  std::vector<int> component_;
  int component_count_ = 0;
  std::vector<std::vector<std::pair<int, int>>> adj_;  // vertex -> (nbr, edge)
  // Lazily built dense factorization for the fallback path.
  mutable std::shared_ptr<Eigen::LDLT<Eigen::MatrixXd>> dense_;
};

}  // namespace pnf
