#pragma once

#include <Eigen/Sparse>
#include <memory>
#include <vector>

#include "pnf/graph_operator.hpp"
#include "pnf/instance.hpp"

namespace pnf {

/// Residue-preserving linear map between edge spaces of two instances,
/// represented as a composition tree of primitive stages:
///   - sparse linear stage (identity, subset projection, padding, scaling,
///     path rerouting are all sparse matrices),
///   - electrical + cycle-gradient reconstruction stage (two Laplacian
///     solves' worth of work per application),
///   - composition and disjoint sums of maps.
/// The kappa field carries the approximation factor associated with the map.
class FlowMap {
 public:
  FlowMap() = default;

  static FlowMap identity(int m);
  /// target_flow = A * source_flow.
  static FlowMap sparse(Eigen::SparseMatrix<double> A, double kappa = 1.0);
  static FlowMap scale(int m, double factor);
  /// f -> B_t L_t^+ (B_s^T f) + ghat_t (ghat_s . f) / ||ghat_t||^2.
  /// The cycle term is omitted when ghat_t vanishes.
  static FlowMap electrical(std::shared_ptr<const GraphOperator> target_op,
                            std::vector<Edge> source_edges, Vector ghat_target,
                            Vector ghat_source, double kappa = 1.0);
  /// apply(second, apply(first, f)); kappas multiply.
  static FlowMap compose(const FlowMap& first, const FlowMap& second);
  /// Sum of maps with common source/target spaces; kappa is the max.
  static FlowMap sum(std::vector<FlowMap> parts);

  FlowVector apply(const FlowVector& f) const;

  int source_size() const;
  int target_size() const;
  double kappa() const { return kappa_; }
  void set_kappa(double k) { kappa_ = k; }
  bool empty() const { return node_ == nullptr; }

 private:
  struct Node;
  using NodePtr = std::shared_ptr<const Node>;
  explicit FlowMap(NodePtr node, double kappa) : node_(std::move(node)), kappa_(kappa) {}

  NodePtr node_;
  double kappa_ = 1.0;
};

}  // namespace pnf
