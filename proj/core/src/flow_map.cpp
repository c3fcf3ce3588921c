#include "pnf/flow_map.hpp"

#include "pnf/errors.hpp"

namespace pnf {

struct FlowMap::Node {
  enum class Kind { kSparse, kElectrical, kCompose, kSum };
  Kind kind = Kind::kSparse;

  // kSparse
  Eigen::SparseMatrix<double> matrix;

  // kElectrical
  std::shared_ptr<const GraphOperator> target_op;
  std::vector<Edge> source_edges;
  Vector ghat_target;
  Vector ghat_source;
  double ghat_target_norm2 = 0.0;

  // kCompose
  NodePtr first, second;

  // kSum
  std::vector<NodePtr> parts;

  int src = 0;
  int dst = 0;
};

FlowMap FlowMap::identity(int m) {
  Eigen::SparseMatrix<double> a(m, m);
  a.setIdentity();
  return sparse(std::move(a));
}

FlowMap FlowMap::sparse(Eigen::SparseMatrix<double> a, double kappa) {
  auto node = std::make_shared<Node>();
  node->kind = Node::Kind::kSparse;
  node->src = static_cast<int>(a.cols());
  node->dst = static_cast<int>(a.rows());
  node->matrix = std::move(a);
  return FlowMap(std::move(node), kappa);
}

FlowMap FlowMap::scale(int m, double factor) {
  Eigen::SparseMatrix<double> a(m, m);
  a.setIdentity();
  a *= factor;
  return sparse(std::move(a));
}

FlowMap FlowMap::electrical(std::shared_ptr<const GraphOperator> target_op,
                            std::vector<Edge> source_edges, Vector ghat_target,
                            Vector ghat_source, double kappa) {
  auto node = std::make_shared<Node>();
  node->kind = Node::Kind::kElectrical;
  node->src = static_cast<int>(source_edges.size());
  node->dst = target_op->edge_count();
  node->target_op = std::move(target_op);
  node->source_edges = std::move(source_edges);
  node->ghat_target = std::move(ghat_target);
  node->ghat_source = std::move(ghat_source);
  node->ghat_target_norm2 = node->ghat_target.squaredNorm();
  return FlowMap(std::move(node), kappa);
}

FlowMap FlowMap::compose(const FlowMap& first, const FlowMap& second) {
  if (first.empty()) return second;
  if (second.empty()) return first;
  if (second.source_size() != first.target_size())
    throw ShapeError("FlowMap::compose: size mismatch");
  // Fold adjacent sparse stages so plain rearrangements stay one matrix.
  if (first.node_->kind == Node::Kind::kSparse &&
      second.node_->kind == Node::Kind::kSparse) {
    Eigen::SparseMatrix<double> a = second.node_->matrix * first.node_->matrix;
    return sparse(std::move(a), first.kappa_ * second.kappa_);
  }
  auto node = std::make_shared<Node>();
  node->kind = Node::Kind::kCompose;
  node->first = first.node_;
  node->second = second.node_;
  node->src = first.source_size();
  node->dst = second.target_size();
  return FlowMap(std::move(node), first.kappa_ * second.kappa_);
}

FlowMap FlowMap::sum(std::vector<FlowMap> parts) {
  if (parts.empty()) throw ShapeError("FlowMap::sum: no parts");
  double kappa = 1.0;
  auto node = std::make_shared<Node>();
  node->kind = Node::Kind::kSum;
  node->src = parts.front().source_size();
  node->dst = parts.front().target_size();
  for (const FlowMap& part : parts) {
    if (part.source_size() != node->src || part.target_size() != node->dst)
      throw ShapeError("FlowMap::sum: size mismatch");
    kappa = std::max(kappa, part.kappa());
    node->parts.push_back(part.node_);
  }
  return FlowMap(std::move(node), kappa);
}

FlowVector FlowMap::apply(const FlowVector& f) const {
  if (!node_) throw ShapeError("FlowMap::apply: empty map");
  if (f.size() != node_->src)
    throw ShapeError("FlowMap::apply: flow does not match source instance");
  struct Applier {
    static FlowVector run(const Node& n, const FlowVector& f) {
      switch (n.kind) {
        case Node::Kind::kSparse:
          return n.matrix * f;
        case Node::Kind::kElectrical: {
          // Residues of the source piece flow.
          DemandVector b = DemandVector::Zero(n.target_op->vertex_count());
          for (size_t i = 0; i < n.source_edges.size(); ++i) {
            const Edge& e = n.source_edges[i];
            if (e.self_loop()) continue;
            b[e.u] += f[static_cast<Eigen::Index>(i)];
            b[e.v] -= f[static_cast<Eigen::Index>(i)];
          }
          FlowVector out = n.target_op->electrical_flow(b);
          if (n.ghat_target_norm2 > 0.0) {
            const double coeff = n.ghat_source.dot(f) / n.ghat_target_norm2;
            out += coeff * n.ghat_target;
          }
          return out;
        }
        case Node::Kind::kCompose:
          return run(*n.second, run(*n.first, f));
        case Node::Kind::kSum: {
          FlowVector out = FlowVector::Zero(n.dst);
          for (const auto& part : n.parts) out += run(*part, f);
          return out;
        }
      }
      throw ShapeError("FlowMap::apply: corrupt node");
    }
  };
  return Applier::run(*node_, f);
}

int FlowMap::source_size() const { return node_ ? node_->src : 0; }
int FlowMap::target_size() const { return node_ ? node_->dst : 0; }

}  // namespace pnf
