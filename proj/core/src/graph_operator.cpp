#include "pnf/graph_operator.hpp"

#include <cmath>
#include <queue>

#include "pnf/errors.hpp"

namespace pnf {

GraphOperator::GraphOperator(int vertex_count, const std::vector<Edge>& edges)
    : n_(vertex_count), edges_(edges) {
  degree_ = Vector::Zero(n_);
  adj_.assign(static_cast<size_t>(n_), {});
  for (size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    if (e.u < 0 || e.v < 0 || e.u >= n_ || e.v >= n_)
      throw ShapeError("GraphOperator: edge endpoint out of range");
    if (e.self_loop()) continue;
    degree_[e.u] += 1.0;
    degree_[e.v] += 1.0;
    adj_[static_cast<size_t>(e.u)].push_back({e.v, static_cast<int>(i)});
    adj_[static_cast<size_t>(e.v)].push_back({e.u, static_cast<int>(i)});
  }
  component_.assign(static_cast<size_t>(n_), -1);
  component_count_ = 0;
  for (int s = 0; s < n_; ++s) {
    if (component_[static_cast<size_t>(s)] >= 0) continue;
    std::queue<int> q;
    q.push(s);
    component_[static_cast<size_t>(s)] = component_count_;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (auto [v, ei] : adj_[static_cast<size_t>(u)]) {
        (void)ei;
        if (component_[static_cast<size_t>(v)] < 0) {
          component_[static_cast<size_t>(v)] = component_count_;
          q.push(v);
        }
      }
    }
    ++component_count_;
  }
}

bool GraphOperator::connected() const { return component_count_ <= 1; }

Vector GraphOperator::incidence_apply(const Vector& x) const {
  if (x.size() != n_) throw ShapeError("incidence_apply: bad potential size");
  Vector out(static_cast<Eigen::Index>(edges_.size()));
  for (size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    out[static_cast<Eigen::Index>(i)] = e.self_loop() ? 0.0 : x[e.u] - x[e.v];
  }
  return out;
}

Vector GraphOperator::incidence_transpose_apply(const Vector& f) const {
  if (f.size() != static_cast<Eigen::Index>(edges_.size()))
    throw ShapeError("incidence_transpose_apply: bad flow size");
  Vector out = Vector::Zero(n_);
  for (size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    if (e.self_loop()) continue;
    out[e.u] += f[static_cast<Eigen::Index>(i)];
    out[e.v] -= f[static_cast<Eigen::Index>(i)];
  }
  return out;
}

Vector GraphOperator::laplacian_apply(const Vector& x) const {
  Vector out(n_);
  for (int u = 0; u < n_; ++u) {
    double acc = degree_[u] * x[u];
    for (auto [v, ei] : adj_[static_cast<size_t>(u)]) {
      (void)ei;
      acc -= x[v];
    }
    out[u] = acc;
  }
  return out;
}

Vector GraphOperator::pcg(const Vector& b, double eps, bool& converged,
                          double& achieved) const {
  const double bnorm = b.norm();
  Vector x = Vector::Zero(n_);
  if (bnorm == 0.0) {
    converged = true;
    achieved = 0.0;
    return x;
  }
  // Jacobi preconditioner; isolated vertices have zero degree and must carry
  // zero demand (checked by the caller), so their diagonal is bridged with 1.
  Vector minv(n_);
  for (int u = 0; u < n_; ++u) minv[u] = degree_[u] > 0 ? 1.0 / degree_[u] : 1.0;

  Vector r = b;
  Vector z = minv.cwiseProduct(r);
  Vector p = z;
  double rz = r.dot(z);
  const int cap = 20 * std::max(1, n_);
  for (int it = 0; it < cap; ++it) {
    if (r.norm() <= eps * bnorm) break;
    Vector lp = laplacian_apply(p);
    const double plp = p.dot(lp);
    if (plp <= 0.0) break;  // numerical breakdown
    const double alpha = rz / plp;
    x += alpha * p;
    r -= alpha * lp;
    z = minv.cwiseProduct(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  achieved = r.norm() / bnorm;
  converged = achieved <= eps;
  return x;
}

Vector GraphOperator::dense_solve(const Vector& b) const {
  if (!dense_) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n_, n_);
    for (const Edge& e : edges_) {
      if (e.self_loop()) continue;
      L(e.u, e.u) += 1.0;
      L(e.v, e.v) += 1.0;
      L(e.u, e.v) -= 1.0;
      L(e.v, e.u) -= 1.0;
    }
    // Rank-one completion per component keeps the system positive definite
    // while leaving balanced right-hand sides untouched.
    std::vector<double> comp_size(static_cast<size_t>(component_count_), 0.0);
    for (int u = 0; u < n_; ++u) comp_size[static_cast<size_t>(component_[u])] += 1.0;
    for (int u = 0; u < n_; ++u)
      for (int v = 0; v < n_; ++v)
        if (component_[u] == component_[v])
          L(u, v) += 1.0 / comp_size[static_cast<size_t>(component_[u])];
    dense_ = std::make_shared<Eigen::LDLT<Eigen::MatrixXd>>(L);
  }
  return dense_->solve(b);
}

Vector GraphOperator::laplacian_solve(const DemandVector& b, double eps) const {
  if (eps <= 0.0) throw ShapeError("laplacian_solve: eps must be > 0");
  if (b.size() != n_) throw ShapeError("laplacian_solve: bad demand size");

  // Project out per-component imbalance; reject if it is non-trivial.
  Vector bp = b;
  std::vector<double> sum(static_cast<size_t>(component_count_), 0.0);
  std::vector<double> cnt(static_cast<size_t>(component_count_), 0.0);
  for (int u = 0; u < n_; ++u) {
    sum[static_cast<size_t>(component_[u])] += b[u];
    cnt[static_cast<size_t>(component_[u])] += 1.0;
  }
  const double tol = 1e-9 * (1.0 + b.cwiseAbs().sum());
  for (int c = 0; c < component_count_; ++c) {
    if (std::abs(sum[static_cast<size_t>(c)]) > tol)
      throw InfeasibleDemand("demands do not balance on a connected component");
  }
  for (int u = 0; u < n_; ++u)
    bp[u] -= sum[static_cast<size_t>(component_[u])] /
             cnt[static_cast<size_t>(component_[u])];

  bool converged = false;
  double achieved = 0.0;
  Vector x = pcg(bp, eps, converged, achieved);
  if (!converged) {
    if (n_ <= 2000) {
      x = dense_solve(bp);
    } else {
      throw SolverFailure("laplacian_solve: CG did not converge", achieved);
    }
  }
  // Mean-zero per component.
  std::vector<double> xs(static_cast<size_t>(component_count_), 0.0);
  for (int u = 0; u < n_; ++u) xs[static_cast<size_t>(component_[u])] += x[u];
  for (int u = 0; u < n_; ++u)
    x[u] -= xs[static_cast<size_t>(component_[u])] /
            cnt[static_cast<size_t>(component_[u])];
  return x;
}

ProjectionResult GraphOperator::cycle_project(const Vector& g,
                                              double eps) const {
  Vector btg = incidence_transpose_apply(g);
  Vector psi = laplacian_solve(btg, eps);
  ProjectionResult out;
  out.potential = psi;
  out.cycle_part = g - incidence_apply(psi);
  out.residual_norm = incidence_transpose_apply(out.cycle_part).norm();
  return out;
}

FlowVector GraphOperator::electrical_flow(const DemandVector& b,
                                          double eps) const {
  return incidence_apply(laplacian_solve(b, eps));
}

}  // namespace pnf
