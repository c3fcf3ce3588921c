#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "pnf/generators.hpp"
#include "pnf/instance.hpp"

namespace testutil {

inline Eigen::MatrixXd dense_incidence(int n, const std::vector<pnf::Edge>& edges) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(edges.size()), n);
  for (size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].self_loop()) continue;
    B(static_cast<Eigen::Index>(i), edges[i].u) = 1.0;
    B(static_cast<Eigen::Index>(i), edges[i].v) = -1.0;
  }
  return B;
}

/// Dense cycle-space projection (I - B L^+ B^T) g.
inline pnf::Vector dense_cycle_project(int n, const std::vector<pnf::Edge>& edges,
                                       const pnf::Vector& g) {
  Eigen::MatrixXd B = dense_incidence(n, edges);
  Eigen::VectorXd psi = B.completeOrthogonalDecomposition().solve(g);
  return g - B * psi;
}

/// 1-D golden-section maximization of a unimodal function on [lo, hi].
template <typename F>
double golden_max(F f, double lo, double hi, int iters = 200) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

/// Residue check: ||B^T f - b||_inf <= tol * (1 + ||b||_inf).
inline bool residues_match(const pnf::Instance& inst, const pnf::FlowVector& f,
                           const pnf::DemandVector& b, double tol = 1e-8) {
  const pnf::DemandVector r = pnf::residues(inst, f) - b;
  const double scale = 1.0 + (b.size() ? b.cwiseAbs().maxCoeff() : 0.0);
  return (r.size() == 0 || r.cwiseAbs().maxCoeff() <= tol * scale);
}

/// Brute-force minimum conductance over all vertex bipartitions of a piece
/// (<= ~20 vertices), with volumes measured by degrees within the piece.
inline double brute_force_conductance(const std::vector<pnf::Edge>& edges,
                                      const std::vector<int>& vertices) {
  const int k = static_cast<int>(vertices.size());
  if (k < 2) return std::numeric_limits<double>::infinity();
  std::vector<int> id(vertices.begin(), vertices.end());
  auto local = [&](int v) {
    for (int i = 0; i < k; ++i)
      if (id[static_cast<size_t>(i)] == v) return i;
    return -1;
  };
  struct E2 {
    int a, b;
  };
  std::vector<E2> es;
  std::vector<double> deg(static_cast<size_t>(k), 0.0);
  for (const auto& e : edges) {
    if (e.self_loop()) continue;
    const int a = local(e.u), b = local(e.v);
    if (a < 0 || b < 0) continue;
    es.push_back({a, b});
    deg[static_cast<size_t>(a)] += 1.0;
    deg[static_cast<size_t>(b)] += 1.0;
  }
  double total = 0.0;
  for (double d : deg) total += d;
  double best = std::numeric_limits<double>::infinity();
  for (uint64_t mask = 1; mask + 1 < (uint64_t{1} << k); ++mask) {
    double vol = 0.0;
    for (int i = 0; i < k; ++i)
      if (mask >> i & 1) vol += deg[static_cast<size_t>(i)];
    const double denom = std::min(vol, total - vol);
    if (denom <= 0.0) continue;
    double cut = 0.0;
    for (const E2& e : es)
      if (((mask >> e.a) & 1) != ((mask >> e.b) & 1)) cut += 1.0;
    best = std::min(best, cut / denom);
  }
  return best;
}

/// Fiedler sweep-cut upper bound on conductance: order vertices by the
/// degree-scaled second eigenvector of the normalized Laplacian and take the
/// best prefix cut. Usable where 2^n cut enumeration is not.
inline double sweep_conductance(const std::vector<pnf::Edge>& edges, int n) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd deg = Eigen::VectorXd::Zero(n);
  for (const auto& e : edges) {
    if (e.self_loop()) continue;
    A(e.u, e.v) += 1.0;
    A(e.v, e.u) += 1.0;
    deg[e.u] += 1.0;
    deg[e.v] += 1.0;
  }
  Eigen::MatrixXd N = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (deg[i] > 0.0 && deg[j] > 0.0) N(i, j) -= A(i, j) / std::sqrt(deg[i] * deg[j]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(N);
  const Eigen::VectorXd x = eig.eigenvectors().col(1);
  std::vector<int> ord(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) ord[static_cast<size_t>(i)] = i;
  std::sort(ord.begin(), ord.end(), [&](int a, int b) {
    const double xa = deg[a] > 0.0 ? x[a] / std::sqrt(deg[a]) : 0.0;
    const double xb = deg[b] > 0.0 ? x[b] / std::sqrt(deg[b]) : 0.0;
    return xa < xb;
  });
  std::vector<char> in(static_cast<size_t>(n), 0);
  double best = std::numeric_limits<double>::infinity();
  double volS = 0.0;
  const double total = deg.sum();
  for (int k = 0; k + 1 < n; ++k) {
    const int v = ord[static_cast<size_t>(k)];
    in[static_cast<size_t>(v)] = 1;
    volS += deg[v];
    double cut = 0.0;
    for (const auto& e : edges) {
      if (e.self_loop()) continue;
      if (in[static_cast<size_t>(e.u)] != in[static_cast<size_t>(e.v)]) cut += 1.0;
    }
    const double denom = std::min(volS, total - volS);
    if (denom > 0.0) best = std::min(best, cut / denom);
  }
  return best;
}

}  // namespace testutil
