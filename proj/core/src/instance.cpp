#include "pnf/instance.hpp"

#include <algorithm>
#include <cmath>

namespace pnf {

namespace {

std::vector<Edge> normalize_orientation(std::vector<Edge> edges, Vector& g,
                                        FlowVector* /*unused*/ = nullptr) {
  // Orientation is fixed as (min,max) endpoint order; flipping an edge
  // negates its gradient entry so that g.f is preserved for the flow that
  // flips sign with it.
  for (size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].u > edges[i].v) {
      std::swap(edges[i].u, edges[i].v);
      g[static_cast<Eigen::Index>(i)] = -g[static_cast<Eigen::Index>(i)];
    }
  }
  return edges;
}

}  // namespace

Instance::Instance(int vertex_count, std::vector<Edge> edges, Vector gradient,
                   Vector resistance, double s_scalar, double p)
    : Instance(vertex_count, std::move(edges), std::move(gradient),
               std::move(resistance),
               Vector::Constant(static_cast<Eigen::Index>(0), 0.0), p) {
  s_ = Vector::Constant(static_cast<Eigen::Index>(edges_.size()), s_scalar);
  validate();
}

Instance::Instance(int vertex_count, std::vector<Edge> edges, Vector gradient,
                   Vector resistance, Vector s_per_edge, double p)
    : n_(vertex_count),
      edges_(std::move(edges)),
      g_(std::move(gradient)),
      r_(std::move(resistance)),
      s_(std::move(s_per_edge)),
      p_(p) {
  edges_ = normalize_orientation(std::move(edges_), g_);
  if (s_.size() == static_cast<Eigen::Index>(edges_.size())) validate();
  // else: delegated constructor fills s_ and validates.
}

void Instance::validate() const {
  const auto m = static_cast<Eigen::Index>(edges_.size());
  if (g_.size() != m || r_.size() != m || s_.size() != m)
    throw ShapeError("instance vectors must match edge count");
  if (p_ < 2.0) throw ShapeError("exponent p must be >= 2");
  for (const Edge& e : edges_) {
    if (e.u < 0 || e.v < 0 || e.u >= n_ || e.v >= n_)
      throw ShapeError("edge endpoint out of range");
  }
  if ((r_.array() < 0).any()) throw ShapeError("resistances must be >= 0");
  if ((s_.array() < 0).any()) throw ShapeError("s weights must be >= 0");
}

bool Instance::uniform_s(double rel_tol) const {
  if (s_.size() == 0) return true;
  const double lo = s_.minCoeff();
  const double hi = s_.maxCoeff();
  return hi - lo <= rel_tol * std::max(1.0, hi);
}

double Instance::s_scalar() const {
  if (!uniform_s()) throw ShapeError("instance does not have uniform s");
  return s_.size() == 0 ? 0.0 : s_[0];
}

bool Instance::has_self_loops() const {
  return std::any_of(edges_.begin(), edges_.end(),
                     [](const Edge& e) { return e.self_loop(); });
}

double abs_pow(double x, double p) {
  double ax = std::abs(x);
  const int ip = static_cast<int>(p);
  if (p == static_cast<double>(ip) && ip >= 0 && ip <= 64) {
    // Exponentiation by squaring; p is a small integer on every hot path.
    double acc = 1.0;
    for (int e = ip; e > 0; e >>= 1, ax *= ax)
      if (e & 1) acc *= ax;
    return acc;
  }
  return std::pow(ax, p);
}

double smoothed_power(double r, double s, double x, double p) {
  return r * x * x + s * abs_pow(x, p);
}

double smoothed_norm(const Vector& r, double s, const Vector& x, double p) {
  if (r.size() != x.size()) throw ShapeError("smoothed_norm: length mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    acc += smoothed_power(r[i], s, x[i], p);
  return acc;
}

double smoothed_norm(const Vector& r, const Vector& s, const Vector& x,
                     double p) {
  if (r.size() != x.size() || s.size() != x.size())
    throw ShapeError("smoothed_norm: length mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    acc += smoothed_power(r[i], s[i], x[i], p);
  return acc;
}

double smoothed_power_grad(double r, double s, double x, double p) {
  return 2.0 * r * x + p * s * (x == 0.0 ? 0.0 : abs_pow(x, p - 2.0) * x);
}

Vector smoothed_norm_grad(const Vector& r, const Vector& s, const Vector& x,
                          double p) {
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    out[i] = smoothed_power_grad(r[i], s[i], x[i], p);
  return out;
}

double objective(const Instance& inst, const FlowVector& f) {
  if (f.size() != inst.edge_count())
    throw ShapeError("objective: flow does not match instance");
  return inst.gradient().dot(f) -
         smoothed_norm(inst.resistance(), inst.s(), f, inst.p());
}

DemandVector residues(const Instance& inst, const FlowVector& f) {
  if (f.size() != inst.edge_count())
    throw ShapeError("residues: flow does not match instance");
  DemandVector b = DemandVector::Zero(inst.vertex_count());
  for (int i = 0; i < inst.edge_count(); ++i) {
    const Edge& e = inst.edge(i);
    if (e.self_loop()) continue;
    b[e.u] += f[i];
    b[e.v] -= f[i];
  }
  return b;
}

Instance union_instances(const Instance& g1, const Instance& g2) {
  if (g1.vertex_count() != g2.vertex_count())
    throw ShapeError("union: vertex counts differ");
  if (g1.edge_count() > 0 && g2.edge_count() > 0 && g1.p() != g2.p())
    throw ShapeError("union: exponents differ");
  std::vector<Edge> edges = g1.edges();
  edges.insert(edges.end(), g2.edges().begin(), g2.edges().end());
  const Eigen::Index m1 = g1.edge_count(), m2 = g2.edge_count();
  Vector g(m1 + m2), r(m1 + m2), s(m1 + m2);
  g << g1.gradient(), g2.gradient();
  r << g1.resistance(), g2.resistance();
  s << g1.s(), g2.s();
  const double p = g1.edge_count() > 0 ? g1.p() : g2.p();
  return Instance(g1.vertex_count(), std::move(edges), std::move(g),
                  std::move(r), std::move(s), p);
}

}  // namespace pnf
