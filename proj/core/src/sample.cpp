#include "pnf/sample.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "pnf/errors.hpp"
#include "pnf/graph_operator.hpp"

namespace pnf {

namespace {

// Sampled edges must span every vertex the piece touches, otherwise the
// electrical reconstruction cannot carry arbitrary piece residues.
bool spans_piece(const Instance& piece, const std::vector<int>& sampled) {
  const int n = piece.vertex_count();
  std::vector<int> parent(static_cast<size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<size_t>(x)] != x) {
      parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
      x = parent[static_cast<size_t>(x)];
    }
    return x;
  };
  for (int ei : sampled) {
    const Edge& e = piece.edge(ei);
    parent[static_cast<size_t>(find(e.u))] = find(e.v);
  }
  int rep = -1;
  for (int i = 0; i < piece.edge_count(); ++i) {
    const Edge& e = piece.edge(i);
    for (int v : {e.u, e.v}) {
      const int r = find(v);
      if (rep < 0) rep = r;
      if (r != rep) return false;
    }
  }
  return true;
}

// Adds unsampled piece edges (in random order) until the sample spans every
// vertex the piece touches. At most #components-1 edges are added.
void connect_sample(const Instance& piece, std::vector<int>& sampled,
                    std::mt19937_64& rng) {
  const int n = piece.vertex_count();
  std::vector<int> parent(static_cast<size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<size_t>(x)] != x) {
      parent[static_cast<size_t>(x)] =
          parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
      x = parent[static_cast<size_t>(x)];
    }
    return x;
  };
  std::vector<char> in_sample(static_cast<size_t>(piece.edge_count()), 0);
  for (int ei : sampled) {
    in_sample[static_cast<size_t>(ei)] = 1;
    const Edge& e = piece.edge(ei);
    parent[static_cast<size_t>(find(e.u))] = find(e.v);
  }
  std::vector<int> rest;
  for (int i = 0; i < piece.edge_count(); ++i)
    if (!in_sample[static_cast<size_t>(i)]) rest.push_back(i);
  std::shuffle(rest.begin(), rest.end(), rng);
  for (int ei : rest) {
    const Edge& e = piece.edge(ei);
    const int ru = find(e.u), rv = find(e.v);
    if (ru == rv) continue;
    parent[static_cast<size_t>(ru)] = rv;
    sampled.push_back(ei);
  }
  std::sort(sampled.begin(), sampled.end());
}

}  // namespace

SampleResult sample_and_fix_gradient(const Instance& piece, double tau,
                                     std::mt19937_64& rng,
                                     const SampleConfig& cfg) {
  if (!(tau > 0.0 && tau <= 1.0))
    throw ShapeError("sample_and_fix_gradient: tau must lie in (0, 1]");
  const int n = piece.vertex_count();
  const Eigen::Index m = piece.edge_count();
  const double p = piece.p();

  SampleResult out;
  auto source_op = std::make_shared<GraphOperator>(n, piece.edges());
  const auto proj = source_op->cycle_project(piece.gradient());
  out.ghat_source = proj.cycle_part;
  const Vector& psi = proj.potential;

  std::vector<int> sampled;
  std::bernoulli_distribution keep(tau);
  for (int attempt = 0;; ++attempt) {
    sampled.clear();
    if (tau >= 1.0) {
      for (int i = 0; i < m; ++i) sampled.push_back(i);
    } else {
      for (int i = 0; i < m; ++i)
        if (keep(rng)) sampled.push_back(i);
    }
    if (spans_piece(piece, sampled)) break;
    if (attempt >= cfg.max_resamples) {
      // Connect the last draw with extra piece edges; keeping the whole
      // piece would defeat the sparsification it exists to provide.
      out.resamples = attempt;
      connect_sample(piece, sampled, rng);
      break;
    }
    out.resamples = attempt + 1;
  }

  std::vector<Edge> h_edges;
  Vector til_g(static_cast<Eigen::Index>(sampled.size()));
  Vector h_r(static_cast<Eigen::Index>(sampled.size()));
  Vector h_s(static_cast<Eigen::Index>(sampled.size()));
  for (size_t k = 0; k < sampled.size(); ++k) {
    const int ei = sampled[k];
    h_edges.push_back(piece.edge(ei));
    til_g[static_cast<Eigen::Index>(k)] = out.ghat_source[ei];
    h_r[static_cast<Eigen::Index>(k)] = tau * piece.resistance()[ei];
    h_s[static_cast<Eigen::Index>(k)] = std::pow(tau, p) * piece.s()[ei];
  }
  auto sampled_op = std::make_shared<GraphOperator>(n, h_edges);
  out.ghat_sampled = sampled_op->cycle_project(til_g).cycle_part;
  // A near-tree sample has no cycle space to carry the gradient; a round-off
  // remnant would blow up the 1/|ghat|^2 coefficient in the electrical maps.
  if (out.ghat_sampled.squaredNorm() <=
      1e-12 * out.ghat_source.squaredNorm())
    out.ghat_sampled.setZero();

  // g^H = ghat^H + B^H psi, with the potential part shared with the source.
  Vector h_g = out.ghat_sampled + sampled_op->incidence_apply(psi);
  out.sampled = Instance(n, h_edges, std::move(h_g), std::move(h_r),
                         std::move(h_s), p);
  out.edge_index = sampled;

  out.to_sampled = FlowMap::electrical(sampled_op, piece.edges(),
                                       out.ghat_sampled, out.ghat_source,
                                       cfg.kappa_sample);
  out.to_source = FlowMap::electrical(source_op, h_edges, out.ghat_source,
                                      out.ghat_sampled, cfg.kappa_sample);
  return out;
}

}  // namespace pnf
