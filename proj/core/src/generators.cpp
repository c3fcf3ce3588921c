#include "pnf/generators.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "pnf/errors.hpp"

namespace pnf {

namespace {

bool is_connected(int n, const std::vector<Edge>& edges) {
  if (n <= 1) return true;
  std::vector<std::vector<int>> adj(static_cast<size_t>(n));
  for (const Edge& e : edges)
    if (!e.self_loop()) {
      adj[static_cast<size_t>(e.u)].push_back(e.v);
      adj[static_cast<size_t>(e.v)].push_back(e.u);
    }
  std::vector<char> seen(static_cast<size_t>(n), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj[static_cast<size_t>(u)])
      if (!seen[static_cast<size_t>(v)]) {
        seen[static_cast<size_t>(v)] = 1;
        ++count;
        stack.push_back(v);
      }
  }
  return count == n;
}

}  // namespace

GeneratedGraph make_grid(int rows, int cols) {
  if (rows < 1 || cols < 1) throw ShapeError("make_grid: empty grid");
  GeneratedGraph g;
  g.vertex_count = rows * cols;
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) g.edges.push_back({id(r, c), id(r, c + 1)});
      if (r + 1 < rows) g.edges.push_back({id(r, c), id(r + 1, c)});
    }
  return g;
}

GeneratedGraph make_random_regular(int n, int d, uint64_t seed) {
  if (n < 2 || d < 1 || (n * d) % 2 != 0 || d >= n)
    throw ShapeError("make_random_regular: need 2 <= d+1 <= n, n*d even");
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 200; ++attempt) {
    std::vector<int> stubs;
    stubs.reserve(static_cast<size_t>(n) * static_cast<size_t>(d));
    for (int v = 0; v < n; ++v)
      for (int k = 0; k < d; ++k) stubs.push_back(v);
    std::shuffle(stubs.begin(), stubs.end(), rng);
    std::vector<Edge> edges;
    for (size_t i = 0; i + 1 < stubs.size(); i += 2)
      edges.push_back({std::min(stubs[i], stubs[i + 1]),
                       std::max(stubs[i], stubs[i + 1])});

    // Repair self-loops and parallel edges by degree-preserving double
    // swaps; a fresh pairing is almost never simple once n*d grows.
    auto count_of = [&]() {
      std::map<std::pair<int, int>, int> c;
      for (const Edge& e : edges) ++c[{e.u, e.v}];
      return c;
    };
    std::map<std::pair<int, int>, int> cnt = count_of();
    auto is_bad = [&](const Edge& e) {
      return e.self_loop() || cnt[{e.u, e.v}] > 1;
    };
    std::uniform_int_distribution<size_t> pick(0, edges.size() - 1);
    bool ok = true;
    for (size_t i = 0; i < edges.size(); ++i) {
      int guard = 0;
      while (is_bad(edges[i])) {
        if (++guard > 5000) {
          ok = false;
          break;
        }
        const size_t j = pick(rng);
        if (j == i) continue;
        const Edge a = edges[i], b = edges[j];
        const bool flip = rng() & 1;
        const Edge na{std::min(a.u, flip ? b.v : b.u),
                      std::max(a.u, flip ? b.v : b.u)};
        const Edge nb{std::min(a.v, flip ? b.u : b.v),
                      std::max(a.v, flip ? b.u : b.v)};
        if (na.self_loop() || nb.self_loop()) continue;
        if (cnt[{na.u, na.v}] > 0 || cnt[{nb.u, nb.v}] > 0) continue;
        if (na.u == nb.u && na.v == nb.v) continue;
        --cnt[{a.u, a.v}];
        --cnt[{b.u, b.v}];
        ++cnt[{na.u, na.v}];
        ++cnt[{nb.u, nb.v}];
        edges[i] = na;
        edges[j] = nb;
      }
      if (!ok) break;
    }
    if (ok && is_connected(n, edges)) {
      GeneratedGraph g;
      g.vertex_count = n;
      g.edges = std::move(edges);
      return g;
    }
  }
  throw SolverFailure("make_random_regular: no simple connected matching found", 0.0);
}

GeneratedGraph make_cliques_with_bridges(int clique_size, int count) {
  if (clique_size < 2 || count < 1)
    throw ShapeError("make_cliques_with_bridges: need clique_size >= 2, count >= 1");
  GeneratedGraph g;
  g.vertex_count = clique_size * count;
  for (int k = 0; k < count; ++k) {
    const int base = k * clique_size;
    for (int i = 0; i < clique_size; ++i)
      for (int j = i + 1; j < clique_size; ++j)
        g.edges.push_back({base + i, base + j});
    if (k + 1 < count) g.edges.push_back({base + clique_size - 1, base + clique_size});
  }
  return g;
}

GeneratedGraph make_recursive_tree(int n, uint64_t seed) {
  if (n < 1) throw ShapeError("make_recursive_tree: empty");
  std::mt19937_64 rng(seed);
  GeneratedGraph g;
  g.vertex_count = n;
  for (int v = 1; v < n; ++v) {
    std::uniform_int_distribution<int> pick(0, v - 1);
    const int u = pick(rng);
    g.edges.push_back({std::min(u, v), std::max(u, v)});
  }
  return g;
}

GeneratedGraph make_random_connected(int n, int m, uint64_t seed) {
  if (n < 1 || m < n - 1) throw ShapeError("make_random_connected: m < n-1");
  std::mt19937_64 rng(seed);
  GeneratedGraph g = make_recursive_tree(n, rng());
  std::set<std::pair<int, int>> used;
  for (const Edge& e : g.edges) used.insert({e.u, e.v});
  const long long max_simple = static_cast<long long>(n) * (n - 1) / 2;
  std::uniform_int_distribution<int> pick(0, n - 1);
  while (static_cast<int>(g.edges.size()) < m) {
    const int a = pick(rng), b = pick(rng);
    if (a == b) continue;
    const int u = std::min(a, b), v = std::max(a, b);
    if (static_cast<long long>(used.size()) < max_simple && !used.insert({u, v}).second)
      continue;  // stay simple while simple edges remain
    g.edges.push_back({u, v});
  }
  return g;
}

Instance make_random_instance(const GeneratedGraph& g, double p, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int m = static_cast<int>(g.edges.size());
  Vector grad(m), r(m);
  for (int i = 0; i < m; ++i) {
    grad[i] = 2.0 * uni(rng) - 1.0;
    r[i] = 0.1 + uni(rng);
  }
  const double s = 0.1 + uni(rng);
  return Instance(g.vertex_count, g.edges, std::move(grad), std::move(r), s, p);
}

DemandVector make_random_demand(int n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  DemandVector b(n);
  for (int v = 0; v < n; ++v) b[v] = uni(rng);
  b.array() -= b.sum() / static_cast<double>(n);
  return b;
}

}  // namespace pnf
