#pragma once

#include <vector>

#include "pnf/instance.hpp"

namespace pnf {

struct DecomposeConfig {
  double c_partition = 1.0;
  // Uniformity assertion bound exponents: log^{a}n * log^{b}(n/delta).
  double uniform_log_n_exp = 14.0;
  double uniform_log_delta_exp = 5.0;
};

enum class PieceKind { kUniform, kTiny };

/// One vertex-disjoint subgraph from the decomposition: an expander whose
/// projected gradient is either roughly uniform or has negligible norm (in
/// which case it is zeroed).
struct ExpanderPiece {
  std::vector<int> vertices;
  std::vector<int> edge_indices;  // indices into the source instance
  double phi_estimate = 0.0;      // conductance lower bound for the piece
  PieceKind kind = PieceKind::kUniform;
  double alpha = 0.0;             // measured: m_i * max ghat_e^2 / ||ghat||^2
  double tiny_norm2 = 0.0;        // ||ghat||^2 before zeroing, TINY only
  Vector ghat;                    // cycle-space gradient, zeroed when TINY
};

/// Partitions the vertices so each part induces conductance >= phi with
/// respect to the degree weights d (d_u >= deg(u)); recursive spectral
/// bisection with sweep cuts. Isolated vertices become singleton parts.
std::vector<std::vector<int>> expander_decompose(
    int vertex_count, const std::vector<Edge>& edges,
    const std::vector<int>& edge_subset, const std::vector<double>& d,
    double phi);

/// Conductance of the cut (inside, outside) within the graph induced by
/// edge_subset, volumes measured with d. Returns +inf for trivial cuts.
double cut_conductance(const std::vector<Edge>& edges,
                       const std::vector<int>& edge_subset,
                       const std::vector<char>& inside,
                       const std::vector<double>& d);

/// Decomposition into uniform expanders: trim low-degree vertices, then
/// alternate between dropping high-energy gradient edges and expander
/// partitioning, recursion depth L = log(n/delta). Covered pieces hold at
/// least half of the edges on well-behaved inputs (asserted in tests, not
/// here). Pieces classified TINY get their cycle gradient zeroed.
std::vector<ExpanderPiece> decompose(const Instance& inst, double delta,
                                     const DecomposeConfig& cfg = {});

}  // namespace pnf
