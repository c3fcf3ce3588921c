#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pnf/instance.hpp"

namespace pnf {

/// Text graph format:
///   pnf <n> <m> <p>
///   s <value>            (global lp scalar, default 1)
///   e <u> <v> [g] [r] [s]  (0-based vertices, defaults g=0 r=0 s=global; u=v allowed)
///   d <u> <value>
///   # comment
/// Demands must sum to zero within 1e-9. The optional per-edge s column is
/// an extension used when writing sparsifier outputs, whose lp weights are
/// not uniform.
struct GraphFile {
  int vertex_count = 0;
  double p = 2.0;
  double s_scalar = 1.0;
  std::vector<Edge> edges;
  Vector gradient;
  Vector resistance;
  Vector s_per_edge;  // empty means uniform s_scalar
  DemandVector demands;
  std::vector<char> demand_set;  // vertices that appeared on a 'd' line

  Instance instance() const;
};

/// `require_balanced` enforces the zero-sum demand invariant; label-style
/// uses (ssl mode) read the same format with it disabled.
GraphFile parse_graph_file(std::istream& in, bool require_balanced = true);
GraphFile read_graph_file(const std::string& path, bool require_balanced = true);
void write_graph_file(const GraphFile& gf, std::ostream& out);
void write_graph_file(const GraphFile& gf, const std::string& path);

/// Machine-readable key/value result: scalar fields in order, then one
/// `f <index> <value>` line per edge.
struct ResultFile {
  std::vector<std::pair<std::string, std::string>> fields;
  FlowVector flow;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);
  const std::string* find(const std::string& key) const;
  double number(const std::string& key) const;  // throws if absent/non-numeric
};

ResultFile parse_result_file(std::istream& in);
ResultFile read_result_file(const std::string& path);
void write_result_file(const ResultFile& rf, std::ostream& out);
void write_result_file(const ResultFile& rf, const std::string& path);

struct TraceRow {
  int iter = 0;
  double objective = 0.0;
  double residual_obj = 0.0;
  double elapsed_ms = 0.0;
};

/// CSV with header `iter,objective,residual_obj,elapsed_ms`.
void write_trace(const std::vector<TraceRow>& rows, std::ostream& out);
void write_trace(const std::vector<TraceRow>& rows, const std::string& path);

/// DIMACS max-flow import: `p max <n> <m>`, `n <id> s|t`, `a <u> <v> <cap>`
/// (1-based). Arcs map to unit undirected edges; capacities beyond 1 are
/// ignored. Returns the graph plus (source, sink), 0-based.
struct DimacsMaxflow {
  GraphFile graph;
  int source = -1;
  int sink = -1;
};

DimacsMaxflow parse_dimacs_maxflow(std::istream& in);

/// Format a double with enough digits to round-trip exactly.
std::string format_double(double x);

}  // namespace pnf
