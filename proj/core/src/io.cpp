#include "pnf/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pnf/errors.hpp"

namespace pnf {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream ss(line);
  std::string t;
  while (ss >> t) toks.push_back(t);
  return toks;
}

double parse_number(const std::string& tok, int line) {
  try {
    size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    if (!std::isfinite(v)) throw ParseError("non-finite number '" + tok + "'", line);
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError("expected a number, got '" + tok + "'", line);
  }
}

int parse_int(const std::string& tok, int line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw ParseError("expected an integer, got '" + tok + "'", line);
  return v;
}

int parse_vertex(const std::string& tok, int n, int line) {
  const int v = parse_int(tok, line);
  if (v < 0 || v >= n)
    throw ParseError("vertex " + tok + " out of range [0, " + std::to_string(n) + ")", line);
  return v;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing", 0);
  return out;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char cand[64];
    std::snprintf(cand, sizeof cand, "%.*g", prec, x);
    double back = 0.0;
    std::sscanf(cand, "%lf", &back);
    if (back == x) return cand;
  }
  return buf;
}

Instance GraphFile::instance() const {
  if (s_per_edge.size() > 0)
    return Instance(vertex_count, edges, gradient, resistance, s_per_edge, p);
  return Instance(vertex_count, edges, gradient, resistance, s_scalar, p);
}

GraphFile parse_graph_file(std::istream& in, bool require_balanced) {
  GraphFile gf;
  bool have_header = false;
  int m_declared = 0;
  bool any_edge_s = false;
  std::vector<Edge> edges;
  std::vector<double> g, r, s;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto toks = tokenize(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks[0] == "pnf") {
      if (have_header) throw ParseError("duplicate header", lineno);
      if (toks.size() != 4) throw ParseError("header needs 'pnf <n> <m> <p>'", lineno);
      gf.vertex_count = parse_int(toks[1], lineno);
      m_declared = parse_int(toks[2], lineno);
      gf.p = parse_number(toks[3], lineno);
      if (gf.vertex_count < 0 || m_declared < 0)
        throw ParseError("negative n or m", lineno);
      gf.demands = DemandVector::Zero(gf.vertex_count);
      gf.demand_set.assign(static_cast<size_t>(gf.vertex_count), 0);
      have_header = true;
    } else if (!have_header) {
      throw ParseError("'" + toks[0] + "' before the pnf header", lineno);
    } else if (toks[0] == "s") {
      if (toks.size() != 2) throw ParseError("'s' needs one value", lineno);
      gf.s_scalar = parse_number(toks[1], lineno);
      if (gf.s_scalar < 0.0) throw ParseError("negative s", lineno);
    } else if (toks[0] == "e") {
      if (toks.size() < 3 || toks.size() > 6)
        throw ParseError("'e' needs '<u> <v> [g] [r] [s]'", lineno);
      const int u = parse_vertex(toks[1], gf.vertex_count, lineno);
      const int v = parse_vertex(toks[2], gf.vertex_count, lineno);
      const double ge = toks.size() > 3 ? parse_number(toks[3], lineno) : 0.0;
      const double re = toks.size() > 4 ? parse_number(toks[4], lineno) : 0.0;
      if (re < 0.0) throw ParseError("negative resistance", lineno);
      // Instance normalizes endpoints to (min,max); keep the gradient aligned.
      edges.push_back({std::min(u, v), std::max(u, v)});
      g.push_back(u <= v ? ge : -ge);
      r.push_back(re);
      if (toks.size() > 5) {
        const double se = parse_number(toks[5], lineno);
        if (se < 0.0) throw ParseError("negative s", lineno);
        any_edge_s = true;
        s.push_back(se);
      } else {
        s.push_back(-1.0);  // placeholder: global scalar
      }
    } else if (toks[0] == "d") {
      if (toks.size() != 3) throw ParseError("'d' needs '<u> <value>'", lineno);
      const int u = parse_vertex(toks[1], gf.vertex_count, lineno);
      gf.demands[u] += parse_number(toks[2], lineno);
      gf.demand_set[static_cast<size_t>(u)] = 1;
    } else {
      throw ParseError("unknown directive '" + toks[0] + "'", lineno);
    }
  }
  if (!have_header) throw ParseError("missing 'pnf <n> <m> <p>' header", lineno == 0 ? 1 : lineno);
  if (static_cast<int>(edges.size()) != m_declared)
    throw ParseError("header declares " + std::to_string(m_declared) + " edges but file has " +
                         std::to_string(edges.size()),
                     lineno);
  const double dsum = gf.demands.size() > 0 ? gf.demands.sum() : 0.0;
  if (require_balanced && std::abs(dsum) > 1e-9)
    throw InfeasibleDemand("demands sum to " + format_double(dsum) + ", expected 0");
  gf.edges = std::move(edges);
  gf.gradient = Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
  gf.resistance = Eigen::Map<const Vector>(r.data(), static_cast<Eigen::Index>(r.size()));
  if (any_edge_s) {
    gf.s_per_edge.resize(static_cast<Eigen::Index>(s.size()));
    for (size_t i = 0; i < s.size(); ++i)
      gf.s_per_edge[static_cast<Eigen::Index>(i)] =
          s[i] < 0.0 ? gf.s_scalar : s[i];
  }
  return gf;
}

GraphFile read_graph_file(const std::string& path, bool require_balanced) {
  auto in = open_in(path);
  return parse_graph_file(in, require_balanced);
}

void write_graph_file(const GraphFile& gf, std::ostream& out) {
  out << "pnf " << gf.vertex_count << ' ' << gf.edges.size() << ' '
      << format_double(gf.p) << '\n';
  if (gf.s_scalar != 1.0) out << "s " << format_double(gf.s_scalar) << '\n';
  for (size_t i = 0; i < gf.edges.size(); ++i) {
    out << "e " << gf.edges[i].u << ' ' << gf.edges[i].v;
    const auto ei = static_cast<Eigen::Index>(i);
    const double ge = gf.gradient.size() ? gf.gradient[ei] : 0.0;
    const double re = gf.resistance.size() ? gf.resistance[ei] : 0.0;
    const bool has_s = gf.s_per_edge.size() > 0 && gf.s_per_edge[ei] != gf.s_scalar;
    if (ge != 0.0 || re != 0.0 || has_s) out << ' ' << format_double(ge);
    if (re != 0.0 || has_s) out << ' ' << format_double(re);
    if (has_s) out << ' ' << format_double(gf.s_per_edge[ei]);
    out << '\n';
  }
  for (Eigen::Index v = 0; v < gf.demands.size(); ++v)
    if (gf.demands[v] != 0.0)
      out << "d " << v << ' ' << format_double(gf.demands[v]) << '\n';
}

void write_graph_file(const GraphFile& gf, const std::string& path) {
  auto out = open_out(path);
  write_graph_file(gf, out);
}

void ResultFile::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : fields)
    if (k == key) {
      v = value;
      return;
    }
  fields.push_back({key, value});
}

void ResultFile::set(const std::string& key, double value) {
  set(key, format_double(value));
}

void ResultFile::set(const std::string& key, long long value) {
  set(key, std::to_string(value));
}

const std::string* ResultFile::find(const std::string& key) const {
  for (const auto& [k, v] : fields)
    if (k == key) return &v;
  return nullptr;
}

double ResultFile::number(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) throw ParseError("missing result field '" + key + "'", 0);
  return parse_number(*v, 0);
}

ResultFile parse_result_file(std::istream& in) {
  ResultFile rf;
  std::vector<std::pair<int, double>> flow;
  int max_index = -1;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto toks = tokenize(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks[0] == "f") {
      if (toks.size() != 3) throw ParseError("'f' needs '<index> <value>'", lineno);
      const int i = parse_int(toks[1], lineno);
      if (i < 0) throw ParseError("negative flow index", lineno);
      flow.push_back({i, parse_number(toks[2], lineno)});
      max_index = std::max(max_index, i);
    } else {
      if (toks.size() < 2) throw ParseError("'" + toks[0] + "' needs a value", lineno);
      std::string val = toks[1];
      for (size_t i = 2; i < toks.size(); ++i) val += " " + toks[i];
      rf.set(toks[0], val);
    }
  }
  rf.flow = FlowVector::Zero(max_index + 1);
  for (auto [i, v] : flow) rf.flow[i] = v;
  return rf;
}

ResultFile read_result_file(const std::string& path) {
  auto in = open_in(path);
  return parse_result_file(in);
}

void write_result_file(const ResultFile& rf, std::ostream& out) {
  for (const auto& [k, v] : rf.fields) out << k << ' ' << v << '\n';
  for (Eigen::Index i = 0; i < rf.flow.size(); ++i)
    out << "f " << i << ' ' << format_double(rf.flow[i]) << '\n';
}

void write_result_file(const ResultFile& rf, const std::string& path) {
  auto out = open_out(path);
  write_result_file(rf, out);
}

void write_trace(const std::vector<TraceRow>& rows, std::ostream& out) {
  out << "iter,objective,residual_obj,elapsed_ms\n";
  for (const TraceRow& row : rows)
    out << row.iter << ',' << format_double(row.objective) << ','
        << format_double(row.residual_obj) << ',' << format_double(row.elapsed_ms)
        << '\n';
}

void write_trace(const std::vector<TraceRow>& rows, const std::string& path) {
  auto out = open_out(path);
  write_trace(rows, out);
}

DimacsMaxflow parse_dimacs_maxflow(std::istream& in) {
  DimacsMaxflow out;
  bool have_header = false;
  int n = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto toks = tokenize(line);
    if (toks.empty() || toks[0] == "c") continue;
    if (toks[0] == "p") {
      if (toks.size() != 4 || toks[1] != "max")
        throw ParseError("expected 'p max <n> <m>'", lineno);
      n = parse_int(toks[2], lineno);
      out.graph.vertex_count = n;
      out.graph.demands = DemandVector::Zero(n);
      have_header = true;
    } else if (!have_header) {
      throw ParseError("'" + toks[0] + "' before the problem line", lineno);
    } else if (toks[0] == "n") {
      if (toks.size() != 3) throw ParseError("expected 'n <id> s|t'", lineno);
      const int v = parse_int(toks[1], lineno) - 1;
      if (v < 0 || v >= n) throw ParseError("node id out of range", lineno);
      if (toks[2] == "s")
        out.source = v;
      else if (toks[2] == "t")
        out.sink = v;
      else
        throw ParseError("node designator must be s or t", lineno);
    } else if (toks[0] == "a") {
      if (toks.size() != 4) throw ParseError("expected 'a <u> <v> <cap>'", lineno);
      const int u = parse_int(toks[1], lineno) - 1;
      const int v = parse_int(toks[2], lineno) - 1;
      if (u < 0 || u >= n || v < 0 || v >= n)
        throw ParseError("arc endpoint out of range", lineno);
      out.graph.edges.push_back({std::min(u, v), std::max(u, v)});
    } else {
      throw ParseError("unknown directive '" + toks[0] + "'", lineno);
    }
  }
  if (!have_header) throw ParseError("missing 'p max' line", 1);
  if (out.source < 0 || out.sink < 0)
    throw ParseError("missing source or sink designation", lineno == 0 ? 1 : lineno);
  const auto m = static_cast<Eigen::Index>(out.graph.edges.size());
  out.graph.gradient = Vector::Zero(m);
  out.graph.resistance = Vector::Zero(m);
  return out;
}

}  // namespace pnf
