#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pnf/apps.hpp"
#include "pnf/errors.hpp"
#include "pnf/generators.hpp"
#include "pnf/graph_operator.hpp"
#include "pnf/io.hpp"
#include "pnf/oracle.hpp"
#include "pnf/solver.hpp"
#include "pnf/ultrasparsify.hpp"

namespace {

constexpr int kExitParse = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitSolver = 4;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct SolveFlags {
  std::string input;
  std::string mode = "smoothed";
  std::string output;
  std::string trace_path;
  double p = 0.0;  // 0 = take from file / mode default
  double kappa = 0.0;
  double delta = 1e-9;
  double eps = 0.1;
  uint64_t seed = 0;
  int max_iters = 20;
  bool verify = false;
  bool dimacs = false;
  int source = -1;
  int sink = -1;
};

pnf::RecursionConfig make_config(const SolveFlags& fl) {
  pnf::RecursionConfig cfg;
  cfg.kappa = fl.kappa;
  cfg.delta = fl.delta;
  cfg.seed = fl.seed;
  cfg.max_outer_iters = fl.max_iters;
  return cfg;
}

void emit_trace(const pnf::SolveReport& rep, const std::string& path) {
  std::vector<pnf::TraceRow> rows;
  for (size_t i = 0; i < rep.objectives.size(); ++i) {
    pnf::TraceRow row;
    row.iter = static_cast<int>(i);
    row.objective = rep.objectives[i];
    row.residual_obj =
        i < rep.residual_objectives.size() ? rep.residual_objectives[i] : 0.0;
    row.elapsed_ms = i < rep.iter_elapsed_ms.size()
                         ? rep.iter_elapsed_ms[i]
                         : (rep.iter_elapsed_ms.empty() ? 0.0
                                                        : rep.iter_elapsed_ms.back());
    rows.push_back(row);
  }
  pnf::write_trace(rows, path);
}

void write_result(const pnf::ResultFile& rf, const std::string& path) {
  if (path.empty())
    pnf::write_result_file(rf, std::cout);
  else
    pnf::write_result_file(rf, path);
}

void report_common(pnf::ResultFile& rf, const SolveFlags& fl,
                   const pnf::SolveReport& rep, double wall_ms) {
  rf.set("mode", fl.mode);
  rf.set("seed", static_cast<long long>(fl.seed));
  rf.set("delta", fl.delta);
  rf.set("kappa", rep.kappa_used);
  rf.set("iterations", static_cast<long long>(rep.objectives.size()));
  rf.set("converged", std::string(rep.converged ? "1" : "0"));
  rf.set("gap_certificate", rep.gap_certificate);
  rf.set("elapsed_ms", wall_ms);
}

int cmd_solve(const SolveFlags& fl) {
  const auto t0 = Clock::now();
  pnf::GraphFile gf;
  int dimacs_s = -1, dimacs_t = -1;
  if (fl.dimacs) {
    std::ifstream in(fl.input);
    if (!in) throw pnf::ParseError("cannot open '" + fl.input + "'", 0);
    pnf::DimacsMaxflow dm = pnf::parse_dimacs_maxflow(in);
    gf = std::move(dm.graph);
    dimacs_s = dm.source;
    dimacs_t = dm.sink;
    gf.p = 2.0;
  } else {
    gf = pnf::read_graph_file(fl.input, /*require_balanced=*/fl.mode != "ssl");
  }
  const double p = fl.p > 0.0 ? fl.p : gf.p;
  pnf::ResultFile rf;
  rf.set("input", fl.input);
  rf.set("p", p);

  if (fl.mode == "smoothed") {
    pnf::GraphFile g2 = gf;
    g2.p = p;
    pnf::Instance inst = g2.instance();
    pnf::GraphOperator op(inst.vertex_count(), inst.edges());
    pnf::FlowVector f0 = op.electrical_flow(gf.demands);
    auto [f, rep] = pnf::solve_smoothed(inst, gf.demands, f0, fl.delta,
                                        make_config(fl));
    report_common(rf, fl, rep, elapsed_ms(t0));
    rf.set("objective", pnf::objective(inst, f));
    const pnf::DemandVector res = pnf::residues(inst, f) - gf.demands;
    rf.set("residue_max_error", res.size() ? res.cwiseAbs().maxCoeff() : 0.0);
    if (fl.verify && inst.vertex_count() <= 500) {
      pnf::OracleResult orc = pnf::reference_solve(inst, gf.demands);
      const double gap = orc.objective - pnf::objective(inst, f);
      rf.set("oracle_objective", orc.objective);
      rf.set("oracle_gap",
             gap / std::max(1.0, std::abs(orc.objective)));
    }
    rf.flow = f;
    if (!fl.trace_path.empty()) emit_trace(rep, fl.trace_path);
  } else if (fl.mode == "pnorm") {
    auto [f, rep] = pnf::pflows(gf.vertex_count, gf.edges, gf.demands, p, 1.0,
                                make_config(fl));
    report_common(rf, fl, rep, elapsed_ms(t0));
    const int m = static_cast<int>(gf.edges.size());
    const double val = pnf::smoothed_norm(pnf::Vector::Zero(m),
                                          pnf::Vector::Ones(m), f, p);
    rf.set("objective", val);
    pnf::Instance unit(gf.vertex_count, gf.edges, pnf::Vector::Zero(m),
                       pnf::Vector::Zero(m), 1.0, p);
    const pnf::DemandVector res = pnf::residues(unit, f) - gf.demands;
    rf.set("residue_max_error", res.size() ? res.cwiseAbs().maxCoeff() : 0.0);
    if (fl.verify && gf.vertex_count <= 500) {
      pnf::OracleResult orc = pnf::reference_solve(unit, gf.demands);
      // reference_solve maximizes -||f||_p^p; its optimum is -OPT.
      const double opt = -orc.objective;
      rf.set("oracle_objective", opt);
      rf.set("oracle_gap", (val - opt) / std::max(1e-12, std::abs(opt)));
    }
    rf.flow = f;
    if (!fl.trace_path.empty()) emit_trace(rep, fl.trace_path);
  } else if (fl.mode == "ssl") {
    // Labels ride on the demand lines: `d <u> <value>` pins x_u = value.
    pnf::SslProblem prob;
    prob.vertex_count = gf.vertex_count;
    prob.edges = gf.edges;
    prob.p = p;
    for (Eigen::Index v = 0; v < gf.demands.size(); ++v)
      if (gf.demand_set[static_cast<size_t>(v)]) {
        prob.labeled.push_back(static_cast<int>(v));
        prob.labels.push_back(gf.demands[v]);
      }
    if (prob.labeled.empty())
      throw pnf::InfeasibleDemand("ssl mode needs at least one 'd' label line");
    pnf::SslDual dual = pnf::ssl_dual_transform(prob);
    const pnf::Instance& di = dual.dual;
    pnf::FlowVector f0 = pnf::FlowVector::Zero(di.edge_count());
    auto [f, rep] = pnf::solve_smoothed(
        di, pnf::DemandVector::Zero(di.vertex_count()), f0, fl.delta,
        make_config(fl));
    pnf::Vector x = pnf::ssl_recover_voltages(prob, dual, f);
    report_common(rf, fl, rep, elapsed_ms(t0));
    rf.set("dual_objective", pnf::objective(di, f));
    rf.set("primal_objective", pnf::ssl_primal_objective(prob, x));
    const pnf::DemandVector res = pnf::residues(di, f);
    rf.set("residue_max_error", res.size() ? res.cwiseAbs().maxCoeff() : 0.0);
    if (fl.verify && di.vertex_count() <= 500) {
      pnf::OracleResult orc = pnf::reference_solve(
          di, pnf::DemandVector::Zero(di.vertex_count()));
      rf.set("oracle_objective", orc.objective);
      rf.set("oracle_gap", (orc.objective - pnf::objective(di, f)) /
                               std::max(1.0, std::abs(orc.objective)));
    }
    for (Eigen::Index v = 0; v < x.size(); ++v)
      rf.set("x" + std::to_string(v), x[v]);
    rf.flow = f;
    if (!fl.trace_path.empty()) emit_trace(rep, fl.trace_path);
  } else if (fl.mode == "maxflow") {
    int s = fl.source >= 0 ? fl.source : dimacs_s;
    int t = fl.sink >= 0 ? fl.sink : dimacs_t;
    if (s < 0 || t < 0) {
      // Fall back to the demand lines: positive demand = source, negative = sink.
      for (Eigen::Index v = 0; v < gf.demands.size(); ++v) {
        if (gf.demands[v] > 0.0) s = static_cast<int>(v);
        if (gf.demands[v] < 0.0) t = static_cast<int>(v);
      }
    }
    if (s < 0 || t < 0 || s == t)
      throw pnf::InfeasibleDemand(
          "maxflow mode needs a source and a sink (demand lines, --source/--sink, "
          "or DIMACS n lines)");
    pnf::MwuConfig mcfg;
    mcfg.solver = make_config(fl);
    pnf::MwuResult mr = pnf::mwu_maxflow(gf.vertex_count, gf.edges, s, t,
                                         fl.eps, fl.p, mcfg);
    rf.set("mode", fl.mode);
    rf.set("seed", static_cast<long long>(fl.seed));
    rf.set("eps", fl.eps);
    rf.set("source", static_cast<long long>(s));
    rf.set("sink", static_cast<long long>(t));
    rf.set("value", static_cast<long long>(mr.value));
    rf.set("width_bound", mr.width_bound);
    rf.set("width_clipped", std::string(mr.width_clipped ? "1" : "0"));
    rf.set("iterations", static_cast<long long>(mr.iterations));
    rf.set("elapsed_ms", elapsed_ms(t0));
    if (fl.verify) {
      const int exact = pnf::exact_maxflow(gf.vertex_count, gf.edges, s, t);
      rf.set("exact_value", static_cast<long long>(exact));
    }
    rf.flow = mr.flow;
  } else {
    throw pnf::ShapeError("unknown mode '" + fl.mode + "'");
  }
  write_result(rf, fl.output);
  return 0;
}

struct SparsifyFlags {
  std::string input;
  std::string output;
  double kappa = 4.0;
  double delta = 1e-9;
  uint64_t seed = 0;
  int check_maps = 0;
};

int cmd_sparsify(const SparsifyFlags& fl) {
  const auto t0 = Clock::now();
  pnf::GraphFile gf = pnf::read_graph_file(fl.input);
  pnf::Instance inst = gf.instance();
  pnf::UltraSparsifyConfig cfg;
  cfg.seed = fl.seed;
  pnf::UltraSparsifierOutput out =
      pnf::ultra_sparsify(inst, fl.kappa, fl.delta, cfg);

  const pnf::Instance& h = out.sparsified;
  int self_loops = 0;
  for (const auto& e : h.edges()) self_loops += e.self_loop();
  pnf::ResultFile stats;
  stats.set("input", fl.input);
  stats.set("kappa", fl.kappa);
  stats.set("delta", fl.delta);
  stats.set("seed", static_cast<long long>(fl.seed));
  stats.set("n", static_cast<long long>(inst.vertex_count()));
  stats.set("m", static_cast<long long>(inst.edge_count()));
  stats.set("m_sparse", static_cast<long long>(h.edge_count()));
  stats.set("tree_edges", static_cast<long long>(out.stats.tree_edges));
  stats.set("off_tree_edges",
            static_cast<long long>(h.edge_count() - out.stats.tree_edges));
  stats.set("self_loops", static_cast<long long>(self_loops));
  stats.set("sampled_edges", static_cast<long long>(out.stats.sampled_edges));
  stats.set("leftover_edges", static_cast<long long>(out.stats.leftover_edges));
  stats.set("buckets", static_cast<long long>(out.stats.bucket_count));
  stats.set("lsst_total_stretch", out.stats.lsst_total_stretch);
  stats.set("kappa_forward", out.kappa_forward);
  stats.set("kappa_backward", out.kappa_backward);
  stats.set("kappa_scale", out.stats.kappa_scale);
  stats.set("kappa_route", out.stats.kappa_route);

  if (fl.check_maps > 0) {
    std::mt19937_64 rng(fl.seed ^ 0x5eedu);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < fl.check_maps; ++trial) {
      pnf::FlowVector f(inst.edge_count());
      for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = uni(rng);
      const pnf::FlowVector fh = out.map_to_sparse.apply(f);
      pnf::DemandVector diff = pnf::residues(h, fh) - pnf::residues(inst, f);
      worst = std::max(worst, diff.size() ? diff.cwiseAbs().maxCoeff() : 0.0);

      pnf::FlowVector fb(h.edge_count());
      for (Eigen::Index i = 0; i < fb.size(); ++i) fb[i] = uni(rng);
      const pnf::FlowVector fg = out.map_to_source.apply(fb);
      diff = pnf::residues(inst, fg) - pnf::residues(h, fb);
      worst = std::max(worst, diff.size() ? diff.cwiseAbs().maxCoeff() : 0.0);
    }
    stats.set("check_maps", static_cast<long long>(fl.check_maps));
    stats.set("max_residue_error", worst);
  }
  stats.set("elapsed_ms", elapsed_ms(t0));

  if (!fl.output.empty()) {
    pnf::GraphFile hf;
    hf.vertex_count = h.vertex_count();
    hf.p = h.p();
    hf.edges = h.edges();
    hf.gradient = h.gradient();
    hf.resistance = h.resistance();
    hf.demands = pnf::DemandVector::Zero(h.vertex_count());
    if (h.uniform_s()) {
      hf.s_scalar = h.edge_count() > 0 ? h.s_scalar() : 1.0;
    } else {
      hf.s_per_edge = h.s();
    }
    pnf::write_graph_file(hf, fl.output);
    stats.set("output", fl.output);
  }
  pnf::write_result_file(stats, std::cout);
  return 0;
}

struct BenchFlags {
  std::string corpus;
  std::string output;
  uint64_t seed = 0;
  double p = 2.0;
  bool generate = false;
  bool deterministic = false;
};

void generate_corpus(const std::string& dir, double p, uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto emit = [&](const std::string& name, const pnf::GeneratedGraph& g,
                  uint64_t salt) {
    pnf::Instance inst = pnf::make_random_instance(g, p, seed + salt);
    pnf::GraphFile gf;
    gf.vertex_count = g.vertex_count;
    gf.p = p;
    gf.edges = inst.edges();
    gf.gradient = inst.gradient();
    gf.resistance = inst.resistance();
    gf.s_scalar = inst.s_scalar();
    gf.demands = pnf::make_random_demand(g.vertex_count, seed + salt + 1);
    pnf::write_graph_file(gf, dir + "/" + name + ".pnf");
  };
  emit("grid_4x4", pnf::make_grid(4, 4), 11);
  emit("grid_8x8", pnf::make_grid(8, 8), 12);
  emit("grid_16x16", pnf::make_grid(16, 16), 13);
  emit("regular_32_4", pnf::make_random_regular(32, 4, seed + 21), 22);
  emit("regular_64_4", pnf::make_random_regular(64, 4, seed + 23), 24);
  emit("cliques_4x4", pnf::make_cliques_with_bridges(4, 4), 31);
  emit("cliques_6x6", pnf::make_cliques_with_bridges(6, 6), 32);
  emit("tree_63", pnf::make_recursive_tree(63, seed + 41), 42);
  emit("tree_255", pnf::make_recursive_tree(255, seed + 43), 44);
}

int cmd_bench(const BenchFlags& fl) {
  namespace fs = std::filesystem;
  if (fl.generate) generate_corpus(fl.corpus, fl.p, fl.seed);

  std::vector<std::string> files;
  if (fs::exists(fl.corpus))
    for (const auto& entry : fs::directory_iterator(fl.corpus))
      if (entry.is_regular_file() && entry.path().extension() == ".pnf")
        files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());

  std::ostringstream csv;
  csv << "name,n,m,p,wall_ms,iterations,gap,status\n";
  for (const std::string& path : files) {
    std::string name = fs::path(path).stem().string();
    try {
      pnf::GraphFile gf = pnf::read_graph_file(path);
      pnf::Instance inst = gf.instance();
      pnf::GraphOperator op(inst.vertex_count(), inst.edges());
      const auto t0 = Clock::now();
      pnf::FlowVector f0 = op.electrical_flow(gf.demands);
      pnf::RecursionConfig cfg;
      cfg.seed = fl.seed;
      auto [f, rep] = pnf::solve_smoothed(inst, gf.demands, f0, 1e-9, cfg);
      (void)f;
      const double wall = fl.deterministic ? 0.0 : elapsed_ms(t0);
      csv << name << ',' << inst.vertex_count() << ',' << inst.edge_count()
          << ',' << pnf::format_double(inst.p()) << ','
          << pnf::format_double(wall) << ',' << rep.objectives.size() << ','
          << pnf::format_double(rep.gap_certificate) << ",ok\n";
    } catch (const std::exception& e) {
      std::string what = e.what();
      std::replace(what.begin(), what.end(), ',', ';');
      std::replace(what.begin(), what.end(), '\n', ' ');
      csv << name << ",0,0,0,0,0,0,error: " << what << '\n';
    }
  }
  if (fl.output.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(fl.output);
    if (!out) throw pnf::ParseError("cannot open '" + fl.output + "' for writing", 0);
    out << csv.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smoothed p-norm flow solver"};
  app.require_subcommand(1);

  SolveFlags sf;
  CLI::App* solve = app.add_subcommand("solve", "Solve a flow problem from a graph file");
  solve->add_option("input", sf.input, "Input graph file")->required();
  solve->add_option("--mode", sf.mode, "pnorm | smoothed | ssl | maxflow")
      ->check(CLI::IsMember({"pnorm", "smoothed", "ssl", "maxflow"}));
  solve->add_option("--p", sf.p, "Exponent override (default: from file)");
  solve->add_option("--kappa", sf.kappa, "Sparsifier quality (default: auto)");
  solve->add_option("--delta", sf.delta, "Accuracy budget");
  solve->add_option("--eps", sf.eps, "MWU accuracy (maxflow mode)");
  solve->add_option("--seed", sf.seed, "Random seed");
  solve->add_option("--max-iters", sf.max_iters, "Outer iteration cap");
  solve->add_flag("--verify", sf.verify, "Cross-check against the reference solver (n <= 500)");
  solve->add_flag("--dimacs", sf.dimacs, "Input is a DIMACS max-flow file");
  solve->add_option("--source", sf.source, "Source vertex (maxflow mode)");
  solve->add_option("--sink", sf.sink, "Sink vertex (maxflow mode)");
  solve->add_option("--emit-trace", sf.trace_path, "Write objective trajectory CSV");
  solve->add_option("-o,--output", sf.output, "Result file path (default: stdout)");

  SparsifyFlags pf;
  CLI::App* spars = app.add_subcommand("sparsify", "Ultra-sparsify a graph file");
  spars->add_option("input", pf.input, "Input graph file")->required();
  spars->add_option("--kappa", pf.kappa, "Quality factor");
  spars->add_option("--delta", pf.delta, "Error budget");
  spars->add_option("--seed", pf.seed, "Random seed");
  spars->add_option("--check-maps", pf.check_maps,
                    "Apply both maps to N random flows, report max residue error");
  spars->add_option("-o,--output", pf.output, "Write the sparsified graph here");

  BenchFlags bf;
  CLI::App* bench = app.add_subcommand("bench", "Run the solver over a corpus directory");
  bench->add_option("corpus", bf.corpus, "Directory of .pnf files")->required();
  bench->add_option("-o,--output", bf.output, "CSV path (default: stdout)");
  bench->add_option("--seed", bf.seed, "Random seed");
  bench->add_option("--p", bf.p, "Exponent for generated instances");
  bench->add_flag("--generate", bf.generate, "Generate a standard corpus into the directory first");
  bench->add_flag("--deterministic", bf.deterministic, "Zero the wall-time column for reproducible output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitParse;
  }

  try {
    if (solve->parsed()) return cmd_solve(sf);
    if (spars->parsed()) return cmd_sparsify(pf);
    if (bench->parsed()) return cmd_bench(bf);
  } catch (const pnf::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitParse;
  } catch (const pnf::InfeasibleDemand& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const pnf::SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const pnf::ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  }
  return 0;
}
