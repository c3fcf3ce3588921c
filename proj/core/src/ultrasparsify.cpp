#include "pnf/ultrasparsify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "pnf/errors.hpp"
#include "pnf/expander.hpp"
#include "pnf/portal.hpp"
#include "pnf/sample.hpp"
#include "pnf/spanning_tree.hpp"

namespace pnf {

namespace {

double round_resistance(double r, double delta) {
  if (r < delta) return 0.0;
  return std::exp2(std::floor(std::log2(r)));
}

struct HEdge {
  Edge e{0, 0};
  double g = 0.0, r = 0.0, s = 0.0;
};

// One sampled expander piece awaiting final map assembly: the electrical
// stages are bracketed by sparse select/embed matrices built once the total
// edge counts are known.
struct PieceMaps {
  std::vector<Eigen::Triplet<double>> select;       // piece src space <- G space
  std::vector<Eigen::Triplet<double>> back_route;   // G space <- piece src space
  FlowMap fwd;                                      // piece src -> sampled
  FlowMap rev;                                      // sampled -> piece src
  int row_offset = 0;                               // first H row of the sample
  int piece_m = 0;
  int sampled_m = 0;
};

}  // namespace

UltraSparsifierOutput ultra_sparsify(const Instance& inst, double kappa,
                                     double delta,
                                     const UltraSparsifyConfig& cfg) {
  if (!(kappa > 1.0)) throw ShapeError("ultra_sparsify: kappa must exceed 1");
  if (!(delta > 0.0)) throw ShapeError("ultra_sparsify: delta must be positive");
  const int n = inst.vertex_count();
  const Eigen::Index m = inst.edge_count();
  const double p = inst.p();
  const double md = static_cast<double>(m);
  const double log_n = std::max(1.0, std::log2(static_cast<double>(n)));

  UltraSparsifierOutput out;
  auto& stats = out.stats;

  // Low-stretch spanning tree w.r.t. the original resistances.
  std::mt19937_64 rng(cfg.seed ^ 0x5851f42d4c957f2dull);
  LsstResult tree_pick = lsst(n, inst.edges(), inst.resistance(), cfg.seed);
  SpanningTree tree(n, inst.edges(), inst.resistance(), tree_pick.tree_edges);
  stats.lsst_total_stretch = tree_pick.total_stretch;
  stats.tree_edges = static_cast<int>(tree_pick.tree_edges.size());

  // Rounded working resistances on off-tree, non-selfloop edges.
  Vector work_r = inst.resistance();
  for (Eigen::Index i = 0; i < m; ++i)
    if (!tree.in_tree(static_cast<int>(i)) && !inst.edge(static_cast<int>(i)).self_loop())
      work_r[i] = round_resistance(work_r[i], delta);
  const Instance gw(n, inst.edges(), inst.gradient(), work_r, inst.s(), p);

  // H assembly state.
  std::vector<HEdge> h_edges;
  std::vector<Eigen::Triplet<double>> fwd, rev;  // sparse parts of both maps
  std::vector<PieceMaps> pieces;
  std::vector<int> tree_row(static_cast<size_t>(m), -1);

  auto add_h = [&](const Edge& e, double g, double r, double s) {
    h_edges.push_back({e, g, r, s});
    return static_cast<int>(h_edges.size()) - 1;
  };

  for (int ti : tree_pick.tree_edges) {
    const int row = add_h(inst.edge(ti), inst.gradient()[ti],
                          inst.resistance()[ti], inst.s()[ti]);
    tree_row[static_cast<size_t>(ti)] = row;
    fwd.emplace_back(row, ti, 1.0);
    rev.emplace_back(ti, row, 1.0);
  }

  // Buckets of off-tree edges keyed by (rounded r, s).
  std::map<std::pair<double, double>, std::vector<int>> buckets;
  for (int i = 0; i < m; ++i) {
    if (tree.in_tree(i)) continue;
    if (inst.edge(i).self_loop()) {
      const int row = add_h(inst.edge(i), inst.gradient()[i],
                            inst.resistance()[i], inst.s()[i]);
      fwd.emplace_back(row, i, 1.0);
      rev.emplace_back(i, row, 1.0);
      ++stats.input_self_loops;
      continue;
    }
    buckets[{work_r[i], inst.s()[i]}].push_back(i);
  }
  stats.bucket_count = static_cast<int>(buckets.size());

  // The m/kappa off-tree allowance is shared across buckets so the total
  // stays near the target rather than scaling with the bucket count.
  const int budget = std::max(
      1, static_cast<int>(md / kappa) / std::max(1, stats.bucket_count));
  const int nhat_target = std::max(1, static_cast<int>(md / kappa));
  const int iter_cap =
      static_cast<int>(std::ceil(std::log2(std::max(2.0, md)))) +
      cfg.extra_bucket_iters;
  const double log2n_sq = log_n * log_n;

  double max_c2 = 0.0, max_cp = 0.0;
  double scale_up = 1.0, scale_down = 1.0;
  bool any_sampled = false;

  for (auto& [key, bucket] : buckets) {
    const double bucket_r = key.first;
    const double bucket_s = key.second;
    std::vector<int> remaining = bucket;
    int iters = 0;

    while (static_cast<int>(remaining.size()) > budget && iters < iter_cap) {
      ++iters;
      const double m_ri = static_cast<double>(remaining.size());
      // Portals scale with the bucket's live edge set: with ~m_ri portals
      // every edge keeps distinct endpoints and nothing ever self-loops.
      const int nhat = std::max(
          1, std::min<int>(nhat_target,
                           static_cast<int>(m_ri / kappa)));
      const std::vector<int> portals = find_portal(tree, remaining, nhat);
      TreePortalRouting routing =
          tree_portal_route(gw, tree, remaining, portals);

      // Measured routing congestion for the reported kappa: K counts how
      // many routed paths use each tree edge this round.
      std::vector<double> K(static_cast<size_t>(m), 0.0);
      for (const RoutedEdge& re : routing.edges) {
        for (auto [ti, sg] : re.seg_u) (void)sg, K[static_cast<size_t>(ti)] += 1.0;
        for (auto [ti, sg] : re.seg_v) (void)sg, K[static_cast<size_t>(ti)] += 1.0;
      }
      for (const RoutedEdge& re : routing.edges) {
        double c2 = 0.0, cp = 0.0;
        for (const auto& seg : {re.seg_u, re.seg_v})
          for (auto [ti, sg] : seg) {
            (void)sg;
            c2 += inst.resistance()[ti] * K[static_cast<size_t>(ti)];
            cp += inst.s()[ti] * std::pow(K[static_cast<size_t>(ti)], p - 1.0);
          }
        if (bucket_r > 0.0) max_c2 = std::max(max_c2, c2 / bucket_r);
        if (bucket_s > 0.0) max_cp = std::max(max_cp, cp / bucket_s);
      }

      // Self-loop images go straight to H; their pre-images leave the bucket.
      std::vector<char> removed(routing.edges.size(), 0);
      int loops_this_round = 0;
      std::vector<int> survivors;          // positions into routing.edges
      for (size_t j = 0; j < routing.edges.size(); ++j) {
        const RoutedEdge& re = routing.edges[j];
        if (re.image.self_loop()) {
          const int row = add_h(re.image, re.g_routed, bucket_r, bucket_s);
          fwd.emplace_back(row, re.orig, 1.0);
          rev.emplace_back(re.orig, row, 1.0);
          for (auto [ti, sg] : re.seg_u) {
            fwd.emplace_back(tree_row[static_cast<size_t>(ti)], re.orig, sg);
            rev.emplace_back(ti, row, -sg);
          }
          for (auto [ti, sg] : re.seg_v) {
            fwd.emplace_back(tree_row[static_cast<size_t>(ti)], re.orig, sg);
            rev.emplace_back(ti, row, -sg);
          }
          removed[j] = 1;
          ++loops_this_round;
          ++stats.routed_self_loops;
        } else {
          survivors.push_back(static_cast<int>(j));
        }
      }

      const bool skip_sampling =
          2 * loops_this_round > static_cast<int>(routing.edges.size());
      if (!skip_sampling && !survivors.empty()) {
        // Bucket graph between portals for decomposition.
        std::vector<Edge> bedges;
        Vector bg(static_cast<Eigen::Index>(survivors.size()));
        for (size_t k = 0; k < survivors.size(); ++k) {
          const RoutedEdge& re = routing.edges[static_cast<size_t>(survivors[k])];
          bedges.push_back(re.image);
          bg[static_cast<Eigen::Index>(k)] = re.g_routed;
        }
        const double rescaled_r = bucket_r * kappa * log2n_sq;
        const double delta_dec =
            delta / std::pow(md, cfg.delta_exponent);
        DecomposeConfig dcfg;
        dcfg.c_partition = cfg.c_partition;
        Instance bucket_inst(n, bedges,
                             bg, Vector::Constant(bg.size(), std::max(rescaled_r, 0.0)),
                             Vector::Constant(bg.size(), bucket_s), p);
        auto exp_pieces = decompose(bucket_inst, delta_dec, dcfg);

        double tau = cfg.c1 * md * std::pow(log_n, cfg.c2) / (kappa * m_ri);
        if (cfg.cap_tau_to_budget)
          tau = std::min(tau, static_cast<double>(budget) / (2.0 * m_ri));
        tau = std::min(1.0, std::max(tau, 1.0 / m_ri));
        const double s_rescaled = std::pow(tau, -p) * bucket_s;

        for (const ExpanderPiece& piece : exp_pieces) {
          if (piece.edge_indices.empty()) continue;
          // Rebuild the piece with rescaled coefficients; TINY pieces keep
          // only the potential part of their gradient.
          std::vector<Edge> pedges;
          Vector pg(static_cast<Eigen::Index>(piece.edge_indices.size()));
          std::vector<const RoutedEdge*> pre;
          for (size_t k = 0; k < piece.edge_indices.size(); ++k) {
            const int bi = piece.edge_indices[k];
            const RoutedEdge& re =
                routing.edges[static_cast<size_t>(survivors[static_cast<size_t>(bi)])];
            pedges.push_back(re.image);
            pg[static_cast<Eigen::Index>(k)] = bucket_inst.gradient()[bi];
            pre.push_back(&re);
          }
          if (piece.kind == PieceKind::kTiny) {
            GraphOperator pop(n, pedges);
            pg -= pop.cycle_project(pg).cycle_part;
          }
          Instance piece_inst(
              n, pedges, pg,
              Vector::Constant(pg.size(), rescaled_r),
              Vector::Constant(pg.size(), s_rescaled), p);

          SampleConfig scfg;
          scfg.c_sample = cfg.c_sample;
          scfg.kappa_sample = cfg.kappa_sample;
          SampleResult sr = sample_and_fix_gradient(piece_inst, tau, rng, scfg);
          if (!sr.kept_unsampled) any_sampled = true;

          PieceMaps pm;
          pm.piece_m = static_cast<int>(pedges.size());
          pm.sampled_m = sr.sampled.edge_count();
          pm.row_offset = static_cast<int>(h_edges.size());
          for (int t = 0; t < sr.sampled.edge_count(); ++t) {
            add_h(sr.sampled.edge(t), sr.sampled.gradient()[t],
                  sr.sampled.resistance()[t], sr.sampled.s()[t]);
            ++stats.sampled_edges;
          }
          for (size_t k = 0; k < pre.size(); ++k) {
            const RoutedEdge& re = *pre[k];
            pm.select.emplace_back(static_cast<int>(k), re.orig, re.image_sign);
            pm.back_route.emplace_back(re.orig, static_cast<int>(k), re.image_sign);
            for (auto [ti, sg] : re.seg_u) {
              fwd.emplace_back(tree_row[static_cast<size_t>(ti)], re.orig, sg);
              pm.back_route.emplace_back(ti, static_cast<int>(k),
                                         -sg * re.image_sign);
            }
            for (auto [ti, sg] : re.seg_v) {
              fwd.emplace_back(tree_row[static_cast<size_t>(ti)], re.orig, sg);
              pm.back_route.emplace_back(ti, static_cast<int>(k),
                                         -sg * re.image_sign);
            }
            removed[static_cast<size_t>(survivors[piece.edge_indices[k]])] = 1;
          }
          pm.fwd = sr.to_sampled;
          pm.rev = sr.to_source;
          pieces.push_back(std::move(pm));

          const double up = std::max({1.0, tau * kappa * log2n_sq});
          scale_up = std::max(scale_up, up);
          if (tau * kappa * log2n_sq > 0.0)
            scale_down = std::max(scale_down, 1.0 / (tau * kappa * log2n_sq));
        }
      }

      std::vector<int> next;
      for (size_t j = 0; j < routing.edges.size(); ++j)
        if (!removed[j]) next.push_back(routing.edges[j].orig);
      if (next.size() == remaining.size()) break;  // no progress
      remaining = std::move(next);
    }
    stats.iterations_per_bucket.push_back(iters);

    for (int ei : remaining) {
      const int row = add_h(inst.edge(ei), inst.gradient()[ei], work_r[ei],
                            inst.s()[ei]);
      fwd.emplace_back(row, ei, 1.0);
      rev.emplace_back(ei, row, 1.0);
      ++stats.leftover_edges;
    }
  }

  // Final instance.
  const int mh = static_cast<int>(h_edges.size());
  {
    std::vector<Edge> he;
    Vector hg(mh), hr(mh), hs(mh);
    for (int i = 0; i < mh; ++i) {
      he.push_back(h_edges[static_cast<size_t>(i)].e);
      hg[i] = h_edges[static_cast<size_t>(i)].g;
      hr[i] = h_edges[static_cast<size_t>(i)].r;
      hs[i] = h_edges[static_cast<size_t>(i)].s;
    }
    out.sparsified = Instance(n, std::move(he), std::move(hg), std::move(hr),
                              std::move(hs), p);
  }

  // Assemble both maps: one shared sparse stage plus, per sampled piece, an
  // electrical stage bracketed by select/embed matrices.
  std::vector<FlowMap> fparts, rparts;
  {
    Eigen::SparseMatrix<double> fmat(mh, m), rmat(m, mh);
    fmat.setFromTriplets(fwd.begin(), fwd.end());
    rmat.setFromTriplets(rev.begin(), rev.end());
    fparts.push_back(FlowMap::sparse(std::move(fmat)));
    rparts.push_back(FlowMap::sparse(std::move(rmat)));
  }
  for (const PieceMaps& pm : pieces) {
    Eigen::SparseMatrix<double> sel(pm.piece_m, m);
    sel.setFromTriplets(pm.select.begin(), pm.select.end());
    Eigen::SparseMatrix<double> embed(mh, pm.sampled_m);
    for (int t = 0; t < pm.sampled_m; ++t)
      embed.insert(pm.row_offset + t, t) = 1.0;
    embed.makeCompressed();
    fparts.push_back(FlowMap::compose(
        FlowMap::compose(FlowMap::sparse(std::move(sel)), pm.fwd),
        FlowMap::sparse(std::move(embed))));

    Eigen::SparseMatrix<double> pick(pm.sampled_m, mh);
    for (int t = 0; t < pm.sampled_m; ++t)
      pick.insert(t, pm.row_offset + t) = 1.0;
    pick.makeCompressed();
    Eigen::SparseMatrix<double> back(m, pm.piece_m);
    back.setFromTriplets(pm.back_route.begin(), pm.back_route.end());
    rparts.push_back(FlowMap::compose(
        FlowMap::compose(FlowMap::sparse(std::move(pick)), pm.rev),
        FlowMap::sparse(std::move(back))));
  }
  out.map_to_sparse =
      fparts.size() == 1 ? fparts.front() : FlowMap::sum(std::move(fparts));
  out.map_to_source =
      rparts.size() == 1 ? rparts.front() : FlowMap::sum(std::move(rparts));

  stats.max_congestion_l2 = max_c2;
  stats.max_congestion_lp = max_cp;
  stats.kappa_route = 1.0 + std::max(max_c2, max_cp);
  stats.kappa_scale = std::max(scale_up, std::pow(scale_down, 1.0 / (p - 1.0)));
  const double kappa_sample_used = any_sampled ? cfg.kappa_sample : 1.0;
  out.kappa_forward = stats.kappa_scale * stats.kappa_route * kappa_sample_used;
  out.kappa_backward = stats.kappa_route * kappa_sample_used;
  out.map_to_sparse.set_kappa(out.kappa_forward);
  out.map_to_source.set_kappa(out.kappa_backward);
  return out;
}

}  // namespace pnf
