#include <cmath>

#include "egw/kmeans.hpp"
#include "egw/solvers.hpp"

namespace egw {

namespace {

Index cluster_count(Index n, double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw InputError("coarsening ratio must lie in (0, 1)");
  if (rho * static_cast<double>(n) < 2.0) {
    throw InputError("coarsening ratio leaves fewer than two clusters");
  }
  return static_cast<Index>(std::ceil(rho * static_cast<double>(n)));
}

}  // namespace

CoarseProblem coarsen(const EmbeddedMeasure& src, const EmbeddedMeasure& tgt, double rho,
                      std::uint64_t seed) {
  const Index ks = cluster_count(src.size(), rho);
  const Index kt = cluster_count(tgt.size(), rho);
  KMeansResult cs = weighted_kmeans(src.features(), src.weights(), ks, seed);
  KMeansResult ct = weighted_kmeans(tgt.features(), tgt.weights(), kt, seed + 1);
  // cluster masses are exact sums of the fine weights; renormalize away round-off
  cs.weights /= cs.weights.sum();
  ct.weights /= ct.weights.sum();
  return CoarseProblem{EmbeddedMeasure(std::move(cs.centroids), cs.weights),
                       EmbeddedMeasure(std::move(ct.centroids), ct.weights), std::move(cs.labels),
                       std::move(ct.labels)};
}

MultiscaleResult solve_multiscale(const EmbeddedMeasure& src, const EmbeddedMeasure& tgt,
                                  const EgwConfig& cfg, double rho, std::uint64_t seed,
                                  std::optional<int> adaptive_start) {
  cfg.validate();
  CoarseProblem coarse = coarsen(src, tgt, rho, seed);

  MultiscaleResult out;
  out.coarse = solve_cnt_gw(coarse.src, coarse.tgt, cfg, nullptr, adaptive_start);

  // every fine point inherits the bilinear potential of its cluster
  WarmStart warm;
  warm.f.resize(src.size());
  warm.g.resize(tgt.size());
  for (Index i = 0; i < src.size(); ++i) warm.f[i] = out.coarse.f_bil[coarse.src_labels[i]];
  for (Index j = 0; j < tgt.size(); ++j) warm.g[j] = out.coarse.g_bil[coarse.tgt_labels[j]];

  EgwConfig fine_cfg = cfg;
  fine_cfg.init = GivenInit{out.coarse.gamma};
  out.fine = solve_cnt_gw(src, tgt, fine_cfg, &warm, adaptive_start);
  out.src_labels = std::move(coarse.src_labels);
  out.tgt_labels = std::move(coarse.tgt_labels);
  out.coarse_src_weights = coarse.src.weights();
  out.coarse_tgt_weights = coarse.tgt.weights();
  return out;
}

}  // namespace egw
