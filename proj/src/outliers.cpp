#include "bkdt/outliers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bkdt {

NeighborList<float> exclude_self(const NeighborList<float>& list, Index self, Index k) {
  NeighborList<float> out(k);
  for (const auto& e : list.entries()) {
    if (e.index == self) continue;
    if (out.full()) break;
    out.insert(e.index, e.sq_dist);
  }
  return out;
}

NeighborTable<float> all_nearest_neighbors(Engine engine, const PointMatrix& refs, Index k,
                                           const EngineOptions& options) {
  if (k < 1 || k + 1 > refs.rows()) {
    throw std::invalid_argument("all nearest neighbors needs 1 <= k < n (k=" + std::to_string(k) +
                                ", n=" + std::to_string(refs.rows()) + ")");
  }
  // One extra neighbor covers the point itself; if k+1 others tie ahead of
  // it, dropping the last keeps the k best.
  EngineRun run = run_engine(engine, refs, refs, SearchParams{k + 1}, options);
  NeighborTable<float> out;
  out.reserve(run.neighbors.size());
  for (std::size_t i = 0; i < run.neighbors.size(); ++i) {
    out.push_back(exclude_self(run.neighbors[i], static_cast<Index>(i), k));
  }
  return out;
}

OutlierRanking outlier_scores(const NeighborTable<float>& neighbors) {
  OutlierRanking r;
  r.scores.resize(neighbors.size(), 0.0);
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    const auto entries = neighbors[i].entries();
    if (entries.empty()) continue;
    double sum = 0.0;
    for (const auto& e : entries) sum += std::sqrt(static_cast<double>(e.sq_dist));
    r.scores[i] = sum / static_cast<double>(entries.size());
  }
  r.ranking.resize(neighbors.size());
  std::iota(r.ranking.begin(), r.ranking.end(), Index{0});
  std::sort(r.ranking.begin(), r.ranking.end(), [&](Index a, Index b) {
    const double sa = r.scores[static_cast<std::size_t>(a)];
    const double sb = r.scores[static_cast<std::size_t>(b)];
    return sa > sb || (sa == sb && a > b);
  });
  return r;
}

}  // namespace bkdt
