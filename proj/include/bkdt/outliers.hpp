#pragma once

#include <vector>

#include "bkdt/core.hpp"
#include "bkdt/engine.hpp"

namespace bkdt {

/// k nearest neighbors of every reference point among the other reference
/// points. A point is excluded from its own list by index, so exact
/// duplicates still count as each other's neighbors.
NeighborTable<float> all_nearest_neighbors(Engine engine, const PointMatrix& refs, Index k,
                                           const EngineOptions& options);

/// Removes `self` from a (k+1)-list and keeps the k best of the rest.
NeighborList<float> exclude_self(const NeighborList<float>& list, Index self, Index k);

struct OutlierRanking {
  std::vector<double> scores;  // mean true distance to the k neighbors
  std::vector<Index> ranking;  // point ids, most outlying first
};

/// score_i = mean of sqrt(sq_dist) over the neighbors of i. Ranking is
/// descending by (score, point index).
OutlierRanking outlier_scores(const NeighborTable<float>& neighbors);

}  // namespace bkdt
