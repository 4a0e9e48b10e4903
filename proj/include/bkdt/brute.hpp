#pragma once

#include <cstdint>

#include "bkdt/chunk_plan.hpp"
#include "bkdt/core.hpp"
#include "bkdt/device.hpp"
#include "bkdt/parallel.hpp"

namespace bkdt {

/// Exact k-NN by scanning every reference for every query. Parallel over
/// queries; the result does not depend on `workers`. If distance_count is
/// non-null it receives the number of distance evaluations.
template <typename Scalar>
NeighborTable<Scalar> brute_knn(const Points<Scalar>& refs, const Points<Scalar>& queries,
                                const SearchParams& params, int workers = 1,
                                std::int64_t* distance_count = nullptr) {
  validate_search(refs.rows(), refs.cols(), queries.cols(), params);
  NeighborTable<Scalar> out(static_cast<std::size_t>(queries.rows()));
  parallel_for(queries.rows(), workers, [&](Index i) {
    NeighborList<Scalar> list(params.k);
    const auto q = queries.row(i);
    for (Index r = 0; r < refs.rows(); ++r) list.insert(r, sq_euclidean(q, refs.row(r)));
    out[static_cast<std::size_t>(i)] = std::move(list);
  });
  if (distance_count) *distance_count = refs.rows() * queries.rows();
  return out;
}

/// Brute force streamed through the device pipeline chunk by chunk. Every
/// query is assigned to every chunk; the output equals brute_knn bit for bit.
NeighborTable<float> brute_knn_chunked(const PointMatrix& refs, const PointMatrix& queries,
                                       const SearchParams& params, Device& device,
                                       const ChunkPlan& plan);

}  // namespace bkdt
