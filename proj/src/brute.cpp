#include "bkdt/brute.hpp"

#include <numeric>

namespace bkdt {

NeighborTable<float> brute_knn_chunked(const PointMatrix& refs, const PointMatrix& queries,
                                       const SearchParams& params, Device& device,
                                       const ChunkPlan& plan) {
  validate_search(refs.rows(), refs.cols(), queries.cols(), params);
  if (plan.num_points() != refs.rows()) {
    throw std::invalid_argument("brute_knn_chunked: chunk plan covers " +
                                std::to_string(plan.num_points()) + " points, references have " +
                                std::to_string(refs.rows()));
  }
  NeighborTable<float> out(static_cast<std::size_t>(queries.rows()), NeighborList<float>(params.k));
  if (queries.rows() == 0) return out;

  const Index d = refs.cols();
  if (static_cast<std::size_t>(plan.max_chunk_size()) * point_bytes(d) > device.chunk_bytes()) {
    throw ConfigError("brute_knn_chunked: largest chunk (" + std::to_string(plan.max_chunk_size()) +
                      " points) does not fit the device chunk buffer; use N >= " +
                      std::to_string(min_feasible_chunks(refs.rows(), device.chunk_bytes(),
                                                         point_bytes(d))));
  }
  const Index block = device.query_capacity(d, params.k);
  if (block < 1) {
    throw ConfigError("brute_knn_chunked: device query block cannot hold a single query");
  }

  std::vector<Index> ids(static_cast<std::size_t>(refs.rows()));
  std::iota(ids.begin(), ids.end(), Index{0});
  const MemoryLeafSource source(refs, ids);

  for (Index first = 0; first < queries.rows(); first += block) {
    const Index count = std::min(block, queries.rows() - first);
    device.upload_queries(queries.middleRows(first, count), params.k);
    std::vector<std::vector<KernelAssignment>> per_chunk(static_cast<std::size_t>(plan.num_chunks()));
    for (Index j = 0; j < plan.num_chunks(); ++j) {
      auto& list = per_chunk[static_cast<std::size_t>(j)];
      list.reserve(static_cast<std::size_t>(count));
      for (Index s = 0; s < count; ++s) list.push_back({s, plan.chunk(j)});
    }
    std::span<NeighborList<float>> slots(out.data() + first, static_cast<std::size_t>(count));
    device.run_chunk_pipeline(source, plan, per_chunk, slots);
  }
  // The last wrap-around copy still references `source`.
  device.wait_all();
  return out;
}

}  // namespace bkdt
