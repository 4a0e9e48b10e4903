#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "bkdt/core.hpp"

namespace bkdt {

/// Half-open range [begin, end) of positions in the rearranged leaf structure.
struct PositionRange {
  Index begin = 0;
  Index end = 0;

  Index size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  friend bool operator==(const PositionRange&, const PositionRange&) = default;
};

/// Raised when a requested configuration cannot fit the device memory budget.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Partition of the n leaf-structure positions into N contiguous chunks.
/// Chunk j (0-based) covers [ceil(j*n/N), ceil((j+1)*n/N)).
class ChunkPlan {
 public:
  ChunkPlan() = default;
  ChunkPlan(Index n, Index num_chunks);

  Index num_points() const { return n_; }
  Index num_chunks() const { return static_cast<Index>(bounds_.size()) - 1; }
  PositionRange chunk(Index j) const { return {bounds_[j], bounds_[j + 1]}; }
  Index max_chunk_size() const;

  /// Chunk containing position pos.
  Index chunk_of(Index pos) const;

  friend bool operator==(const ChunkPlan&, const ChunkPlan&) = default;

 private:
  Index n_ = 0;
  std::vector<Index> bounds_{0};
};

/// A chunk touched by a leaf, with the part of the leaf that lies inside it.
struct ChunkClip {
  Index chunk;
  PositionRange clip;
  friend bool operator==(const ChunkClip&, const ChunkClip&) = default;
};

/// Builds the ceiling-formula plan and checks that the largest chunk fits
/// `chunk_capacity_bytes`. On failure the error names the smallest feasible N.
ChunkPlan plan_chunks(Index n, Index num_chunks, std::size_t chunk_capacity_bytes,
                      std::size_t point_bytes);

/// Smallest N whose largest chunk fits the capacity.
Index min_feasible_chunks(Index n, std::size_t chunk_capacity_bytes, std::size_t point_bytes);

/// Chunks overlapping the leaf range [leaf.begin, leaf.end), in increasing order.
std::vector<ChunkClip> assign_query_to_chunks(PositionRange leaf, const ChunkPlan& plan);

}  // namespace bkdt
