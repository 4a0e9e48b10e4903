#include "bkdt/chunk_plan.hpp"

#include <algorithm>

namespace bkdt {

namespace {

Index ceil_div_mul(Index j, Index n, Index num_chunks) {
  // ceil(j*n/N) without floating point; j*n stays below 2^63 for any
  // realistic n and N.
  const auto num = static_cast<unsigned long long>(j) * static_cast<unsigned long long>(n);
  const auto den = static_cast<unsigned long long>(num_chunks);
  return static_cast<Index>((num + den - 1) / den);
}

}  // namespace

ChunkPlan::ChunkPlan(Index n, Index num_chunks) : n_(n) {
  if (n < 1) throw std::invalid_argument("ChunkPlan: n must be >= 1");
  if (num_chunks < 1) throw std::invalid_argument("ChunkPlan: N must be >= 1");
  if (num_chunks > n) {
    throw std::invalid_argument("ChunkPlan: N=" + std::to_string(num_chunks) +
                                " exceeds n=" + std::to_string(n));
  }
  bounds_.resize(static_cast<std::size_t>(num_chunks) + 1);
  for (Index j = 0; j <= num_chunks; ++j) bounds_[j] = ceil_div_mul(j, n, num_chunks);
}

Index ChunkPlan::max_chunk_size() const {
  Index best = 0;
  for (Index j = 0; j < num_chunks(); ++j) best = std::max(best, chunk(j).size());
  return best;
}

Index ChunkPlan::chunk_of(Index pos) const {
  if (pos < 0 || pos >= n_) throw std::out_of_range("ChunkPlan::chunk_of: position out of range");
  auto it = std::upper_bound(bounds_.begin(), bounds_.end(), pos);
  return static_cast<Index>(it - bounds_.begin()) - 1;
}

Index min_feasible_chunks(Index n, std::size_t chunk_capacity_bytes, std::size_t point_bytes) {
  if (point_bytes == 0) throw std::invalid_argument("min_feasible_chunks: point_bytes must be > 0");
  const auto rows = static_cast<Index>(chunk_capacity_bytes / point_bytes);
  if (rows < 1) {
    throw ConfigError("chunk buffer of " + std::to_string(chunk_capacity_bytes) +
                      " bytes cannot hold a single point of " + std::to_string(point_bytes) +
                      " bytes");
  }
  Index num_chunks = std::max<Index>(1, (n + rows - 1) / rows);
  // The largest ceiling-formula chunk is ceil(n/N), so the first guess fits.
  while (ChunkPlan(n, num_chunks).max_chunk_size() > rows) ++num_chunks;
  return num_chunks;
}

ChunkPlan plan_chunks(Index n, Index num_chunks, std::size_t chunk_capacity_bytes,
                      std::size_t point_bytes) {
  ChunkPlan plan(n, num_chunks);
  const auto needed = static_cast<std::size_t>(plan.max_chunk_size()) * point_bytes;
  if (needed > chunk_capacity_bytes) {
    throw ConfigError("chunk of " + std::to_string(plan.max_chunk_size()) + " points needs " +
                      std::to_string(needed) + " bytes but the chunk buffer holds " +
                      std::to_string(chunk_capacity_bytes) + "; use N >= " +
                      std::to_string(min_feasible_chunks(n, chunk_capacity_bytes, point_bytes)));
  }
  return plan;
}

std::vector<ChunkClip> assign_query_to_chunks(PositionRange leaf, const ChunkPlan& plan) {
  if (leaf.begin < 0 || leaf.begin >= leaf.end || leaf.end > plan.num_points()) {
    throw std::invalid_argument("assign_query_to_chunks: leaf range must satisfy 0 <= l < r <= n");
  }
  std::vector<ChunkClip> out;
  const Index first = plan.chunk_of(leaf.begin);
  const Index last = plan.chunk_of(leaf.end - 1);
  out.reserve(static_cast<std::size_t>(last - first + 1));
  for (Index j = first; j <= last; ++j) {
    const PositionRange c = plan.chunk(j);
    out.push_back({j, {std::max(leaf.begin, c.begin), std::min(leaf.end, c.end)}});
  }
  return out;
}

}  // namespace bkdt
