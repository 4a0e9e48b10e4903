#pragma once

#include <bit>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "bkdt/chunk_plan.hpp"
#include "bkdt/core.hpp"
#include "bkdt/device.hpp"

namespace bkdt {

/// Pointer-less complete k-d tree of height h stored in level order: node j
/// has children 2j+1 and 2j+2, internal nodes are [0, 2^h - 1), and leaf
/// node 2^h - 1 + i is leaf i. The split dimension of a node is its depth mod d.
struct TopTree {
  int height = 0;
  Index dim = 0;
  std::vector<float> split_values;  // one per internal node

  Index num_internal() const { return (Index{1} << height) - 1; }
  Index num_leaves() const { return Index{1} << height; }
  static int depth_of(Index node) { return std::bit_width(static_cast<std::uint64_t>(node) + 1) - 1; }
  Index split_dim(Index node) const { return depth_of(node) % dim; }
  bool is_leaf_node(Index node) const { return node >= num_internal(); }
  Index leaf_of(Index node) const { return node - num_internal(); }
};

/// Reference points permuted so each leaf is a contiguous run of rows.
struct LeafStructure {
  PointMatrix rearranged;
  std::vector<Index> original_index;
  std::vector<PositionRange> leaf_bounds;
};

class BufferKdTree {
 public:
  /// Throws std::invalid_argument unless 1 <= height and 2^height <= n.
  static BufferKdTree build(const PointMatrix& refs, int height);

  BufferKdTree(BufferKdTree&&) noexcept = default;
  BufferKdTree& operator=(BufferKdTree&&) noexcept = default;

  const TopTree& top() const { return top_; }
  const LeafStructure& leaves() const { return leaves_; }
  Index size() const { return leaves_.rearranged.rows(); }
  Index dim() const { return leaves_.rearranged.cols(); }
  int height() const { return top_.height; }
  Index num_leaves() const { return top_.num_leaves(); }
  PositionRange leaf_bounds(Index leaf) const { return leaves_.leaf_bounds[leaf]; }

  /// In-memory view of the leaf structure for device staging.
  const LeafSource& source() const { return *source_; }

 private:
  BufferKdTree() = default;

  TopTree top_;
  LeafStructure leaves_;
  std::unique_ptr<MemoryLeafSource> source_;
};

inline BufferKdTree build_buffer_tree(const PointMatrix& refs, int height) {
  return BufferKdTree::build(refs, height);
}

/// B = 2^(24-h) (at least 1), M = 10*B, half-full threshold ceil(B/2).
struct BufferConfig {
  Index buffer_capacity = 1;
  Index fetch_size = 10;
  Index half_full_threshold = 1;

  static BufferConfig defaults(int height);
  /// Capacity and fetch size with fetch = multiple * capacity.
  static BufferConfig with(Index buffer_capacity, Index fetch_multiple = 10);
  void validate() const;
};

/// Fixed-capacity per-leaf buffers of query indices.
class QueryBuffers {
 public:
  QueryBuffers(Index num_leaves, Index capacity);

  Index capacity() const { return capacity_; }
  Index num_leaves() const { return static_cast<Index>(buffers_.size()); }
  Index fill(Index leaf) const { return static_cast<Index>(buffers_[leaf].size()); }
  bool is_full(Index leaf) const { return fill(leaf) >= capacity_; }
  Index total() const { return total_; }
  /// Largest fill since the last drain.
  Index max_fill() const { return max_fill_; }

  /// Throws std::logic_error on overflow: the caller must drain first.
  void insert(Index leaf, Index query);
  std::span<const Index> contents(Index leaf) const { return buffers_[leaf]; }

  /// Removes everything, grouped by leaf in increasing leaf order.
  struct Drained {
    Index leaf;
    Index query;
  };
  std::vector<Drained> drain();

 private:
  Index capacity_;
  Index total_ = 0;
  Index max_fill_ = 0;
  std::vector<std::vector<Index>> buffers_;
};

inline void buffer_insert(QueryBuffers& buffers, Index leaf, Index query) {
  buffers.insert(leaf, query);
}

/// Per-query traversal of the top tree: pending far children with the node
/// whose split decides whether they can still hold a closer point.
struct QueryState {
  struct Pending {
    std::int32_t parent;
    std::int32_t far_child;
  };
  std::vector<Pending> stack;
  bool started = false;
  bool done = false;
};

/// Returned by find_leaf_batch for queries whose traversal finished.
inline constexpr Index kDone = -1;

struct SearchStats {
  std::int64_t iterations = 0;
  std::int64_t process_calls = 0;
  std::int64_t leaf_scans = 0;
  std::int64_t spilled = 0;
  double find_leaf_seconds = 0;
  double buffer_seconds = 0;
  double process_seconds = 0;
};

struct SearchOptions {
  int host_threads = 1;
  bool record_visits = false;
  bool check_invariants = false;
};

/// Where each query currently is; the counts always sum to m.
struct QueryCensus {
  Index input = 0;
  Index reinsert = 0;
  Index buffered = 0;
  Index spilled = 0;
  Index in_flight = 0;
  Index done = 0;

  Index total() const { return input + reinsert + buffered + spilled + in_flight + done; }
};

/// Lazy batched search of one query block on one device.
///
/// Queries are pushed through the top tree in batches; each one is parked in
/// the buffer of the leaf it must scan next. When a buffer becomes half full
/// (or no work is left to fetch) all buffers are drained through the device
/// chunk pipeline and the drained queries re-enter the traversal.
class LazySearch {
 public:
  LazySearch(const BufferKdTree& tree, const PointMatrix& queries, SearchParams params,
             BufferConfig config, Device& device, ChunkPlan plan, SearchOptions options = {});

  /// Runs the whole loop and returns one list per query.
  NeighborTable<float> run();

  /// Advances each query to its next leaf (or kDone). Queries must not be
  /// buffered or finished.
  std::vector<Index> find_leaf_batch(std::span<const Index> queries);

  /// Scans every buffered query against its leaf on the device and empties
  /// the buffers. Returns the queries that still have subtrees to visit;
  /// the others are marked done.
  std::vector<Index> process_all_buffers();

  const QueryBuffers& buffers() const { return buffers_; }
  QueryBuffers& buffers() { return buffers_; }
  const QueryState& state(Index q) const { return states_[q]; }
  const NeighborList<float>& neighbors(Index q) const { return neighbors_[q]; }
  const SearchStats& stats() const { return stats_; }
  /// Leaf ids scanned for query q in order; needs options.record_visits.
  std::span<const Index> visited(Index q) const { return visits_[q]; }

  /// Counts queries by location and verifies each appears exactly once.
  /// Throws std::logic_error on violation.
  QueryCensus audit() const;

 private:
  Index descend(QueryState& state, const float* q, Index node);
  bool should_visit(const QueryState::Pending& p, const float* q, const NeighborList<float>& nn) const;
  void check();

  const BufferKdTree& tree_;
  const PointMatrix& queries_;
  SearchParams params_;
  BufferConfig config_;
  Device& device_;
  ChunkPlan plan_;
  SearchOptions options_;

  std::vector<QueryState> states_;
  NeighborTable<float> neighbors_;
  std::vector<std::vector<Index>> visits_;
  QueryBuffers buffers_;
  std::deque<Index> input_;
  std::deque<Index> reinsert_;
  std::vector<std::pair<Index, Index>> spill_;  // (leaf, query)
  std::vector<Index> in_flight_;
  SearchStats stats_;
};

/// Exact k-NN for `queries` through the buffer k-d tree on one device.
NeighborTable<float> lazy_search(const BufferKdTree& tree, const PointMatrix& queries,
                                 const SearchParams& params, const BufferConfig& config,
                                 Device& device, const ChunkPlan& plan,
                                 const SearchOptions& options = {}, SearchStats* stats = nullptr);

}  // namespace bkdt
