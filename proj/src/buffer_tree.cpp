#include "bkdt/buffer_tree.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <string>

#include "bkdt/kdtree.hpp"
#include "bkdt/parallel.hpp"

namespace bkdt {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

BufferKdTree BufferKdTree::build(const PointMatrix& refs, int height) {
  validate_points(refs, 1, "reference set");
  if (height < 1 || height > 30 || (Index{1} << height) > refs.rows()) {
    throw std::invalid_argument("build_buffer_tree: need 1 <= h and 2^h <= n (h=" +
                                std::to_string(height) + ", n=" + std::to_string(refs.rows()) + ")");
  }
  BufferKdTree tree;
  TopTree& top = tree.top_;
  top.height = height;
  top.dim = refs.cols();
  top.split_values.resize(static_cast<std::size_t>(top.num_internal()));

  std::vector<Index> perm(static_cast<std::size_t>(refs.rows()));
  std::iota(perm.begin(), perm.end(), Index{0});

  // Node ranges in level order; children of j are 2j+1 and 2j+2.
  const Index total_nodes = top.num_internal() + top.num_leaves();
  std::vector<PositionRange> ranges(static_cast<std::size_t>(total_nodes));
  ranges[0] = {0, refs.rows()};
  for (Index node = 0; node < top.num_internal(); ++node) {
    const PositionRange r = ranges[node];
    const std::span<Index> part(perm.data() + r.begin, static_cast<std::size_t>(r.size()));
    top.split_values[node] = detail::median_split(refs, part, top.split_dim(node));
    const Index mid = r.begin + r.size() / 2;
    ranges[2 * node + 1] = {r.begin, mid};
    ranges[2 * node + 2] = {mid, r.end};
  }

  LeafStructure& leaves = tree.leaves_;
  leaves.leaf_bounds.assign(ranges.begin() + top.num_internal(), ranges.end());
  leaves.rearranged.resize(refs.rows(), refs.cols());
  for (Index i = 0; i < refs.rows(); ++i) leaves.rearranged.row(i) = refs.row(perm[i]);
  leaves.original_index = std::move(perm);
  tree.source_ = std::make_unique<MemoryLeafSource>(leaves.rearranged, leaves.original_index);
  return tree;
}

// ---------------------------------------------------------------------------

BufferConfig BufferConfig::defaults(int height) {
  const Index capacity = height >= 24 ? Index{1} : Index{1} << (24 - height);
  return with(capacity, 10);
}

BufferConfig BufferConfig::with(Index buffer_capacity, Index fetch_multiple) {
  BufferConfig c;
  c.buffer_capacity = buffer_capacity;
  c.fetch_size = fetch_multiple * buffer_capacity;
  c.half_full_threshold = (buffer_capacity + 1) / 2;
  c.validate();
  return c;
}

void BufferConfig::validate() const {
  if (buffer_capacity < 1) throw std::invalid_argument("buffer capacity B must be >= 1");
  if (fetch_size < 1) throw std::invalid_argument("fetch size M must be >= 1");
  if (half_full_threshold < 1 || half_full_threshold > buffer_capacity) {
    throw std::invalid_argument("half-full threshold must lie in [1, B]");
  }
}

// ---------------------------------------------------------------------------

QueryBuffers::QueryBuffers(Index num_leaves, Index capacity)
    : capacity_(capacity), buffers_(static_cast<std::size_t>(num_leaves)) {
  if (capacity < 1) throw std::invalid_argument("QueryBuffers: capacity must be >= 1");
}

void QueryBuffers::insert(Index leaf, Index query) {
  auto& buf = buffers_.at(static_cast<std::size_t>(leaf));
  if (static_cast<Index>(buf.size()) >= capacity_) {
    throw std::logic_error("buffer overflow at leaf " + std::to_string(leaf) +
                           ": scheduling must drain before a buffer exceeds B=" +
                           std::to_string(capacity_));
  }
  buf.push_back(query);
  ++total_;
  max_fill_ = std::max(max_fill_, static_cast<Index>(buf.size()));
}

std::vector<QueryBuffers::Drained> QueryBuffers::drain() {
  std::vector<Drained> out;
  out.reserve(static_cast<std::size_t>(total_));
  for (std::size_t leaf = 0; leaf < buffers_.size(); ++leaf) {
    for (Index q : buffers_[leaf]) out.push_back({static_cast<Index>(leaf), q});
    buffers_[leaf].clear();
  }
  total_ = 0;
  max_fill_ = 0;
  return out;
}

// ---------------------------------------------------------------------------

LazySearch::LazySearch(const BufferKdTree& tree, const PointMatrix& queries, SearchParams params,
                       BufferConfig config, Device& device, ChunkPlan plan, SearchOptions options)
    : tree_(tree),
      queries_(queries),
      params_(params),
      config_(config),
      device_(device),
      plan_(std::move(plan)),
      options_(options),
      buffers_(tree.num_leaves(), config.buffer_capacity) {
  validate_search(tree.size(), tree.dim(), queries.cols(), params);
  validate_points(queries, 0, "query set");
  config_.validate();
  if (plan_.num_points() != tree.size()) {
    throw std::invalid_argument("lazy_search: chunk plan covers " +
                                std::to_string(plan_.num_points()) + " points, tree has " +
                                std::to_string(tree.size()));
  }
  if (static_cast<std::size_t>(plan_.max_chunk_size()) * point_bytes(tree.dim()) >
      device.chunk_bytes()) {
    throw ConfigError("lazy_search: largest chunk does not fit the device chunk buffer; use N >= " +
                      std::to_string(min_feasible_chunks(tree.size(), device.chunk_bytes(),
                                                         point_bytes(tree.dim()))));
  }
  const Index m = queries.rows();
  device_.upload_queries(queries, params.k);
  states_.resize(static_cast<std::size_t>(m));
  neighbors_.assign(static_cast<std::size_t>(m), NeighborList<float>(params.k));
  if (options_.record_visits) visits_.resize(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) input_.push_back(i);
}

bool LazySearch::should_visit(const QueryState::Pending& p, const float* q,
                              const NeighborList<float>& nn) const {
  const TopTree& top = tree_.top();
  const float diff = q[top.split_dim(p.parent)] - top.split_values[p.parent];
  return !nn.full() || diff * diff <= nn.worst();
}

Index LazySearch::descend(QueryState& state, const float* q, Index node) {
  const TopTree& top = tree_.top();
  while (!top.is_leaf_node(node)) {
    const bool go_left = q[top.split_dim(node)] < top.split_values[node];
    const Index near = go_left ? 2 * node + 1 : 2 * node + 2;
    const Index far = go_left ? 2 * node + 2 : 2 * node + 1;
    state.stack.push_back({static_cast<std::int32_t>(node), static_cast<std::int32_t>(far)});
    node = near;
  }
  return top.leaf_of(node);
}

std::vector<Index> LazySearch::find_leaf_batch(std::span<const Index> queries) {
  std::vector<Index> result(queries.size(), kDone);
  parallel_for(static_cast<Index>(queries.size()), options_.host_threads, [&](Index i) {
    const Index qi = queries[static_cast<std::size_t>(i)];
    QueryState& state = states_[static_cast<std::size_t>(qi)];
    if (state.done) throw std::logic_error("find_leaf_batch: query already finished");
    const float* q = queries_.data() + qi * queries_.cols();
    if (!state.started) {
      state.started = true;
      result[static_cast<std::size_t>(i)] = descend(state, q, 0);
      return;
    }
    const NeighborList<float>& nn = neighbors_[static_cast<std::size_t>(qi)];
    while (!state.stack.empty()) {
      const QueryState::Pending p = state.stack.back();
      state.stack.pop_back();
      if (should_visit(p, q, nn)) {
        result[static_cast<std::size_t>(i)] = descend(state, q, p.far_child);
        return;
      }
    }
    state.done = true;
  });
  return result;
}

std::vector<Index> LazySearch::process_all_buffers() {
  if (buffers_.total() == 0) {
    throw std::logic_error("process_all_buffers called with every buffer empty");
  }
  const auto drained = buffers_.drain();
  in_flight_.clear();
  std::vector<std::vector<KernelAssignment>> per_chunk(static_cast<std::size_t>(plan_.num_chunks()));
  for (const auto& [leaf, query] : drained) {
    in_flight_.push_back(query);
    for (const ChunkClip& c : assign_query_to_chunks(tree_.leaf_bounds(leaf), plan_)) {
      per_chunk[static_cast<std::size_t>(c.chunk)].push_back({query, c.clip});
    }
    if (options_.record_visits) visits_[static_cast<std::size_t>(query)].push_back(leaf);
  }
  check();
  device_.run_chunk_pipeline(tree_.source(), plan_, per_chunk, neighbors_);
  ++stats_.process_calls;
  stats_.leaf_scans += static_cast<std::int64_t>(drained.size());

  std::vector<Index> again;
  again.reserve(drained.size());
  for (Index q : in_flight_) {
    QueryState& state = states_[static_cast<std::size_t>(q)];
    if (state.stack.empty()) {
      state.done = true;
    } else {
      again.push_back(q);
    }
  }
  in_flight_ = again;
  return again;
}

QueryCensus LazySearch::audit() const {
  const Index m = queries_.rows();
  std::vector<int> seen(static_cast<std::size_t>(m), 0);
  QueryCensus c;
  auto mark = [&](Index q, Index& counter) {
    if (q < 0 || q >= m) throw std::logic_error("audit: query index out of range");
    ++seen[static_cast<std::size_t>(q)];
    ++counter;
  };
  for (Index q : input_) mark(q, c.input);
  for (Index q : reinsert_) mark(q, c.reinsert);
  for (Index leaf = 0; leaf < buffers_.num_leaves(); ++leaf) {
    for (Index q : buffers_.contents(leaf)) mark(q, c.buffered);
  }
  for (const auto& entry : spill_) mark(entry.second, c.spilled);
  for (Index q : in_flight_) mark(q, c.in_flight);
  for (Index q = 0; q < m; ++q) {
    if (states_[static_cast<std::size_t>(q)].done) mark(q, c.done);
  }
  for (Index q = 0; q < m; ++q) {
    if (seen[static_cast<std::size_t>(q)] != 1) {
      throw std::logic_error("audit: query " + std::to_string(q) + " is in " +
                             std::to_string(seen[static_cast<std::size_t>(q)]) + " places");
    }
  }
  return c;
}

void LazySearch::check() {
  if (options_.check_invariants) audit();
}

NeighborTable<float> LazySearch::run() {
  using clock = std::chrono::steady_clock;
  const std::size_t fetch = static_cast<std::size_t>(config_.fetch_size);
  check();
  while (!input_.empty() || !reinsert_.empty() || !spill_.empty()) {
    ++stats_.iterations;
    auto t0 = clock::now();

    // Queries parked because their buffer was full already know their leaf.
    std::erase_if(spill_, [&](const std::pair<Index, Index>& e) {
      if (buffers_.is_full(e.first)) return false;
      buffers_.insert(e.first, e.second);
      return true;
    });

    in_flight_.clear();
    while (in_flight_.size() < fetch && !reinsert_.empty()) {
      in_flight_.push_back(reinsert_.front());
      reinsert_.pop_front();
    }
    while (in_flight_.size() < fetch && !input_.empty()) {
      in_flight_.push_back(input_.front());
      input_.pop_front();
    }
    check();
    stats_.buffer_seconds += seconds_since(t0);

    t0 = clock::now();
    const std::vector<Index> leaves = find_leaf_batch(in_flight_);
    stats_.find_leaf_seconds += seconds_since(t0);

    t0 = clock::now();
    for (std::size_t j = 0; j < leaves.size(); ++j) {
      if (leaves[j] == kDone) continue;
      if (buffers_.is_full(leaves[j])) {
        spill_.emplace_back(leaves[j], in_flight_[j]);
        ++stats_.spilled;
      } else {
        buffers_.insert(leaves[j], in_flight_[j]);
      }
    }
    in_flight_.clear();
    check();
    const bool trigger = buffers_.max_fill() >= config_.half_full_threshold ||
                         (input_.empty() && reinsert_.empty() && buffers_.total() > 0);
    stats_.buffer_seconds += seconds_since(t0);

    if (trigger) {
      t0 = clock::now();
      std::vector<Index> again = process_all_buffers();
      reinsert_.insert(reinsert_.end(), again.begin(), again.end());
      in_flight_.clear();
      stats_.process_seconds += seconds_since(t0);
      check();
    }
  }
  // The wrap-around copy still reads the tree's leaf structure.
  device_.wait_all();
  return std::move(neighbors_);
}

NeighborTable<float> lazy_search(const BufferKdTree& tree, const PointMatrix& queries,
                                 const SearchParams& params, const BufferConfig& config,
                                 Device& device, const ChunkPlan& plan,
                                 const SearchOptions& options, SearchStats* stats) {
  LazySearch search(tree, queries, params, config, device, plan, options);
  NeighborTable<float> out = search.run();
  if (stats) *stats = search.stats();
  return out;
}

}  // namespace bkdt
