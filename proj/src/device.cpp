#include "bkdt/device.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <ostream>

#include "bkdt/parallel.hpp"

namespace bkdt {

static_assert(std::endian::native == std::endian::little,
              "leaf files and datasets are read by memcpy on little-endian hosts only");

namespace detail {

struct EventState {
  std::mutex mutex;
  std::condition_variable cv;
  bool done = false;
  std::exception_ptr error;
  int queue = 0;
  std::uint64_t seq = 0;
  std::int64_t t_end = 0;

  void finish(std::exception_ptr err, std::int64_t end_ns) {
    {
      std::lock_guard lock(mutex);
      t_end = end_ns;
      error = std::move(err);
      done = true;
    }
    cv.notify_all();
  }

  void block() {
    std::unique_lock lock(mutex);
    cv.wait(lock, [&] { return done; });
  }
};

struct Command {
  std::shared_ptr<EventState> event;
  CommandKind kind;
  Index chunk;
  Index round;
  Index paired;
  std::int64_t submit_ns;
  // Copies run on a DMA engine: they start as soon as they are ready, not
  // when the host schedules the worker thread.
  bool dma;
  std::vector<std::shared_ptr<EventState>> deps;
  std::function<void(std::int64_t)> body;  // argument: ready time in ns
  std::function<void()> begin_access;
  std::function<void()> end_access;
};

struct QueueWorker {
  int id = 0;
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<Command> pending;
  bool stopping = false;
  std::uint64_t last_seq = 0;
  std::int64_t last_end = 0;  // worker thread only
  std::exception_ptr failure;  // sticky: once a command fails the queue is dead
  std::jthread thread;
};

}  // namespace detail

const char* to_string(CommandKind kind) {
  switch (kind) {
    case CommandKind::Stage: return "stage";
    case CommandKind::Copy: return "copy";
    case CommandKind::Compute: return "compute";
    case CommandKind::Marker: return "marker";
  }
  return "?";
}

bool Event::complete() const {
  if (!state_) return false;
  std::lock_guard lock(state_->mutex);
  return state_->done;
}

int Event::queue() const { return state_ ? state_->queue : -1; }
std::uint64_t Event::sequence() const { return state_ ? state_->seq : 0; }

// ---------------------------------------------------------------------------
// Leaf sources

LeafSource::LeafSource() {
  static std::atomic<std::uint64_t> next{1};
  id_ = next.fetch_add(1);
}

MemoryLeafSource::MemoryLeafSource(const PointMatrix& points, std::span<const Index> ids)
    : points_(&points), ids_(ids) {
  if (static_cast<Index>(ids.size()) != points.rows()) {
    throw std::invalid_argument("MemoryLeafSource: one id per point required");
  }
}

void MemoryLeafSource::read(PositionRange range, float* coords, Index* ids) const {
  const Index d = dim();
  std::memcpy(coords, points_->data() + range.begin * d,
              static_cast<std::size_t>(range.size() * d) * sizeof(float));
  std::copy(ids_.begin() + range.begin, ids_.begin() + range.end, ids);
}

namespace {

constexpr char kLeafMagic[4] = {'B', 'K', 'L', 'F'};
constexpr std::uint32_t kLeafVersion = 1;
constexpr std::size_t kLeafHeader = 4 + 4 + 8 + 4 + 4;

}  // namespace

void MappedLeafFile::write(const std::filesystem::path& path, const PointMatrix& points,
                           std::span<const Index> ids) {
  if (static_cast<Index>(ids.size()) != points.rows()) {
    throw std::invalid_argument("MappedLeafFile::write: one id per point required");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const auto n = static_cast<std::uint64_t>(points.rows());
  const auto d = static_cast<std::uint32_t>(points.cols());
  const std::uint32_t reserved = 0;
  out.write(kLeafMagic, 4);
  out.write(reinterpret_cast<const char*>(&kLeafVersion), 4);
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&d), 4);
  out.write(reinterpret_cast<const char*>(&reserved), 4);
  out.write(reinterpret_cast<const char*>(points.data()),
            static_cast<std::streamsize>(points.size() * sizeof(float)));
  for (Index id : ids) {
    const auto v = static_cast<std::int64_t>(id);
    out.write(reinterpret_cast<const char*>(&v), 8);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

MappedLeafFile::MappedLeafFile(const std::filesystem::path& path) {
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) throw std::runtime_error("cannot open leaf file " + path.string());
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw std::runtime_error("cannot stat leaf file " + path.string());
  }
  length_ = static_cast<std::size_t>(st.st_size);
  if (length_ < kLeafHeader) {
    ::close(fd);
    throw std::runtime_error("leaf file " + path.string() + " is truncated");
  }
  base_ = ::mmap(nullptr, length_, PROT_READ, MAP_PRIVATE, fd, 0);
  ::close(fd);
  if (base_ == MAP_FAILED) {
    base_ = nullptr;
    throw std::runtime_error("mmap failed for " + path.string());
  }
  const auto* bytes = static_cast<const unsigned char*>(base_);
  std::uint32_t version = 0, d = 0;
  std::uint64_t n = 0;
  std::memcpy(&version, bytes + 4, 4);
  std::memcpy(&n, bytes + 8, 8);
  std::memcpy(&d, bytes + 16, 4);
  const std::size_t expected =
      kLeafHeader + n * d * sizeof(float) + n * sizeof(std::int64_t);
  if (std::memcmp(bytes, kLeafMagic, 4) != 0 || version != kLeafVersion || expected != length_) {
    ::munmap(base_, length_);
    base_ = nullptr;
    throw std::runtime_error("leaf file " + path.string() + " has a bad header or length");
  }
  n_ = static_cast<Index>(n);
  d_ = static_cast<Index>(d);
  coords_ = bytes + kLeafHeader;
  ids_ = coords_ + n * d * sizeof(float);
}

MappedLeafFile::~MappedLeafFile() {
  if (base_) ::munmap(base_, length_);
}

void MappedLeafFile::read(PositionRange range, float* coords, Index* ids) const {
  std::memcpy(coords, coords_ + static_cast<std::size_t>(range.begin * d_) * sizeof(float),
              static_cast<std::size_t>(range.size() * d_) * sizeof(float));
  for (Index i = range.begin; i < range.end; ++i) {
    std::int64_t v;
    std::memcpy(&v, ids_ + static_cast<std::size_t>(i) * 8, 8);
    ids[i - range.begin] = static_cast<Index>(v);
  }
}

// ---------------------------------------------------------------------------
// Device

Device::Device(DeviceSpec spec, std::size_t chunk_bytes, std::size_t query_block_bytes)
    : spec_(std::move(spec)),
      chunk_bytes_(chunk_bytes),
      query_block_bytes_(query_block_bytes),
      epoch_(std::chrono::steady_clock::now()) {
  if (spec_.worker_lanes < 1) throw std::invalid_argument("DeviceSpec: worker_lanes must be >= 1");
  if (chunk_bytes_ == 0) throw std::invalid_argument("Device: chunk_bytes must be > 0");
  const std::size_t required = 2 * chunk_bytes_ + query_block_bytes_;
  if (required > spec_.memory_capacity) {
    throw ConfigError("device '" + spec_.name + "' needs " + std::to_string(required) +
                      " bytes (2 x " + std::to_string(chunk_bytes_) + " chunk + " +
                      std::to_string(query_block_bytes_) + " query block) but has " +
                      std::to_string(spec_.memory_capacity));
  }
  for (int q = 0; q < kNumQueues; ++q) {
    workers_[q] = std::make_unique<detail::QueueWorker>();
    workers_[q]->id = q;
    workers_[q]->thread = std::jthread([this, w = workers_[q].get()] { worker_loop(*w); });
  }
}

Device::~Device() {
  for (auto& w : workers_) {
    {
      std::lock_guard lock(w->mutex);
      w->stopping = true;
    }
    w->cv.notify_all();
  }
  for (auto& w : workers_) {
    if (w->thread.joinable()) w->thread.join();
  }
}

std::int64_t Device::now_ns() const {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() -
                                                              epoch_)
      .count();
}

void Device::worker_loop(detail::QueueWorker& worker) {
  for (;;) {
    detail::Command cmd;
    std::exception_ptr sticky;
    {
      std::unique_lock lock(worker.mutex);
      worker.cv.wait(lock, [&] { return worker.stopping || !worker.pending.empty(); });
      if (worker.pending.empty()) return;
      cmd = std::move(worker.pending.front());
      worker.pending.pop_front();
      sticky = worker.failure;
    }
    if (sticky) {
      cmd.event->finish(sticky, now_ns());
      continue;
    }
    std::exception_ptr error;
    std::int64_t ready = std::max(cmd.submit_ns, worker.last_end);
    for (auto& dep : cmd.deps) {
      dep->block();
      if (dep->error && !error) error = dep->error;
      ready = std::max(ready, dep->t_end);
    }
    const std::int64_t t0 = cmd.dma ? ready : now_ns();
    if (!error) {
      cmd.begin_access();
      try {
        cmd.body(ready);
      } catch (...) {
        error = std::current_exception();
      }
      cmd.end_access();
    }
    const std::int64_t t1 = now_ns();
    {
      std::lock_guard lock(trace_mutex_);
      trace_.push_back({cmd.kind, worker.id, cmd.chunk, t0, t1, cmd.round, cmd.paired});
    }
    if (error) {
      std::lock_guard lock(worker.mutex);
      worker.failure = error;
    }
    worker.last_end = t1;
    cmd.event->finish(error, t1);
  }
}

void Device::check_queue_index(int queue) const {
  if (queue < 0 || queue >= kNumQueues) throw std::out_of_range("Device: queue index out of range");
}

void Device::record_hazard(std::string message) {
  // hazard_mutex_ held by caller
  hazards_.push_back(std::move(message));
}

void Device::check_submission_hazards(int queue, const std::vector<Access>& accesses,
                                      std::span<const Event> deps) {
  std::array<std::uint64_t, kNumQueues> ordered = observed_seq_;
  for (const Event& dep : deps) {
    if (!dep.valid()) continue;
    ordered[dep.queue()] = std::max(ordered[dep.queue()], dep.sequence());
  }
  for (const Access& a : accesses) {
    for (const OutstandingUse& use : outstanding_[a.resource]) {
      if (use.queue == queue || use.seq <= ordered[use.queue]) continue;
      if (!use.write && !a.write) continue;
      std::string msg = "submission hazard on " +
                        std::string(a.resource < kBuffer0 ? "staging " : "chunk buffer ") +
                        std::to_string(a.resource % 2) + ": queue " + std::to_string(queue) +
                        (a.write ? " writes" : " reads") + " while command #" +
                        std::to_string(use.seq) + " on queue " + std::to_string(use.queue) +
                        (use.write ? " writes" : " reads") + " it without ordering";
      record_hazard(msg);
      throw PipelineHazard(msg);
    }
  }
}

void Device::begin_runtime_access(const std::vector<Access>& accesses, CommandKind kind,
                                  Index chunk) {
  std::lock_guard lock(hazard_mutex_);
  for (const Access& a : accesses) {
    const bool clash = a.write ? (active_writers_[a.resource] > 0 || active_readers_[a.resource] > 0)
                               : active_writers_[a.resource] > 0;
    if (clash) {
      record_hazard(std::string("runtime hazard: ") + to_string(kind) + " of chunk " +
                    std::to_string(chunk) + " overlapped a conflicting access to resource " +
                    std::to_string(a.resource));
    }
    (a.write ? active_writers_ : active_readers_)[a.resource]++;
  }
}

void Device::end_runtime_access(const std::vector<Access>& accesses) {
  std::lock_guard lock(hazard_mutex_);
  for (const Access& a : accesses) (a.write ? active_writers_ : active_readers_)[a.resource]--;
}

void Device::mark_observed(int queue, std::uint64_t seq) {
  std::lock_guard lock(hazard_mutex_);
  observed_seq_[queue] = std::max(observed_seq_[queue], seq);
  for (auto& uses : outstanding_) {
    std::erase_if(uses, [&](const OutstandingUse& u) {
      return u.queue == queue && u.seq <= observed_seq_[queue];
    });
  }
}

Event Device::submit(int queue, CommandKind kind, Index chunk, std::vector<Access> accesses,
                     std::span<const Event> deps, std::function<void(std::int64_t)> body,
                     bool dma) {
  check_queue_index(queue);
  auto& worker = *workers_[queue];
  auto state = std::make_shared<detail::EventState>();
  state->queue = queue;
  {
    std::lock_guard lock(hazard_mutex_);
    check_submission_hazards(queue, accesses, deps);
    std::lock_guard wlock(worker.mutex);
    state->seq = ++worker.last_seq;
    for (const Access& a : accesses) outstanding_[a.resource].push_back({queue, state->seq, a.write});
  }
  detail::Command cmd;
  cmd.event = state;
  cmd.kind = kind;
  cmd.chunk = chunk;
  cmd.round = round_;
  cmd.paired = pairing_;
  cmd.submit_ns = now_ns();
  cmd.dma = dma;
  for (const Event& dep : deps) {
    if (dep.valid()) cmd.deps.push_back(dep.state_);
  }
  cmd.body = std::move(body);
  cmd.begin_access = [this, accesses, kind, chunk] { begin_runtime_access(accesses, kind, chunk); };
  cmd.end_access = [this, accesses] { end_runtime_access(accesses); };
  {
    std::lock_guard lock(worker.mutex);
    worker.pending.push_back(std::move(cmd));
  }
  worker.cv.notify_one();
  return Event(std::move(state));
}

void Device::upload_queries(const Eigen::Ref<const PointMatrix>& queries, Index k) {
  wait_all();
  const std::size_t need = static_cast<std::size_t>(queries.rows()) * query_bytes(queries.cols(), k);
  if (need > query_block_bytes_) {
    throw ConfigError("query block of " + std::to_string(queries.rows()) + " queries needs " +
                      std::to_string(need) + " bytes but device '" + spec_.name + "' reserves " +
                      std::to_string(query_block_bytes_));
  }
  query_block_ = queries;
}

Event Device::enqueue_stage(int queue, const LeafSource& source, PositionRange range, int staging,
                            Index chunk, std::span<const Event> deps) {
  if (staging < 0 || staging >= kNumBuffers) throw std::out_of_range("staging index out of range");
  if (range.begin < 0 || range.end > source.size() || range.empty()) {
    throw std::out_of_range("enqueue_stage: range outside the leaf structure");
  }
  const Index d = source.dim();
  if (static_cast<std::size_t>(range.size()) * point_bytes(d) > chunk_bytes_) {
    throw ConfigError("chunk of " + std::to_string(range.size()) + " points exceeds the " +
                      std::to_string(chunk_bytes_) + "-byte chunk buffer");
  }
  Event ev = submit(queue, CommandKind::Stage, chunk, {{kStaging0 + staging, true}}, deps,
                    [this, &source, range, staging, d](std::int64_t) {
                      ChunkStore& store = staging_[staging];
                      store.coords.resize(static_cast<std::size_t>(range.size() * d));
                      store.ids.resize(static_cast<std::size_t>(range.size()));
                      source.read(range, store.coords.data(), store.ids.data());
                      store.range = range;
                      store.dim = d;
                    });
  staged_shadow_[staging] = range;
  return ev;
}

Event Device::enqueue_copy(int queue, int buffer, Index chunk, std::span<const Event> deps) {
  if (buffer < 0 || buffer >= kNumBuffers) throw std::out_of_range("buffer index out of range");
  Event ev = submit(queue, CommandKind::Copy, chunk,
                    {{kStaging0 + buffer, false}, {kBuffer0 + buffer, true}}, deps,
                    [this, buffer](std::int64_t ready_ns) {
                      const auto start = epoch_ + std::chrono::nanoseconds(ready_ns);
                      const ChunkStore& src = staging_[buffer];
                      ChunkStore& dst = buffers_[buffer];
                      dst.coords.assign(src.coords.begin(), src.coords.end());
                      dst.ids.assign(src.ids.begin(), src.ids.end());
                      dst.range = src.range;
                      dst.dim = src.dim;
                      if (spec_.simulated_copy_rate > 0.0) {
                        const double bytes =
                            static_cast<double>(src.range.size()) *
                            static_cast<double>(point_bytes(src.dim));
                        std::this_thread::sleep_until(
                            start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                        std::chrono::duration<double>(bytes /
                                                                      spec_.simulated_copy_rate)));
                      }
                    },
                    spec_.simulated_copy_rate > 0.0);
  buffer_shadow_[buffer] = staged_shadow_[buffer];
  return ev;
}

Event Device::enqueue_brute_kernel(int queue, int buffer, std::vector<KernelAssignment> assignments,
                                   std::span<NeighborList<float>> results, Index chunk,
                                   std::span<const Event> deps) {
  if (buffer < 0 || buffer >= kNumBuffers) throw std::out_of_range("buffer index out of range");
  const PositionRange resident = buffer_shadow_[buffer];
  std::vector<char> seen(results.size(), 0);
  for (const KernelAssignment& a : assignments) {
    if (a.slot < 0 || a.slot >= static_cast<Index>(results.size()) || a.slot >= query_block_.rows()) {
      throw std::out_of_range("kernel assignment slot " + std::to_string(a.slot) +
                              " outside the query block");
    }
    if (a.range.begin < resident.begin || a.range.end > resident.end || a.range.size() < 0) {
      throw std::out_of_range("kernel assignment [" + std::to_string(a.range.begin) + ", " +
                              std::to_string(a.range.end) + ") outside chunk [" +
                              std::to_string(resident.begin) + ", " + std::to_string(resident.end) +
                              ")");
    }
    if (seen[a.slot]++) {
      throw std::invalid_argument("kernel assigns query slot " + std::to_string(a.slot) +
                                  " to more than one lane");
    }
  }
  return submit(queue, CommandKind::Compute, chunk, {{kBuffer0 + buffer, false}}, deps,
                [this, buffer, results, assignments = std::move(assignments)](std::int64_t) {
                  const std::int64_t started = kernels_started_.fetch_add(1);
                  if (spec_.fail_after_kernels && started >= *spec_.fail_after_kernels) {
                    throw DeviceFailure("device '" + spec_.name + "' failed after " +
                                        std::to_string(started) + " kernels");
                  }
                  run_kernel(buffer, assignments, results);
                  kernels_run_.fetch_add(1);
                });
}

void Device::run_kernel(int buffer, const std::vector<KernelAssignment>& assignments,
                        std::span<NeighborList<float>> results) {
  const ChunkStore& store = buffers_[buffer];
  const Index d = store.dim;
  if (!assignments.empty() && d != query_block_.cols()) {
    throw std::logic_error("kernel: chunk and query block dimensionality differ");
  }
  parallel_for(static_cast<Index>(assignments.size()), spec_.worker_lanes, [&](Index i) {
    const KernelAssignment& a = assignments[static_cast<std::size_t>(i)];
    NeighborList<float>& list = results[static_cast<std::size_t>(a.slot)];
    const auto q = query_block_.row(a.slot);
    for (Index pos = a.range.begin; pos < a.range.end; ++pos) {
      const Index local = pos - store.range.begin;
      const RowMap<float> p(store.coords.data() + local * d, d);
      list.insert(store.ids[static_cast<std::size_t>(local)], sq_euclidean(q, p));
    }
  });
  Index evals = 0;
  for (const KernelAssignment& a : assignments) evals += a.range.size();
  distance_evals_.fetch_add(evals);
}

Event Device::enqueue_marker(int queue) {
  return submit(queue, CommandKind::Marker, -1, {}, {}, [](std::int64_t) {});
}

void Device::wait(const Event& event) {
  if (!event.valid()) throw std::invalid_argument("Device::wait: invalid event");
  event.state_->block();
  mark_observed(event.state_->queue, event.state_->seq);
  if (event.state_->error) std::rethrow_exception(event.state_->error);
}

void Device::wait(int queue) { wait(enqueue_marker(queue)); }

void Device::wait_all() {
  std::exception_ptr first;
  for (int q = 0; q < kNumQueues; ++q) {
    try {
      wait(q);
    } catch (...) {
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
}

void Device::run_chunk_pipeline(const LeafSource& source, const ChunkPlan& plan,
                                std::span<const std::vector<KernelAssignment>> per_chunk,
                                std::span<NeighborList<float>> results) {
  const Index num_chunks = plan.num_chunks();
  if (static_cast<Index>(per_chunk.size()) != num_chunks) {
    throw std::invalid_argument("run_chunk_pipeline: one assignment list per chunk required");
  }
  if (source.size() != plan.num_points()) {
    throw std::invalid_argument("run_chunk_pipeline: plan does not match the leaf structure");
  }
  ++round_;
  const bool prestaged =
      resident_.valid && resident_.source == source.id() && resident_.range == plan.chunk(0);
  const bool next_staged = prestaged && resident_.next == plan.chunk(1 % num_chunks);
  const int first = prestaged ? resident_.buffer : 0;
  resident_.valid = false;
  pairing_ = -1;
  // Step c moves chunk c mod N through staging and buffer (first + c) % 2 on
  // queue (first + c) % 2. Step N restages chunk 0 and step N+1 stages chunk
  // 1 for the next call.
  auto side = [first](Index c) { return static_cast<int>((first + c) % 2); };
  auto chunk_at = [num_chunks](Index c) { return c % num_chunks; };
  std::vector<Event> staged(static_cast<std::size_t>(num_chunks + 2));
  std::vector<Event> copied(static_cast<std::size_t>(num_chunks + 2));
  if (prestaged) {
    copied[0] = resident_.copy;
  } else {
    staged[0] = enqueue_stage(side(0), source, plan.chunk(0), side(0), 0);
    copied[0] = enqueue_copy(side(0), side(0), 0);
  }
  if (next_staged) {
    staged[1] = resident_.next_stage;
  } else {
    std::vector<Event> deps;
    if (prestaged && resident_.copy.valid()) deps.push_back(resident_.copy);
    staged[1] = enqueue_stage(side(1), source, plan.chunk(chunk_at(1)), side(1), chunk_at(1), deps);
  }

  for (Index j = 0; j < num_chunks; ++j) {
    const auto at = [](Index c) { return static_cast<std::size_t>(c); };
    const int slot = side(j);
    const int other = side(j + 1);
    pairing_ = j;
    // The buffer for step j+1 was freed when kernel j-1 was waited on, so the
    // copy goes out before kernel j to overlap it.
    const Event stage_dep[] = {staged[at(j + 1)]};
    copied[at(j + 1)] = enqueue_copy(other, other, chunk_at(j + 1), stage_dep);
    pairing_ = -1;
    Event kernel = enqueue_brute_kernel(slot, slot, per_chunk[at(j)], results, j);
    pairing_ = j;
    // Staging `slot` is free once copy j has read it.
    std::vector<Event> deps;
    if (copied[at(j)].valid()) deps.push_back(copied[at(j)]);
    staged[at(j + 2)] = enqueue_stage(other, source, plan.chunk(chunk_at(j + 2)), slot, chunk_at(j + 2), deps);
    pairing_ = -1;
    wait(kernel);
  }
  resident_ = {true,
               source.id(),
               plan.chunk(0),
               side(num_chunks),
               side(num_chunks),
               copied[static_cast<std::size_t>(num_chunks)],
               plan.chunk(chunk_at(num_chunks + 1)),
               staged[static_cast<std::size_t>(num_chunks + 1)]};
}

std::vector<TraceRecord> Device::trace() const {
  std::lock_guard lock(trace_mutex_);
  return trace_;
}

void Device::clear_trace() {
  std::lock_guard lock(trace_mutex_);
  trace_.clear();
}

void Device::write_trace(std::ostream& out) const {
  for (const TraceRecord& r : trace()) {
    out << to_string(r.kind) << ',' << r.queue << ',' << r.chunk << ',' << r.t_start_ns << ','
        << r.t_end_ns << '\n';
  }
}

std::size_t Device::hazard_count() const {
  std::lock_guard lock(hazard_mutex_);
  return hazards_.size();
}

std::vector<std::string> Device::hazard_log() const {
  std::lock_guard lock(hazard_mutex_);
  return hazards_;
}

std::vector<float> Device::buffer_coords(int buffer) const { return buffers_.at(buffer).coords; }
std::vector<float> Device::staging_coords(int staging) const { return staging_.at(staging).coords; }
PositionRange Device::buffer_range(int buffer) const { return buffers_.at(buffer).range; }

}  // namespace bkdt
