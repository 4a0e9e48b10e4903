#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "bkdt/chunk_plan.hpp"
#include "bkdt/core.hpp"

namespace bkdt {

// Simulated constrained-memory compute device.
//
// The device owns two chunk buffers, two host staging buffers and two
// in-order command queues. Each queue is served by its own thread so that
// commands on different queues overlap in time; kernels fan out over
// `worker_lanes` host threads. Every command is timestamped so tests can audit
// the copy/compute overlap, and a hazard checker watches buffer usage both at
// submission time (ordering) and at execution time (actual overlap).

struct DeviceSpec {
  std::size_t memory_capacity = std::size_t{1} << 30;
  int worker_lanes = 1;
  double simulated_copy_rate = 0.0;  // bytes/s for staging->device copies, 0 = unthrottled
  std::optional<std::int64_t> fail_after_kernels;  // fault injection for fleet tests
  std::string name = "sim";
};

class PipelineHazard : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DeviceFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bytes a reference point occupies in a chunk buffer: coordinates plus its
/// original index.
constexpr std::size_t point_bytes(Index d) {
  return static_cast<std::size_t>(d) * sizeof(float) + sizeof(std::int64_t);
}

/// Bytes one query needs on the device: coordinates plus k (index, distance) results.
constexpr std::size_t query_bytes(Index d, Index k) {
  return static_cast<std::size_t>(d) * sizeof(float) +
         static_cast<std::size_t>(k) * (sizeof(std::int64_t) + sizeof(float));
}

enum class CommandKind { Stage, Copy, Compute, Marker };

const char* to_string(CommandKind kind);

struct TraceRecord {
  CommandKind kind;
  int queue;
  Index chunk;  // -1 when the command is not tied to a chunk
  std::int64_t t_start_ns;
  std::int64_t t_end_ns;
  Index round;  // pipeline round (run_chunk_pipeline call) the command was issued in
  Index paired_compute = -1;  // for stage/copy: chunk whose kernel was in flight at issue
};

namespace detail {
struct EventState;
struct QueueWorker;
}  // namespace detail

/// One-shot completion handle; can be waited on any number of times.
class Event {
 public:
  Event() = default;

  bool valid() const { return state_ != nullptr; }
  bool complete() const;
  int queue() const;
  std::uint64_t sequence() const;

 private:
  friend class Device;
  explicit Event(std::shared_ptr<detail::EventState> s) : state_(std::move(s)) {}
  std::shared_ptr<detail::EventState> state_;
};

/// Host-side provider of leaf-structure rows for staging.
class LeafSource {
 public:
  virtual ~LeafSource() = default;

  virtual Index size() const = 0;
  virtual Index dim() const = 0;
  /// Copies rows [range.begin, range.end) into coords (row-major) and ids.
  virtual void read(PositionRange range, float* coords, Index* ids) const = 0;

  /// Process-unique identity, used to recognise an already resident chunk.
  std::uint64_t id() const { return id_; }

 protected:
  LeafSource();

 private:
  std::uint64_t id_;
};

class MemoryLeafSource final : public LeafSource {
 public:
  MemoryLeafSource(const PointMatrix& points, std::span<const Index> ids);

  Index size() const override { return points_->rows(); }
  Index dim() const override { return points_->cols(); }
  void read(PositionRange range, float* coords, Index* ids) const override;

 private:
  const PointMatrix* points_;
  std::span<const Index> ids_;
};

/// Leaf structure read through a read-only memory mapping of a file, for
/// reference sets that should not stay resident in host memory.
///
/// File layout: "BKLF", u32 version, u64 n, u32 d, u32 reserved, n*d float32
/// coordinates (row-major), n int64 original indices; all little-endian.
class MappedLeafFile final : public LeafSource {
 public:
  static void write(const std::filesystem::path& path, const PointMatrix& points,
                    std::span<const Index> ids);

  explicit MappedLeafFile(const std::filesystem::path& path);
  ~MappedLeafFile() override;
  MappedLeafFile(const MappedLeafFile&) = delete;
  MappedLeafFile& operator=(const MappedLeafFile&) = delete;

  Index size() const override { return n_; }
  Index dim() const override { return d_; }
  void read(PositionRange range, float* coords, Index* ids) const override;

 private:
  void* base_ = nullptr;
  std::size_t length_ = 0;
  Index n_ = 0;
  Index d_ = 0;
  const unsigned char* coords_ = nullptr;
  const unsigned char* ids_ = nullptr;
};

/// Query slot plus the leaf-structure positions it must be compared against.
struct KernelAssignment {
  Index slot;
  PositionRange range;
};

class Device {
 public:
  static constexpr int kNumQueues = 2;
  static constexpr int kNumBuffers = 2;

  /// Reserves two chunk buffers of chunk_bytes and one query block. Throws
  /// ConfigError if they exceed spec.memory_capacity.
  Device(DeviceSpec spec, std::size_t chunk_bytes, std::size_t query_block_bytes);
  ~Device();
  Device(const Device&) = delete;
  Device& operator=(const Device&) = delete;

  const DeviceSpec& spec() const { return spec_; }
  std::size_t chunk_bytes() const { return chunk_bytes_; }
  std::size_t query_block_bytes() const { return query_block_bytes_; }
  Index chunk_capacity(Index d) const { return static_cast<Index>(chunk_bytes_ / point_bytes(d)); }
  Index query_capacity(Index d, Index k) const {
    return static_cast<Index>(query_block_bytes_ / query_bytes(d, k));
  }

  /// Synchronously replaces the query block. Drains both queues first.
  void upload_queries(const Eigen::Ref<const PointMatrix>& queries, Index k);

  /// Host leaf structure -> staging buffer.
  Event enqueue_stage(int queue, const LeafSource& source, PositionRange range, int staging,
                      Index chunk = -1, std::span<const Event> deps = {});
  /// Staging buffer -> device chunk buffer (same index).
  Event enqueue_copy(int queue, int buffer, Index chunk = -1, std::span<const Event> deps = {});
  /// Brute-force scan of each assignment's range against its query; results[slot]
  /// receives the candidates. Ranges must lie inside the buffer's chunk.
  Event enqueue_brute_kernel(int queue, int buffer, std::vector<KernelAssignment> assignments,
                             std::span<NeighborList<float>> results, Index chunk = -1,
                             std::span<const Event> deps = {});
  Event enqueue_marker(int queue);

  void wait(const Event& event);
  void wait(int queue);
  void wait_all();

  /// Streams every chunk of `plan` through the two buffers, overlapping the
  /// copy of chunk j+1 with the kernel of chunk j. per_chunk[j] lists the
  /// assignments for chunk j. Leaves chunk 0 resident and chunk 1 staged for
  /// the next call.
  void run_chunk_pipeline(const LeafSource& source, const ChunkPlan& plan,
                          std::span<const std::vector<KernelAssignment>> per_chunk,
                          std::span<NeighborList<float>> results);

  std::vector<TraceRecord> trace() const;
  void clear_trace();
  /// One line per command: kind,queue,chunk,t_start_ns,t_end_ns
  void write_trace(std::ostream& out) const;

  std::size_t hazard_count() const;
  std::vector<std::string> hazard_log() const;
  std::int64_t distance_evaluations() const { return distance_evals_.load(); }
  std::int64_t kernels_run() const { return kernels_run_.load(); }
  Index rounds() const { return round_; }

  /// Snapshot of a chunk buffer, for tests. Call only with the device idle.
  std::vector<float> buffer_coords(int buffer) const;
  std::vector<float> staging_coords(int staging) const;
  PositionRange buffer_range(int buffer) const;

 private:
  enum Resource : int { kStaging0 = 0, kStaging1 = 1, kBuffer0 = 2, kBuffer1 = 3, kNumResources = 4 };

  struct Access {
    int resource;
    bool write;
  };

  struct OutstandingUse {
    int queue;
    std::uint64_t seq;
    bool write;
  };

  struct ChunkStore {
    std::vector<float> coords;
    std::vector<Index> ids;
    PositionRange range;
    Index dim = 0;
  };

  struct Resident {
    bool valid = false;
    std::uint64_t source = 0;
    PositionRange range;
    int buffer = 0;
    int queue = 0;
    Event copy;  // the restage copy, which still reads its staging buffer
    PositionRange next;  // chunk staged for step 1 of the next call
    Event next_stage;
  };

  Event submit(int queue, CommandKind kind, Index chunk, std::vector<Access> accesses,
               std::span<const Event> deps, std::function<void(std::int64_t)> body,
               bool dma = false);
  void check_queue_index(int queue) const;
  void check_submission_hazards(int queue, const std::vector<Access>& accesses,
                                std::span<const Event> deps);
  void begin_runtime_access(const std::vector<Access>& accesses, CommandKind kind, Index chunk);
  void end_runtime_access(const std::vector<Access>& accesses);
  void record_hazard(std::string message);
  void mark_observed(int queue, std::uint64_t seq);
  void run_kernel(int buffer, const std::vector<KernelAssignment>& assignments,
                  std::span<NeighborList<float>> results);
  std::int64_t now_ns() const;
  void worker_loop(detail::QueueWorker& worker);

  DeviceSpec spec_;
  std::size_t chunk_bytes_;
  std::size_t query_block_bytes_;
  std::chrono::steady_clock::time_point epoch_;

  std::array<ChunkStore, kNumBuffers> staging_;
  std::array<ChunkStore, kNumBuffers> buffers_;
  PointMatrix query_block_;

  // Submission-side view of what each staging/device buffer will hold once
  // the already enqueued commands have run.
  std::array<PositionRange, kNumBuffers> staged_shadow_{};
  std::array<PositionRange, kNumBuffers> buffer_shadow_{};

  mutable std::mutex hazard_mutex_;
  std::array<std::vector<OutstandingUse>, kNumResources> outstanding_;
  std::array<std::uint64_t, kNumQueues> observed_seq_{};
  std::array<int, kNumResources> active_readers_{};
  std::array<int, kNumResources> active_writers_{};
  std::vector<std::string> hazards_;

  mutable std::mutex trace_mutex_;
  std::vector<TraceRecord> trace_;

  std::atomic<std::int64_t> distance_evals_{0};
  std::atomic<std::int64_t> kernels_run_{0};
  std::atomic<std::int64_t> kernels_started_{0};
  Index round_ = 0;
  Index pairing_ = -1;
  Resident resident_;

  std::array<std::unique_ptr<detail::QueueWorker>, kNumQueues> workers_;
};

}  // namespace bkdt
