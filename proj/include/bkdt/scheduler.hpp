#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bkdt/buffer_tree.hpp"
#include "bkdt/chunk_plan.hpp"
#include "bkdt/device.hpp"

namespace bkdt {

/// Splits [0, m) into `parts` contiguous ranges whose sizes differ by at most
/// one; the larger ranges come first. Ranges may be empty when m < parts.
std::vector<PositionRange> split_evenly(Index m, Index parts);

/// Smallest number of contiguous ranges of at most `capacity` queries
/// covering [0, m), sizes differing by at most one.
std::vector<PositionRange> chunk_queries(Index m, Index capacity);

/// Devices that all see the same reference data.
class DeviceFleet {
 public:
  DeviceFleet() = default;
  void add(std::unique_ptr<Device> device) { devices_.push_back(std::move(device)); }

  /// `count` identical devices named <spec.name>0, <spec.name>1, ...
  static DeviceFleet uniform(int count, const DeviceSpec& spec, std::size_t chunk_bytes,
                             std::size_t query_block_bytes);

  Index size() const { return static_cast<Index>(devices_.size()); }
  Device& operator[](Index i) { return *devices_[static_cast<std::size_t>(i)]; }
  const Device& operator[](Index i) const { return *devices_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<std::unique_ptr<Device>> devices_;
};

struct MultiDeviceConfig {
  BufferConfig buffers;
  Index num_chunks = 0;        // 0: smallest N whose chunks fit the device
  Index query_chunk_size = 0;  // 0: as many queries as the device query block holds
  SearchOptions options;
  std::function<void(const std::string&)> log;  // defaults to std::clog
};

struct MultiDeviceReport {
  std::vector<SearchStats> per_device;
  std::vector<double> device_seconds;
  std::vector<Index> failed_devices;
  Index redispatched_ranges = 0;
  std::vector<std::string> log;
};

/// Chunk count for a tree on a device: the configured one if nonzero,
/// otherwise the smallest that fits.
ChunkPlan plan_for_device(const BufferKdTree& tree, const Device& device, Index num_chunks);

/// Splits the queries evenly across the fleet, sub-chunks each share to the
/// device's query capacity and runs one search driver thread per device. A
/// device that fails has its unfinished ranges re-run on the survivors.
NeighborTable<float> run_multi_device(DeviceFleet& fleet, const BufferKdTree& tree,
                                      const PointMatrix& queries, const SearchParams& params,
                                      const MultiDeviceConfig& config,
                                      MultiDeviceReport* report = nullptr);

}  // namespace bkdt
