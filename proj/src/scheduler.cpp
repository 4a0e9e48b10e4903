#include "bkdt/scheduler.hpp"

#include <chrono>
#include <exception>
#include <iostream>
#include <mutex>
#include <thread>

namespace bkdt {

std::vector<PositionRange> split_evenly(Index m, Index parts) {
  if (m < 0) throw std::invalid_argument("split_evenly: m must be >= 0");
  if (parts < 1) throw std::invalid_argument("split_evenly: need at least one part");
  std::vector<PositionRange> out;
  out.reserve(static_cast<std::size_t>(parts));
  const Index base = m / parts;
  const Index extra = m % parts;
  Index begin = 0;
  for (Index i = 0; i < parts; ++i) {
    const Index size = base + (i < extra ? 1 : 0);
    out.push_back({begin, begin + size});
    begin += size;
  }
  return out;
}

std::vector<PositionRange> chunk_queries(Index m, Index capacity) {
  if (capacity < 1) throw std::invalid_argument("chunk_queries: capacity must be >= 1");
  if (m <= 0) return {};
  return split_evenly(m, (m + capacity - 1) / capacity);
}

DeviceFleet DeviceFleet::uniform(int count, const DeviceSpec& spec, std::size_t chunk_bytes,
                                 std::size_t query_block_bytes) {
  if (count < 1) throw std::invalid_argument("DeviceFleet: need at least one device");
  DeviceFleet fleet;
  for (int i = 0; i < count; ++i) {
    DeviceSpec s = spec;
    s.name = spec.name + std::to_string(i);
    fleet.add(std::make_unique<Device>(s, chunk_bytes, query_block_bytes));
  }
  return fleet;
}

ChunkPlan plan_for_device(const BufferKdTree& tree, const Device& device, Index num_chunks) {
  const std::size_t pb = point_bytes(tree.dim());
  if (num_chunks > 0) return plan_chunks(tree.size(), num_chunks, device.chunk_bytes(), pb);
  return ChunkPlan(tree.size(), min_feasible_chunks(tree.size(), device.chunk_bytes(), pb));
}

namespace {

void accumulate(SearchStats& into, const SearchStats& s) {
  into.iterations += s.iterations;
  into.process_calls += s.process_calls;
  into.leaf_scans += s.leaf_scans;
  into.spilled += s.spilled;
  into.find_leaf_seconds += s.find_leaf_seconds;
  into.buffer_seconds += s.buffer_seconds;
  into.process_seconds += s.process_seconds;
}

}  // namespace

NeighborTable<float> run_multi_device(DeviceFleet& fleet, const BufferKdTree& tree,
                                      const PointMatrix& queries, const SearchParams& params,
                                      const MultiDeviceConfig& config, MultiDeviceReport* report) {
  if (fleet.size() < 1) throw std::invalid_argument("run_multi_device: empty device fleet");
  validate_search(tree.size(), tree.dim(), queries.cols(), params);
  validate_points(queries, 0, "query set");

  const Index num_devices = fleet.size();
  const Index m = queries.rows();
  NeighborTable<float> out(static_cast<std::size_t>(m));

  MultiDeviceReport local;
  MultiDeviceReport& rep = report ? *report : local;
  rep = {};
  rep.per_device.resize(static_cast<std::size_t>(num_devices));
  rep.device_seconds.resize(static_cast<std::size_t>(num_devices), 0.0);

  std::mutex mutex;
  auto log = [&](const std::string& line) {
    rep.log.push_back(line);
    if (config.log) {
      config.log(line);
    } else {
      std::clog << line << '\n';
    }
  };

  std::vector<char> alive(static_cast<std::size_t>(num_devices), 1);
  std::vector<std::vector<PositionRange>> work(static_cast<std::size_t>(num_devices));
  const auto shares = split_evenly(m, num_devices);
  for (Index i = 0; i < num_devices; ++i) {
    if (!shares[i].empty()) work[i].push_back(shares[i]);
  }

  for (;;) {
    std::vector<PositionRange> orphans;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(num_devices));

    auto drive = [&](Index i) {
      Device& device = fleet[i];
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<PositionRange> pending;
      try {
        const ChunkPlan plan = plan_for_device(tree, device, config.num_chunks);
        Index capacity = device.query_capacity(tree.dim(), params.k);
        if (config.query_chunk_size > 0) capacity = std::min(capacity, config.query_chunk_size);
        if (capacity < 1) {
          throw ConfigError("device '" + device.spec().name +
                            "' query block cannot hold a single query");
        }
        for (const PositionRange& share : work[i]) {
          for (const PositionRange& r : chunk_queries(share.size(), capacity)) {
            pending.push_back({share.begin + r.begin, share.begin + r.end});
          }
        }
        std::size_t next = 0;
        try {
          for (; next < pending.size(); ++next) {
            const PositionRange r = pending[next];
            const PointMatrix block = queries.middleRows(r.begin, r.size());
            SearchStats stats;
            NeighborTable<float> part =
                lazy_search(tree, block, params, config.buffers, device, plan, config.options, &stats);
            std::move(part.begin(), part.end(), out.begin() + r.begin);
            accumulate(rep.per_device[i], stats);
          }
        } catch (const DeviceFailure& e) {
          std::lock_guard lock(mutex);
          alive[i] = 0;
          rep.failed_devices.push_back(i);
          orphans.insert(orphans.end(), pending.begin() + static_cast<std::ptrdiff_t>(next),
                         pending.end());
          log("device " + std::to_string(i) + " failed (" + e.what() + "); re-dispatching " +
              std::to_string(pending.size() - next) + " query ranges");
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
      rep.device_seconds[i] +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    {
      std::vector<std::jthread> drivers;
      for (Index i = 0; i < num_devices; ++i) {
        if (alive[i] && !work[i].empty()) drivers.emplace_back(drive, i);
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (auto& w : work) w.clear();
    if (orphans.empty()) break;

    std::vector<Index> survivors;
    for (Index i = 0; i < num_devices; ++i) {
      if (alive[i]) survivors.push_back(i);
    }
    if (survivors.empty()) {
      throw DeviceFailure("all devices failed with " + std::to_string(orphans.size()) +
                          " query ranges unfinished");
    }
    for (std::size_t t = 0; t < orphans.size(); ++t) {
      work[survivors[t % survivors.size()]].push_back(orphans[t]);
    }
    rep.redispatched_ranges += static_cast<Index>(orphans.size());
  }
  return out;
}

}  // namespace bkdt
