#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bkdt/buffer_tree.hpp"
#include "bkdt/core.hpp"
#include "bkdt/device.hpp"
#include "bkdt/parallel.hpp"
#include "bkdt/scheduler.hpp"

namespace bkdt {

enum class Engine { BufferKdTree, KdTree, Brute };

Engine parse_engine(const std::string& name);
const char* to_string(Engine engine);

struct EngineOptions {
  int height = 0;  // buffer k-d tree height, 0 = default_height(n)
  Index leaf_size = 32;
  std::optional<Index> buffer_capacity;  // B, defaults to 2^(24-h)
  Index fetch_multiple = 10;             // M = fetch_multiple * B
  Index num_chunks = 0;                  // N, 0 = smallest that fits the device
  Index devices = 1;
  Index query_chunk_size = 0;  // 0 = one block per device share
  int threads = default_thread_count();
  DeviceSpec device;
  std::string trace_out;  // timeline trace file(s), empty = none
};

/// Height whose leaves hold roughly 256 points, clamped to [1, 20].
int default_height(Index n);

/// B from the flag or 2^(24-h); M = fetch_multiple * B.
BufferConfig resolve_buffer_config(int height, std::optional<Index> buffer_capacity,
                                   Index fetch_multiple);

struct EngineRun {
  NeighborTable<float> neighbors;
  double train_seconds = 0;
  double test_seconds = 0;
  int height = 0;
  BufferConfig buffers;
  Index num_chunks = 0;
  SearchStats stats;  // summed over devices
  double copy_seconds = 0;
  double compute_seconds = 0;
  std::size_t hazards = 0;  // summed over devices
  std::vector<std::string> trace_files;
};

EngineRun run_engine(Engine engine, const PointMatrix& refs, const PointMatrix& queries,
                     const SearchParams& params, const EngineOptions& options);

/// FNV-1a over every neighbor index, list by list. Depends only on which
/// neighbors were found, not on how.
std::uint64_t result_digest(const NeighborTable<float>& table);
std::string digest_hex(std::uint64_t digest);

}  // namespace bkdt
