#include "bkdt/engine.hpp"

#include <bit>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "bkdt/brute.hpp"
#include "bkdt/kdtree.hpp"

namespace bkdt {

namespace {

using clock_type = std::chrono::steady_clock;

double since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

}  // namespace

Engine parse_engine(const std::string& name) {
  if (name == "bufferkdtree" || name == "buffer") return Engine::BufferKdTree;
  if (name == "kdtree") return Engine::KdTree;
  if (name == "brute") return Engine::Brute;
  throw std::invalid_argument("unknown engine '" + name +
                              "' (expected bufferkdtree, kdtree or brute)");
}

const char* to_string(Engine engine) {
  switch (engine) {
    case Engine::BufferKdTree: return "bufferkdtree";
    case Engine::KdTree: return "kdtree";
    case Engine::Brute: return "brute";
  }
  return "?";
}

int default_height(Index n) {
  if (n < 2) throw std::invalid_argument("a buffer k-d tree needs at least two reference points");
  int h = n >= 512 ? static_cast<int>(std::bit_width(static_cast<std::uint64_t>(n / 256))) - 1 : 1;
  return std::clamp(h, 1, 20);
}

BufferConfig resolve_buffer_config(int height, std::optional<Index> buffer_capacity,
                                   Index fetch_multiple) {
  const BufferConfig defaults = BufferConfig::defaults(height);
  return BufferConfig::with(buffer_capacity.value_or(defaults.buffer_capacity), fetch_multiple);
}

std::uint64_t result_digest(const NeighborTable<float>& table) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& list : table) {
    mix(static_cast<std::uint64_t>(list.size()));
    for (const auto& e : list.entries()) mix(static_cast<std::uint64_t>(e.index));
  }
  return h;
}

std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

EngineRun run_engine(Engine engine, const PointMatrix& refs, const PointMatrix& queries,
                     const SearchParams& params, const EngineOptions& options) {
  validate_points(refs, 1, "reference set");
  validate_points(queries, 0, "query set");
  validate_search(refs.rows(), refs.cols(), queries.cols(), params);
  EngineRun run;

  if (engine == Engine::Brute) {
    const auto t0 = clock_type::now();
    run.neighbors = brute_knn(refs, queries, params, options.threads);
    run.test_seconds = since(t0);
    return run;
  }

  if (engine == Engine::KdTree) {
    auto t0 = clock_type::now();
    const auto tree = build_kdtree(refs, options.leaf_size);
    run.train_seconds = since(t0);
    t0 = clock_type::now();
    run.neighbors = query_kdtree_parallel(tree, queries, params, options.threads);
    run.test_seconds = since(t0);
    return run;
  }

  const Index n = refs.rows();
  const Index d = refs.cols();
  const Index m = queries.rows();
  run.height = options.height > 0 ? options.height : default_height(n);
  run.buffers = resolve_buffer_config(run.height, options.buffer_capacity, options.fetch_multiple);
  if (options.devices < 1) throw std::invalid_argument("--devices must be >= 1");

  auto t0 = clock_type::now();
  const BufferKdTree tree = build_buffer_tree(refs, run.height);
  run.train_seconds = since(t0);

  const Index share = (m + options.devices - 1) / options.devices;
  const Index block = options.query_chunk_size > 0 ? options.query_chunk_size
                                                   : std::max<Index>(1, share);
  const std::size_t query_block = static_cast<std::size_t>(block) * query_bytes(d, params.k);
  std::size_t chunk_bytes = 0;
  if (options.num_chunks > 0) {
    chunk_bytes = static_cast<std::size_t>(ChunkPlan(n, options.num_chunks).max_chunk_size()) *
                  point_bytes(d);
  } else {
    if (options.device.memory_capacity < query_block + 2 * point_bytes(d)) {
      throw ConfigError("device memory of " + std::to_string(options.device.memory_capacity) +
                        " bytes cannot hold a " + std::to_string(query_block) +
                        "-byte query block plus two chunk buffers");
    }
    chunk_bytes = std::min((options.device.memory_capacity - query_block) / 2,
                           static_cast<std::size_t>(n) * point_bytes(d));
  }
  DeviceFleet fleet =
      DeviceFleet::uniform(static_cast<int>(options.devices), options.device, chunk_bytes, query_block);
  run.num_chunks = plan_for_device(tree, fleet[0], options.num_chunks).num_chunks();

  MultiDeviceConfig config;
  config.buffers = run.buffers;
  config.num_chunks = run.num_chunks;
  config.query_chunk_size = block;
  config.options.host_threads = options.threads;
  MultiDeviceReport report;

  t0 = clock_type::now();
  run.neighbors = run_multi_device(fleet, tree, queries, params, config, &report);
  run.test_seconds = since(t0);

  for (const SearchStats& s : report.per_device) {
    run.stats.iterations += s.iterations;
    run.stats.process_calls += s.process_calls;
    run.stats.leaf_scans += s.leaf_scans;
    run.stats.spilled += s.spilled;
    run.stats.find_leaf_seconds += s.find_leaf_seconds;
    run.stats.buffer_seconds += s.buffer_seconds;
    run.stats.process_seconds += s.process_seconds;
  }
  for (Index i = 0; i < fleet.size(); ++i) {
    run.hazards += fleet[i].hazard_count();
    for (const TraceRecord& r : fleet[i].trace()) {
      const double secs = static_cast<double>(r.t_end_ns - r.t_start_ns) * 1e-9;
      if (r.kind == CommandKind::Compute) run.compute_seconds += secs;
      if (r.kind == CommandKind::Copy || r.kind == CommandKind::Stage) run.copy_seconds += secs;
    }
    if (!options.trace_out.empty()) {
      const std::string path =
          fleet.size() == 1 ? options.trace_out : options.trace_out + "." + std::to_string(i);
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot write trace file " + path);
      fleet[i].write_trace(out);
      run.trace_files.push_back(path);
    }
  }
  return run;
}

}  // namespace bkdt
