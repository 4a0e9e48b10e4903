#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bkdt/dataset.hpp"
#include "bkdt/engine.hpp"

namespace bkdt {

struct BenchConfig {
  std::vector<Engine> engines;
  EngineOptions options;
  SearchParams params;

  // Synthetic data, used unless both paths are set.
  SyntheticKind kind = SyntheticKind::Uniform;
  Index n = 5000;
  Index m = 2000;
  Index d = 5;
  std::uint64_t seed = 1;
  std::string refs_path;
  std::string queries_path;

  /// N for the chunked run of the chunk-overhead comparison; 0 skips it.
  Index compare_chunks = 0;
  /// Fleet size for the device speed-up measurement; 0 or 1 skips it.
  Index compare_devices = 0;
};

struct EngineTiming {
  std::string engine;
  double train_seconds = 0;
  double test_seconds = 0;
  double find_leaf_seconds = 0;
  double buffer_seconds = 0;
  double copy_seconds = 0;
  double compute_seconds = 0;
  std::string digest;
};

struct BenchReport {
  Index n = 0, m = 0, d = 0, k = 0;
  int height = 0;
  Index buffer_capacity = 0, fetch_size = 0, num_chunks = 0, devices = 1;
  std::vector<EngineTiming> engines;

  // test(chunks) / test for the same search with N = 1 and N = compare_chunks.
  std::optional<double> test_single_chunk_seconds;
  std::optional<double> test_chunks_seconds;
  std::optional<double> chunk_ratio;
  Index compared_chunks = 0;

  std::optional<double> test_one_device_seconds;
  std::optional<double> test_many_devices_seconds;
  std::optional<double> device_speedup;
  Index compared_devices = 0;

  std::string digest;
  std::vector<std::string> trace_files;

  std::string to_json() const;
};

/// Runs every selected engine on the same data and cross-checks the result
/// digests. Throws std::invalid_argument for an empty engine list and
/// std::runtime_error when engines disagree.
BenchReport run_benchmark(const BenchConfig& config);

}  // namespace bkdt
