#include "bkdt/bench.hpp"

#include <json.hpp>

namespace bkdt {

namespace {

EngineTiming timing_of(Engine engine, const EngineRun& run) {
  EngineTiming t;
  t.engine = to_string(engine);
  t.train_seconds = run.train_seconds;
  t.test_seconds = run.test_seconds;
  t.find_leaf_seconds = run.stats.find_leaf_seconds;
  t.buffer_seconds = run.stats.buffer_seconds;
  t.copy_seconds = run.copy_seconds;
  t.compute_seconds = run.compute_seconds;
  t.digest = digest_hex(result_digest(run.neighbors));
  return t;
}

void require_digest(const std::string& expected, const std::string& got, const std::string& what) {
  if (expected != got) {
    throw std::runtime_error("result digest mismatch: " + what + " produced " + got +
                             ", expected " + expected);
  }
}

}  // namespace

BenchReport run_benchmark(const BenchConfig& config) {
  if (config.engines.empty()) throw std::invalid_argument("bench: no engine selected");

  PointMatrix refs;
  PointMatrix queries;
  if (!config.refs_path.empty() && !config.queries_path.empty()) {
    refs = load_dataset(config.refs_path, format_from_path(config.refs_path));
    queries = load_dataset(config.queries_path, format_from_path(config.queries_path));
  } else {
    refs = gen_synthetic(config.kind, config.n, config.d, config.seed).points;
    queries = gen_synthetic(config.kind, config.m, config.d, config.seed + 1).points;
  }

  BenchReport report;
  report.n = refs.rows();
  report.m = queries.rows();
  report.d = refs.cols();
  report.k = config.params.k;
  report.devices = config.options.devices;

  for (Engine engine : config.engines) {
    const EngineRun run = run_engine(engine, refs, queries, config.params, config.options);
    EngineTiming t = timing_of(engine, run);
    if (report.digest.empty()) report.digest = t.digest;
    require_digest(report.digest, t.digest, t.engine);
    if (engine == Engine::BufferKdTree) {
      report.height = run.height;
      report.buffer_capacity = run.buffers.buffer_capacity;
      report.fetch_size = run.buffers.fetch_size;
      report.num_chunks = run.num_chunks;
      report.trace_files = run.trace_files;
    }
    report.engines.push_back(std::move(t));
  }

  if (config.compare_chunks > 0) {
    EngineOptions single = config.options;
    single.num_chunks = 1;
    single.trace_out.clear();
    EngineOptions chunked = single;
    chunked.num_chunks = config.compare_chunks;
    const EngineRun a = run_engine(Engine::BufferKdTree, refs, queries, config.params, single);
    const EngineRun b = run_engine(Engine::BufferKdTree, refs, queries, config.params, chunked);
    require_digest(report.digest, digest_hex(result_digest(a.neighbors)), "bufferkdtree N=1");
    require_digest(report.digest, digest_hex(result_digest(b.neighbors)),
                   "bufferkdtree N=" + std::to_string(config.compare_chunks));
    report.compared_chunks = config.compare_chunks;
    report.test_single_chunk_seconds = a.test_seconds;
    report.test_chunks_seconds = b.test_seconds;
    report.chunk_ratio = b.test_seconds / a.test_seconds;
  }

  if (config.compare_devices > 1) {
    EngineOptions one = config.options;
    one.devices = 1;
    one.trace_out.clear();
    EngineOptions many = one;
    many.devices = config.compare_devices;
    const EngineRun a = run_engine(Engine::BufferKdTree, refs, queries, config.params, one);
    const EngineRun b = run_engine(Engine::BufferKdTree, refs, queries, config.params, many);
    require_digest(report.digest, digest_hex(result_digest(a.neighbors)), "bufferkdtree 1 device");
    require_digest(report.digest, digest_hex(result_digest(b.neighbors)),
                   "bufferkdtree " + std::to_string(config.compare_devices) + " devices");
    report.compared_devices = config.compare_devices;
    report.test_one_device_seconds = a.test_seconds;
    report.test_many_devices_seconds = b.test_seconds;
    report.device_speedup = a.test_seconds / b.test_seconds;
  }
  return report;
}

std::string BenchReport::to_json() const {
  nlohmann::ordered_json j;
  j["parameters"] = {{"n", n},           {"m", m},
                     {"d", d},           {"k", k},
                     {"h", height},      {"B", buffer_capacity},
                     {"M", fetch_size},  {"N", num_chunks},
                     {"devices", devices}};
  j["engines"] = nlohmann::ordered_json::array();
  for (const EngineTiming& t : engines) {
    j["engines"].push_back({{"engine", t.engine},
                            {"train_s", t.train_seconds},
                            {"test_s", t.test_seconds},
                            {"test_find_leaf_s", t.find_leaf_seconds},
                            {"test_buffer_management_s", t.buffer_seconds},
                            {"test_chunk_copy_s", t.copy_seconds},
                            {"test_chunk_compute_s", t.compute_seconds},
                            {"digest", t.digest}});
  }
  if (chunk_ratio) {
    j["chunk_comparison"] = {{"N", compared_chunks},
                             {"test_s", *test_single_chunk_seconds},
                             {"test_chunks_s", *test_chunks_seconds},
                             {"ratio", *chunk_ratio}};
  }
  if (device_speedup) {
    j["device_scaling"] = {{"devices", compared_devices},
                           {"test_1_device_s", *test_one_device_seconds},
                           {"test_n_devices_s", *test_many_devices_seconds},
                           {"speedup", *device_speedup}};
  }
  j["digest"] = digest;
  j["digests_agree"] = true;
  j["trace_files"] = trace_files;
  return j.dump(2);
}

}  // namespace bkdt
