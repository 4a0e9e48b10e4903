// bkdt: generate datasets, build trees, run k-NN queries, rank outliers and
// benchmark the search engines against each other.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

#include "bkdt/bench.hpp"
#include "bkdt/buffer_tree.hpp"
#include "bkdt/dataset.hpp"
#include "bkdt/engine.hpp"
#include "bkdt/outliers.hpp"

using namespace bkdt;
using json = nlohmann::ordered_json;

namespace {

struct EngineFlags {
  std::string engine = "bufferkdtree";
  Index k = 10;
  int height = 0;
  Index leaf_size = 32;
  Index buffer_capacity = 0;
  Index fetch_multiple = 10;
  Index num_chunks = 0;
  Index devices = 1;
  Index query_chunk_size = 0;
  int threads = default_thread_count();
  double device_memory_mb = 1024;
  int lanes = 1;
  double copy_rate_mbs = 0;
  std::string trace_out;

  void add_to(CLI::App& app, bool with_engine = true) {
    if (with_engine) {
      app.add_option("--engine", engine, "bufferkdtree | kdtree | brute")->capture_default_str();
    }
    app.add_option("--k", k, "number of nearest neighbors")->capture_default_str();
    app.add_option("--height", height, "buffer k-d tree height h (0 = automatic)");
    app.add_option("--leaf-size", leaf_size, "leaf size of the classic k-d tree")->capture_default_str();
    app.add_option("--buffer-capacity", buffer_capacity, "buffer capacity B (0 = 2^(24-h))");
    app.add_option("--fetch-multiple", fetch_multiple, "M = fetch-multiple * B")->capture_default_str();
    app.add_option("--num-chunks", num_chunks, "leaf-structure chunks N (0 = fit device memory)");
    app.add_option("--devices", devices, "simulated devices")->capture_default_str();
    app.add_option("--query-chunk-size", query_chunk_size, "queries per device block (0 = all)");
    app.add_option("--threads", threads, "host threads")->capture_default_str();
    app.add_option("--device-memory-mb", device_memory_mb, "memory per device")->capture_default_str();
    app.add_option("--lanes", lanes, "kernel lanes per device")->capture_default_str();
    app.add_option("--copy-rate-mbs", copy_rate_mbs, "simulated copy bandwidth (0 = unthrottled)");
    app.add_option("--trace-out", trace_out, "write device timeline traces here");
  }

  EngineOptions options() const {
    EngineOptions o;
    o.height = height;
    o.leaf_size = leaf_size;
    if (buffer_capacity > 0) o.buffer_capacity = buffer_capacity;
    o.fetch_multiple = fetch_multiple;
    o.num_chunks = num_chunks;
    o.devices = devices;
    o.query_chunk_size = query_chunk_size;
    o.threads = threads;
    o.device.memory_capacity = static_cast<std::size_t>(device_memory_mb * 1024.0 * 1024.0);
    o.device.worker_lanes = lanes;
    o.device.simulated_copy_rate = copy_rate_mbs * 1024.0 * 1024.0;
    o.trace_out = trace_out;
    return o;
  }
};

PointMatrix load(const std::string& path, const std::string& format) {
  return load_dataset(path, format.empty() ? format_from_path(path) : parse_format(format));
}

void emit_report(const json& report, const std::string& path) {
  if (path.empty()) {
    std::cout << report.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report " + path);
  out << report.dump(2) << '\n';
}

json run_summary(Engine engine, const EngineRun& run, Index n, Index m, Index d, Index k,
                 Index devices) {
  json j;
  j["engine"] = to_string(engine);
  j["parameters"] = {{"n", n}, {"m", m}, {"d", d}, {"k", k}};
  if (engine == Engine::BufferKdTree) {
    j["parameters"]["h"] = run.height;
    j["parameters"]["B"] = run.buffers.buffer_capacity;
    j["parameters"]["M"] = run.buffers.fetch_size;
    j["parameters"]["N"] = run.num_chunks;
    j["parameters"]["devices"] = devices;
  }
  j["train_s"] = run.train_seconds;
  j["test_s"] = run.test_seconds;
  if (engine == Engine::BufferKdTree) {
    j["test_find_leaf_s"] = run.stats.find_leaf_seconds;
    j["test_buffer_management_s"] = run.stats.buffer_seconds;
    j["test_chunk_copy_s"] = run.copy_seconds;
    j["test_chunk_compute_s"] = run.compute_seconds;
    j["process_all_buffers_calls"] = run.stats.process_calls;
    j["leaf_scans"] = run.stats.leaf_scans;
    j["trace_files"] = run.trace_files;
  }
  j["digest"] = digest_hex(result_digest(run.neighbors));
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batched exact k-nearest-neighbor search with buffer k-d trees"};
  app.require_subcommand(1);

  // gen ----------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  std::string gen_kind = "uniform", gen_out, gen_format;
  Index gen_n = 10000, gen_d = 5, gen_components = 4, gen_outliers = 0;
  std::uint64_t gen_seed = 1;
  gen->add_option("--kind", gen_kind, "uniform | gaussian-mixture")->capture_default_str();
  gen->add_option("--n", gen_n, "number of points")->capture_default_str();
  gen->add_option("--d", gen_d, "dimensionality")->capture_default_str();
  gen->add_option("--components", gen_components, "mixture components")->capture_default_str();
  gen->add_option("--outliers", gen_outliers, "planted far outliers (mixture only)");
  gen->add_option("--seed", gen_seed, "random seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output file")->required();
  gen->add_option("--format", gen_format, "bin | csv (default: from extension)");

  // build --------------------------------------------------------------------
  auto* build = app.add_subcommand("build", "build a buffer k-d tree and report its shape");
  std::string build_refs, build_format, build_leaf_out, build_report;
  EngineFlags build_flags;
  build->add_option("--refs", build_refs, "reference dataset")->required();
  build->add_option("--format", build_format, "bin | csv (default: from extension)");
  build->add_option("--leaf-out", build_leaf_out, "write the leaf structure for file-backed staging");
  build->add_option("--report-out", build_report, "write the JSON summary here");
  build_flags.add_to(*build, false);

  // query --------------------------------------------------------------------
  auto* query = app.add_subcommand("query", "k nearest neighbors of every query point");
  std::string q_refs, q_queries, q_format, q_out, q_report;
  bool q_sqrt = false;
  EngineFlags q_flags;
  query->add_option("--refs", q_refs, "reference dataset")->required();
  query->add_option("--queries", q_queries, "query dataset")->required();
  query->add_option("--format", q_format, "bin | csv (default: from extension)");
  query->add_option("--out", q_out, "neighbors as CSV: query,rank,index,distance");
  query->add_flag("--sqrt", q_sqrt, "write Euclidean instead of squared distances");
  query->add_option("--report-out", q_report, "write the JSON run report here");
  q_flags.add_to(*query);

  // outliers -----------------------------------------------------------------
  auto* outl = app.add_subcommand("outliers", "rank points by mean distance to their k neighbors");
  std::string o_refs, o_format, o_out, o_report;
  Index o_top = 10;
  EngineFlags o_flags;
  outl->add_option("--refs", o_refs, "dataset")->required();
  outl->add_option("--format", o_format, "bin | csv (default: from extension)");
  outl->add_option("--top", o_top, "ranks to print")->capture_default_str();
  outl->add_option("--out", o_out, "full ranking as CSV: rank,index,score");
  outl->add_option("--report-out", o_report, "write the JSON report here");
  o_flags.add_to(*outl);

  // bench --------------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "compare engines on the same data");
  std::vector<std::string> b_engines;
  std::string b_kind = "uniform", b_refs, b_queries, b_report;
  Index b_n = 5000, b_m = 2000, b_d = 5, b_compare_chunks = 0, b_compare_devices = 0;
  std::uint64_t b_seed = 1;
  EngineFlags b_flags;
  bench->add_option("--engine", b_engines, "engines to run (repeatable)")->delimiter(',');
  bench->add_option("--kind", b_kind, "synthetic kind")->capture_default_str();
  bench->add_option("--n", b_n, "reference points")->capture_default_str();
  bench->add_option("--m", b_m, "query points")->capture_default_str();
  bench->add_option("--d", b_d, "dimensionality")->capture_default_str();
  bench->add_option("--seed", b_seed, "random seed")->capture_default_str();
  bench->add_option("--refs", b_refs, "reference dataset instead of synthetic data");
  bench->add_option("--queries", b_queries, "query dataset instead of synthetic data");
  bench->add_option("--compare-chunks", b_compare_chunks, "also time N=1 against this N");
  bench->add_option("--compare-devices", b_compare_devices, "also time 1 device against this many");
  bench->add_option("--report-out", b_report, "write the JSON report here");
  b_flags.add_to(*bench, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version exit 0; anything else is a usage error.
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      SyntheticData data =
          gen_outliers > 0
              ? gen_planted_outliers(gen_n, gen_d, gen_outliers, gen_seed)
              : gen_synthetic(parse_synthetic_kind(gen_kind), gen_n, gen_d, gen_seed, gen_components);
      const DataFormat fmt = gen_format.empty() ? format_from_path(gen_out) : parse_format(gen_format);
      save_dataset(gen_out, data.points, fmt);
      std::cout << "wrote " << data.points.rows() << " x " << data.points.cols() << " points to "
                << gen_out << '\n';
      return 0;
    }

    if (*build) {
      const PointMatrix refs = load(build_refs, build_format);
      const EngineOptions opts = build_flags.options();
      const int h = opts.height > 0 ? opts.height : default_height(refs.rows());
      const BufferConfig cfg = resolve_buffer_config(h, opts.buffer_capacity, opts.fetch_multiple);
      const auto t0 = std::chrono::steady_clock::now();
      const BufferKdTree tree = build_buffer_tree(refs, h);
      const double train =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      Index smallest = tree.size(), largest = 0;
      for (Index leaf = 0; leaf < tree.num_leaves(); ++leaf) {
        smallest = std::min(smallest, tree.leaf_bounds(leaf).size());
        largest = std::max(largest, tree.leaf_bounds(leaf).size());
      }
      json j;
      j["parameters"] = {{"n", refs.rows()}, {"d", refs.cols()}, {"h", h},
                         {"B", cfg.buffer_capacity}, {"M", cfg.fetch_size}};
      j["leaves"] = tree.num_leaves();
      j["leaf_size_min"] = smallest;
      j["leaf_size_max"] = largest;
      j["train_s"] = train;
      if (!build_leaf_out.empty()) {
        MappedLeafFile::write(build_leaf_out, tree.leaves().rearranged, tree.leaves().original_index);
        j["leaf_file"] = build_leaf_out;
      }
      emit_report(j, build_report);
      return 0;
    }

    if (*query) {
      const PointMatrix refs = load(q_refs, q_format);
      const PointMatrix queries = load(q_queries, q_format);
      const Engine engine = parse_engine(q_flags.engine);
      const EngineRun run =
          run_engine(engine, refs, queries, SearchParams{q_flags.k}, q_flags.options());
      if (!q_out.empty()) {
        std::ofstream out(q_out);
        if (!out) throw std::runtime_error("cannot write " + q_out);
        out << "query,rank,index,distance\n";
        for (std::size_t i = 0; i < run.neighbors.size(); ++i) {
          const auto entries = run.neighbors[i].entries();
          for (std::size_t r = 0; r < entries.size(); ++r) {
            const double dist = q_sqrt ? std::sqrt(static_cast<double>(entries[r].sq_dist))
                                       : static_cast<double>(entries[r].sq_dist);
            out << i << ',' << r << ',' << entries[r].index << ',' << dist << '\n';
          }
        }
      }
      emit_report(run_summary(engine, run, refs.rows(), queries.rows(), refs.cols(), q_flags.k,
                              q_flags.devices),
                  q_report);
      return 0;
    }

    if (*outl) {
      const PointMatrix refs = load(o_refs, o_format);
      const Engine engine = parse_engine(o_flags.engine);
      const NeighborTable<float> nn = all_nearest_neighbors(engine, refs, o_flags.k, o_flags.options());
      const OutlierRanking ranking = outlier_scores(nn);
      if (!o_out.empty()) {
        std::ofstream out(o_out);
        if (!out) throw std::runtime_error("cannot write " + o_out);
        out << "rank,index,score\n";
        for (std::size_t r = 0; r < ranking.ranking.size(); ++r) {
          const Index i = ranking.ranking[r];
          out << r << ',' << i << ',' << ranking.scores[static_cast<std::size_t>(i)] << '\n';
        }
      }
      json j;
      j["engine"] = to_string(engine);
      j["k"] = o_flags.k;
      j["n"] = refs.rows();
      j["top"] = json::array();
      for (Index r = 0; r < std::min<Index>(o_top, static_cast<Index>(ranking.ranking.size())); ++r) {
        const Index i = ranking.ranking[static_cast<std::size_t>(r)];
        j["top"].push_back({{"rank", r}, {"index", i}, {"score", ranking.scores[static_cast<std::size_t>(i)]}});
      }
      emit_report(j, o_report);
      return 0;
    }

    if (*bench) {
      if (b_engines.empty()) {
        std::cerr << "bench: at least one --engine is required\n";
        return 2;
      }
      BenchConfig cfg;
      for (const auto& e : b_engines) cfg.engines.push_back(parse_engine(e));
      cfg.options = b_flags.options();
      cfg.params.k = b_flags.k;
      cfg.kind = parse_synthetic_kind(b_kind);
      cfg.n = b_n;
      cfg.m = b_m;
      cfg.d = b_d;
      cfg.seed = b_seed;
      cfg.refs_path = b_refs;
      cfg.queries_path = b_queries;
      cfg.compare_chunks = b_compare_chunks;
      cfg.compare_devices = b_compare_devices;
      const BenchReport report = run_benchmark(cfg);
      if (b_report.empty()) {
        std::cout << report.to_json() << '\n';
      } else {
        std::ofstream out(b_report);
        if (!out) throw std::runtime_error("cannot write report " + b_report);
        out << report.to_json() << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
