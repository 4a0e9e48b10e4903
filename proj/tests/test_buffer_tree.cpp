#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "bkdt/brute.hpp"
#include "bkdt/buffer_tree.hpp"
#include "bkdt/kdtree.hpp"
#include "oracle.hpp"

using namespace bkdt;

namespace {

std::unique_ptr<Device> device_for(const BufferKdTree& tree, Index m, Index k, Index chunks) {
  const std::size_t chunk =
      static_cast<std::size_t>(ChunkPlan(tree.size(), chunks).max_chunk_size()) * point_bytes(tree.dim());
  return std::make_unique<Device>(DeviceSpec{}, chunk,
                                  static_cast<std::size_t>(std::max<Index>(m, 1)) * query_bytes(tree.dim(), k));
}

NeighborTable<float> search(const BufferKdTree& tree, const PointMatrix& q, Index k, BufferConfig cfg,
                            Index chunks = 1, SearchStats* stats = nullptr, SearchOptions opts = {}) {
  auto dev = device_for(tree, q.rows(), k, chunks);
  auto out = lazy_search(tree, q, SearchParams{k}, cfg, *dev, ChunkPlan(tree.size(), chunks), opts, stats);
  CHECK(dev->hazard_count() == 0);
  return out;
}

// Every rearranged point satisfies the split predicate of each ancestor.
void audit_predicates(const BufferKdTree& t) {
  const TopTree& top = t.top();
  for (Index leaf = 0; leaf < t.num_leaves(); ++leaf) {
    Index node = leaf + top.num_internal();
    while (node > 0) {
      const Index parent = (node - 1) / 2;
      const bool is_left = node == 2 * parent + 1;
      const Index sd = top.split_dim(parent);
      const float sv = top.split_values[static_cast<std::size_t>(parent)];
      const PositionRange r = t.leaf_bounds(leaf);
      for (Index p = r.begin; p < r.end; ++p) {
        const float c = t.leaves().rearranged(p, sd);
        if (is_left) {
          REQUIRE(c <= sv);
        } else {
          REQUIRE(c >= sv);
        }
      }
      node = parent;
    }
  }
}

}  // namespace

TEST_CASE("eight 1-D points, h=2") {
  PointMatrix p(8, 1);
  p << 7, 3, 5, 1, 8, 2, 6, 4;
  const auto t = build_buffer_tree(p, 2);
  REQUIRE(t.num_leaves() == 4);
  const std::vector<std::set<float>> expect{{1, 2}, {3, 4}, {5, 6}, {7, 8}};
  for (Index leaf = 0; leaf < 4; ++leaf) {
    CHECK(t.leaf_bounds(leaf) == PositionRange{2 * leaf, 2 * leaf + 2});
    std::set<float> got;
    for (Index i = t.leaf_bounds(leaf).begin; i < t.leaf_bounds(leaf).end; ++i)
      got.insert(t.leaves().rearranged(i, 0));
    CHECK(got == expect[static_cast<std::size_t>(leaf)]);
  }
  for (Index i = 0; i < 8; ++i) CHECK(p(t.leaves().original_index[i], 0) == t.leaves().rearranged(i, 0));
}

TEST_CASE("h=1 splits on the dim-0 median") {
  const PointMatrix p = oracle::uniform(11, 3, 4);
  const auto t = build_buffer_tree(p, 1);
  CHECK(t.num_leaves() == 2);
  CHECK(t.leaf_bounds(0) == PositionRange{0, 5});
  CHECK(t.leaf_bounds(1) == PositionRange{5, 11});
  std::vector<float> xs(p.col(0).begin(), p.col(0).end());
  std::sort(xs.begin(), xs.end());
  CHECK(t.top().split_values[0] == xs[5]);
  audit_predicates(t);
}

TEST_CASE("structural audit at n=20000, d=10, h=9") {
  const PointMatrix p = oracle::uniform(20000, 10, 5);
  const auto t = build_buffer_tree(p, 9);
  REQUIRE(t.num_leaves() == 512);
  Index next = 0;
  for (Index leaf = 0; leaf < 512; ++leaf) {
    const auto r = t.leaf_bounds(leaf);
    CHECK(r.begin == next);
    CHECK((r.size() == 39 || r.size() == 40));
    next = r.end;
  }
  CHECK(next == 20000);
  audit_predicates(t);
  std::vector<Index> ids = t.leaves().original_index;
  std::sort(ids.begin(), ids.end());
  for (Index i = 0; i < 20000; ++i) REQUIRE(ids[i] == i);
}

TEST_CASE("leaf sizes differ by at most one, including tied data") {
  for (int h = 1; h <= 6; ++h) {
    const PointMatrix p = oracle::lattice(200 + h * 7, 2, 2, static_cast<std::uint64_t>(h));
    const auto t = build_buffer_tree(p, h);
    Index lo = p.rows(), hi = 0;
    for (Index leaf = 0; leaf < t.num_leaves(); ++leaf) {
      lo = std::min(lo, t.leaf_bounds(leaf).size());
      hi = std::max(hi, t.leaf_bounds(leaf).size());
    }
    CHECK(hi - lo <= 1);
    audit_predicates(t);
  }
}

TEST_CASE("build rejects 2^h > n and h < 1") {
  const PointMatrix p = oracle::uniform(7, 2, 1);
  CHECK_THROWS_AS(build_buffer_tree(p, 3), std::invalid_argument);
  CHECK_THROWS_AS(build_buffer_tree(p, 0), std::invalid_argument);
  CHECK_NOTHROW(build_buffer_tree(p, 2));
}

TEST_CASE("top tree matches the classic tree of the same height") {
  const PointMatrix p = oracle::lattice(900, 3, 5, 8);
  const auto bt = build_buffer_tree(p, 4);
  const auto kt = KdTree<float>::build_with_height(p, 4);
  REQUIRE(kt.num_leaves() == bt.num_leaves());
  for (Index leaf = 0; leaf < bt.num_leaves(); ++leaf) {
    CHECK(kt.leaves()[leaf].begin == bt.leaf_bounds(leaf).begin);
    CHECK(kt.leaves()[leaf].end == bt.leaf_bounds(leaf).end);
  }
  CHECK(std::equal(kt.original_index().begin(), kt.original_index().end(),
                   bt.leaves().original_index.begin()));
}

TEST_CASE("buffer config defaults") {
  const auto c9 = BufferConfig::defaults(9);
  CHECK(c9.buffer_capacity == 32768);
  CHECK(c9.fetch_size == 327680);
  CHECK(c9.half_full_threshold == 16384);
  CHECK(BufferConfig::defaults(24).buffer_capacity == 1);
  CHECK(BufferConfig::defaults(28).buffer_capacity == 1);
  CHECK(BufferConfig::defaults(23).buffer_capacity == 2);
  CHECK(BufferConfig::with(1).half_full_threshold == 1);
  CHECK(BufferConfig::with(5, 3).fetch_size == 15);
  CHECK(BufferConfig::with(5, 3).half_full_threshold == 3);
  CHECK_THROWS_AS(BufferConfig::with(0), std::invalid_argument);
  CHECK_THROWS_AS(BufferConfig::with(4, 0), std::invalid_argument);
}

TEST_CASE("buffer_insert capacity") {
  QueryBuffers b(4, 3);
  buffer_insert(b, 2, 10);
  CHECK(b.fill(2) == 1);
  buffer_insert(b, 2, 11);
  buffer_insert(b, 2, 12);
  CHECK(b.is_full(2));
  CHECK(b.max_fill() == 3);
  CHECK_THROWS_AS(buffer_insert(b, 2, 13), std::logic_error);
  CHECK(b.fill(2) == 3);
  buffer_insert(b, 0, 5);
  const auto drained = b.drain();
  REQUIRE(drained.size() == 4);
  CHECK(drained[0].leaf == 0);
  CHECK(drained[0].query == 5);
  CHECK(drained[3].query == 12);
  CHECK(b.total() == 0);
  CHECK(b.max_fill() == 0);
}

TEST_CASE("interleaved insert/drain stress against a reference model") {
  std::mt19937 rng(17);
  for (Index cap : {1, 2, 3, 5}) {
    QueryBuffers b(6, cap);
    std::map<Index, std::vector<Index>> model;
    std::set<Index> placed;
    Index next_query = 0;
    for (int step = 0; step < 4000; ++step) {
      if (rng() % 7 == 0) {
        const auto drained = b.drain();
        std::vector<std::pair<Index, Index>> expect;
        for (auto& [leaf, qs] : model)
          for (Index q : qs) expect.emplace_back(leaf, q);
        REQUIRE(drained.size() == expect.size());
        for (std::size_t i = 0; i < drained.size(); ++i) {
          CHECK(drained[i].leaf == expect[i].first);
          CHECK(drained[i].query == expect[i].second);
        }
        model.clear();
        placed.clear();
        continue;
      }
      const Index leaf = static_cast<Index>(rng() % 6);
      const Index q = next_query++;
      if (static_cast<Index>(model[leaf].size()) >= cap) {
        CHECK_THROWS_AS(b.insert(leaf, q), std::logic_error);
      } else {
        b.insert(leaf, q);
        model[leaf].push_back(q);
        CHECK(placed.insert(q).second);
      }
      Index total = 0;
      for (Index l = 0; l < 6; ++l) {
        CHECK(b.fill(l) <= cap);
        total += b.fill(l);
      }
      CHECK(total == static_cast<Index>(placed.size()));
    }
  }
}

TEST_CASE("find_leaf_batch descends, then prunes to DONE") {
  // Two far clusters; query sits in the middle of the left one.
  PointMatrix p(8, 1);
  p << 0.0f, 0.1f, 0.2f, 0.3f, 10.0f, 10.1f, 10.2f, 10.3f;
  const auto t = build_buffer_tree(p, 2);
  PointMatrix q(1, 1);
  q << 0.02f;
  auto dev = device_for(t, 1, 1, 1);
  LazySearch s(t, q, SearchParams{1}, BufferConfig::with(4), *dev, ChunkPlan(8, 1));
  const Index queries[] = {0};
  const auto first = s.find_leaf_batch(queries);
  CHECK(first[0] == 0);
  CHECK(s.state(0).stack.size() == 2);
  CHECK(s.state(0).stack[0].far_child == 2);
  s.buffers().insert(0, 0);
  const auto again = s.process_all_buffers();
  CHECK(again == std::vector<Index>{0});
  CHECK(s.neighbors(0)[0].index == 0);
  const auto second = s.find_leaf_batch(queries);
  CHECK(second[0] == kDone);
  CHECK(s.state(0).done);
  CHECK(s.stats().leaf_scans == 1);
}

TEST_CASE("process_all_buffers with every buffer empty is rejected") {
  const PointMatrix p = oracle::uniform(16, 2, 1);
  const auto t = build_buffer_tree(p, 2);
  auto dev = device_for(t, 1, 1, 1);
  const PointMatrix q = p.topRows(1);
  LazySearch s(t, q, SearchParams{1}, BufferConfig::with(4), *dev, ChunkPlan(16, 1));
  CHECK_THROWS_AS(s.process_all_buffers(), std::logic_error);
}

TEST_CASE("leaf inside one chunk is scanned once; straddling leaf is split") {
  const PointMatrix p = oracle::uniform(12, 2, 3);
  const auto t = build_buffer_tree(p, 2);  // leaves of 3: [0,3) [3,6) [6,9) [9,12)
  const PointMatrix q = oracle::uniform(1, 2, 4);

  SUBCASE("inside") {
    auto dev = device_for(t, 1, 2, 2);  // chunks [0,6) [6,12)
    LazySearch s(t, q, SearchParams{2}, BufferConfig::with(4), *dev, ChunkPlan(12, 2));
    s.buffers().insert(0, 0);
    s.process_all_buffers();
    dev->wait_all();
    CHECK(dev->distance_evaluations() == 3);
    std::vector<oracle::Hit> all;
    for (Index i = 0; i < 3; ++i)
      all.push_back({t.leaves().original_index[i], oracle::sqdist(t.leaves().rearranged.row(i).data(), q.data(), 2)});
    std::sort(all.begin(), all.end(), [](auto& a, auto& b) { return std::tie(a.sq, a.index) < std::tie(b.sq, b.index); });
    all.resize(2);
    CHECK(oracle::hits(s.neighbors(0)) == all);
  }
  SUBCASE("straddling") {
    auto dev = device_for(t, 1, 2, 3);  // chunks [0,4) [4,8) [8,12); leaf 1 = [3,6)
    LazySearch s(t, q, SearchParams{2}, BufferConfig::with(4), *dev, ChunkPlan(12, 3));
    s.buffers().insert(1, 0);
    s.process_all_buffers();
    dev->wait_all();
    CHECK(dev->distance_evaluations() == 3);
    CHECK(dev->kernels_run() >= 2);
    std::vector<oracle::Hit> all;
    for (Index i = 3; i < 6; ++i)
      all.push_back({t.leaves().original_index[i], oracle::sqdist(t.leaves().rearranged.row(i).data(), q.data(), 2)});
    std::sort(all.begin(), all.end(), [](auto& a, auto& b) { return std::tie(a.sq, a.index) < std::tie(b.sq, b.index); });
    all.resize(2);
    CHECK(oracle::hits(s.neighbors(0)) == all);
  }
}

TEST_CASE("single query equals the classic search") {
  const PointMatrix p = oracle::uniform(3000, 4, 9);
  const auto bt = build_buffer_tree(p, 5);
  const auto kt = KdTree<float>::build_with_height(p, 5);
  const PointMatrix q = oracle::uniform(1, 4, 10);
  const auto got = search(bt, q, 7, BufferConfig::with(8));
  CHECK(got[0] == kt.query(q.row(0), SearchParams{7}));
}

TEST_CASE("m=10000, n=20000, d=5, h=6 equals the brute oracle") {
  const PointMatrix p = oracle::uniform(20000, 5, 31);
  const PointMatrix q = oracle::uniform(10000, 5, 32);
  const auto t = build_buffer_tree(p, 6);
  SearchStats stats;
  const auto got = search(t, q, 10, BufferConfig::defaults(6), 3, &stats);
  CHECK(got == brute_knn(p, q, SearchParams{10}));
  CHECK(stats.leaf_scans <= q.rows() * 64);
}

TEST_CASE("B=1 is exact and needs the most drains") {
  const PointMatrix p = oracle::lattice(600, 3, 4, 2);
  const PointMatrix q = oracle::lattice(80, 3, 4, 3);
  const auto t = build_buffer_tree(p, 3);
  SearchStats tiny, wide;
  const auto a = search(t, q, 5, BufferConfig::with(1), 2, &tiny);
  const auto b = search(t, q, 5, BufferConfig::with(64), 2, &wide);
  CHECK(oracle::same(a, oracle::knn_all(p, q, 5)));
  CHECK(a == b);
  CHECK(tiny.leaf_scans == wide.leaf_scans);
  CHECK(tiny.process_calls >= tiny.leaf_scans / 8);
  CHECK(tiny.process_calls > wide.process_calls);
}

TEST_CASE("traversal equivalence and conservation on random instances") {
  std::mt19937 rng(123);
  const Index dims[] = {2, 3, 5, 10};
  for (int trial = 0; trial < 12; ++trial) {
    const Index d = dims[rng() % 4];
    const int h = 1 + static_cast<int>(rng() % 6);
    const Index n = (Index{1} << h) + static_cast<Index>(rng() % 1500);
    const Index m = 1 + static_cast<Index>(rng() % 300);
    const Index k = 1 + static_cast<Index>(rng() % std::min<Index>(n, 20));
    const bool ties = trial % 3 == 0;
    const PointMatrix p = ties ? oracle::lattice(n, d, 3, rng()) : oracle::uniform(n, d, rng());
    const PointMatrix q = ties ? oracle::lattice(m, d, 3, rng()) : oracle::uniform(m, d, rng());
    const auto t = build_buffer_tree(p, h);
    const Index B = 1 + static_cast<Index>(rng() % 16);
    const Index N = 1 + static_cast<Index>(rng() % 4);
    INFO("trial " << trial << " n=" << n << " m=" << m << " d=" << d << " h=" << h << " k=" << k);

    auto dev = device_for(t, m, k, N);
    LazySearch s(t, q, SearchParams{k}, BufferConfig::with(B, 1 + static_cast<Index>(rng() % 10)), *dev,
                 ChunkPlan(n, N), SearchOptions{1, true, true});
    const auto got = s.run();
    CHECK(s.audit().done == m);
    CHECK(oracle::same(got, oracle::knn_all(p, q, k)));

    oracle::LevelTree lt{h, d, t.top().split_values};
    std::vector<std::pair<Index, Index>> bounds;
    for (Index leaf = 0; leaf < t.num_leaves(); ++leaf)
      bounds.emplace_back(t.leaf_bounds(leaf).begin, t.leaf_bounds(leaf).end);
    for (Index i = 0; i < m; ++i) {
      std::vector<Index> order;
      std::vector<oracle::Hit> best;
      oracle::visit_order(lt, q.row(i).data(), 0, 0, order, bounds, t.leaves().rearranged,
                          t.leaves().original_index, k, best);
      const auto v = s.visited(i);
      REQUIRE(std::vector<Index>(v.begin(), v.end()) == order);
    }
    CHECK(dev->hazard_count() == 0);
  }
}

TEST_CASE("stack depth never exceeds h") {
  const PointMatrix p = oracle::uniform(500, 3, 1);
  const PointMatrix q = oracle::uniform(40, 3, 2);
  const auto t = build_buffer_tree(p, 5);
  auto dev = device_for(t, 40, 3, 1);
  LazySearch s(t, q, SearchParams{3}, BufferConfig::with(4), *dev, ChunkPlan(500, 1));
  std::vector<Index> all(40);
  std::iota(all.begin(), all.end(), Index{0});
  s.find_leaf_batch(all);
  for (Index i = 0; i < 40; ++i) {
    CHECK(s.state(i).stack.size() == 5);
    CHECK(s.state(i).started);
    CHECK_FALSE(s.state(i).done);
  }
}

TEST_CASE("results independent of B, M, N and host threads") {
  const PointMatrix p = oracle::uniform(4000, 3, 41);
  const PointMatrix q = oracle::uniform(700, 3, 42);
  const auto t = build_buffer_tree(p, 6);
  const auto base = search(t, q, 10, BufferConfig::defaults(6), 1);
  CHECK(base == search(t, q, 10, BufferConfig::with(3, 1), 7));
  CHECK(base == search(t, q, 10, BufferConfig::with(50, 2), 2, nullptr, SearchOptions{4, false, false}));
}

TEST_CASE("lazy_search rejects a chunk plan that does not fit") {
  const PointMatrix p = oracle::uniform(100, 2, 1);
  const auto t = build_buffer_tree(p, 2);
  Device dev(DeviceSpec{}, 10 * point_bytes(2), query_bytes(2, 1));
  const PointMatrix q = p.topRows(1);
  CHECK_THROWS_AS(LazySearch(t, q, SearchParams{1}, BufferConfig::with(2), dev, ChunkPlan(100, 2)),
                  ConfigError);
  CHECK_THROWS_AS(LazySearch(t, q, SearchParams{1}, BufferConfig::with(2), dev, ChunkPlan(50, 5)),
                  std::invalid_argument);
}
