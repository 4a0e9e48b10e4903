#include <doctest.h>

#include <numeric>
#include <random>

#include "bkdt/chunk_plan.hpp"
#include "bkdt/core.hpp"
#include "bkdt/parallel.hpp"
#include "oracle.hpp"

using namespace bkdt;

TEST_CASE("sq_euclidean examples") {
  Eigen::RowVector2f a(0, 0), b(3, 4);
  CHECK(sq_euclidean(a, b) == 25.0f);
  CHECK(sq_euclidean(b, b) == 0.0f);
  Eigen::RowVector3f c(1, 2, 3), e(4, 6, 3);
  CHECK(sq_euclidean(c, e) == 25.0f);
  CHECK(sq_euclidean(e, c) == 25.0f);
}

TEST_CASE("sq_euclidean matches left-to-right accumulation bit for bit") {
  const PointMatrix p = oracle::uniform(200, 15, 7);
  for (Index i = 0; i + 1 < p.rows(); ++i) {
    const float lib = sq_euclidean(p.row(i), p.row(i + 1));
    CHECK(lib == oracle::sqdist(p.row(i).data(), p.row(i + 1).data(), p.cols()));
    CHECK(lib == sq_euclidean(p.row(i), p.row(i + 1)));
  }
}

TEST_CASE("sq_euclidean in double precision") {
  Eigen::RowVector2d a(0.5, 1.5), b(1.5, -0.5);
  CHECK(sq_euclidean(a, b) == 5.0);
}

TEST_CASE("neighbor_insert examples") {
  NeighborList<float> list(2);
  CHECK(list.insert(5, 1.0f));
  REQUIRE(list.size() == 1);
  CHECK(list[0] == Neighbor<float>{5, 1.0f});
  CHECK(list.worst() == std::numeric_limits<float>::infinity());

  list.insert(7, 2.0f);
  CHECK(list.full());
  CHECK_FALSE(list.insert(3, 9.0f));
  CHECK(list.size() == 2);
  CHECK(list[0].index == 5);
  CHECK(list[1].index == 7);

  CHECK(list.insert(3, 1.0f));
  CHECK(list[0] == Neighbor<float>{3, 1.0f});
  CHECK(list[1] == Neighbor<float>{5, 1.0f});
}

TEST_CASE("NeighborList rejects k < 1") {
  CHECK_THROWS_AS(NeighborList<float>(0), std::invalid_argument);
}

TEST_CASE("NeighborList equals sort-and-truncate on random streams") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const Index k = 1 + static_cast<Index>(rng() % 20);
    const int count = static_cast<int>(rng() % 60);
    std::vector<Index> ids(static_cast<std::size_t>(count));
    std::iota(ids.begin(), ids.end(), Index{0});
    std::shuffle(ids.begin(), ids.end(), rng);
    NeighborList<float> list(k);
    std::vector<oracle::Hit> all;
    for (Index id : ids) {
      const float dist = static_cast<float>(rng() % 8);  // many ties
      list.insert(id, dist);
      all.push_back({id, dist});
    }
    std::sort(all.begin(), all.end(), [](auto& a, auto& b) {
      return std::tie(a.sq, a.index) < std::tie(b.sq, b.index);
    });
    if (static_cast<Index>(all.size()) > k) all.resize(static_cast<std::size_t>(k));
    REQUIRE(oracle::hits(list) == all);
    CHECK(list.size() == std::min<Index>(k, count));
  }
}

TEST_CASE("validate_search") {
  CHECK_NOTHROW(validate_search(10, 3, 3, SearchParams{10}));
  CHECK_THROWS_AS(validate_search(10, 3, 3, SearchParams{11}), std::invalid_argument);
  CHECK_THROWS_AS(validate_search(10, 3, 3, SearchParams{0}), std::invalid_argument);
  CHECK_THROWS_AS(validate_search(10, 3, 4, SearchParams{1}), std::invalid_argument);
}

TEST_CASE("validate_points rejects non-finite and empty") {
  PointMatrix p(2, 2);
  p << 1, 2, 3, std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(validate_points(p), std::invalid_argument);
  p(1, 1) = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(validate_points(p), std::invalid_argument);
  p(1, 1) = 0;
  CHECK_NOTHROW(validate_points(p));
  CHECK_THROWS_AS(validate_points(PointMatrix(0, 2)), std::invalid_argument);
  CHECK_THROWS_AS(validate_points(PointMatrix(3, 0)), std::invalid_argument);
}

TEST_CASE("parallel_for covers every index once and rethrows") {
  std::vector<int> hit(1000, 0);
  parallel_for(1000, 4, [&](Index i) { hit[static_cast<std::size_t>(i)]++; });
  CHECK(std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](Index i) {
                                 if (i == 7) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("chunk plan examples") {
  const ChunkPlan big(1000000, 10);
  CHECK(big.chunk(0) == PositionRange{0, 100000});

  const ChunkPlan p(10, 3);
  REQUIRE(p.num_chunks() == 3);
  CHECK(p.chunk(0) == PositionRange{0, 4});
  CHECK(p.chunk(1) == PositionRange{4, 7});
  CHECK(p.chunk(2) == PositionRange{7, 10});
  CHECK(p.max_chunk_size() == 4);
  CHECK(p.chunk_of(3) == 0);
  CHECK(p.chunk_of(4) == 1);
  CHECK(p.chunk_of(9) == 2);

  const ChunkPlan one(17, 1);
  CHECK(one.chunk(0) == PositionRange{0, 17});
}

TEST_CASE("chunk plan partitions and follows the ceiling formula") {
  for (Index n = 1; n <= 60; ++n) {
    for (Index N = 1; N <= n; ++N) {
      const ChunkPlan p(n, N);
      REQUIRE(p.num_chunks() == N);
      Index next = 0;
      for (Index j = 0; j < N; ++j) {
        CHECK(p.chunk(j).begin == next);
        CHECK(p.chunk(j).begin == (j * n + N - 1) / N);
        CHECK(p.chunk(j).size() >= 1);
        next = p.chunk(j).end;
      }
      CHECK(next == n);
    }
  }
  CHECK_THROWS_AS(ChunkPlan(5, 0), std::invalid_argument);
  CHECK_THROWS_AS(ChunkPlan(5, 6), std::invalid_argument);
}

TEST_CASE("plan_chunks suggests the smallest feasible N") {
  CHECK(plan_chunks(100, 4, 25 * 20, 20).num_chunks() == 4);
  CHECK(min_feasible_chunks(100, 25 * 20, 20) == 4);
  CHECK(min_feasible_chunks(100, 24 * 20, 20) == 5);
  try {
    plan_chunks(100, 3, 25 * 20, 20);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("N >= 4") != std::string::npos);
  }
}

TEST_CASE("assign_query_to_chunks examples") {
  const ChunkPlan p(10, 3);
  auto a = assign_query_to_chunks({2, 4}, p);
  REQUIRE(a.size() == 1);
  CHECK(a[0] == ChunkClip{0, {2, 4}});

  auto b = assign_query_to_chunks({3, 8}, p);
  REQUIRE(b.size() == 3);
  CHECK(b[0] == ChunkClip{0, {3, 4}});
  CHECK(b[1] == ChunkClip{1, {4, 7}});
  CHECK(b[2] == ChunkClip{2, {7, 8}});

  CHECK_THROWS(assign_query_to_chunks({4, 4}, p));
  CHECK_THROWS(assign_query_to_chunks({5, 11}, p));
}

TEST_CASE("clip union equals the leaf range on random inputs") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = 1 + static_cast<Index>(rng() % 200);
    const Index N = 1 + static_cast<Index>(rng() % n);
    const Index l = static_cast<Index>(rng() % n);
    const Index r = l + 1 + static_cast<Index>(rng() % (n - l));
    const ChunkPlan plan(n, N);
    const auto clips = assign_query_to_chunks({l, r}, plan);
    Index cursor = l;
    Index prev = -1;
    for (const auto& c : clips) {
      CHECK(c.chunk > prev);
      prev = c.chunk;
      CHECK(c.clip.begin == cursor);
      CHECK(c.clip.begin >= plan.chunk(c.chunk).begin);
      CHECK(c.clip.end <= plan.chunk(c.chunk).end);
      CHECK_FALSE(c.clip.empty());
      cursor = c.clip.end;
    }
    CHECK(cursor == r);
    // Every overlapping chunk is listed.
    Index expected = 0;
    for (Index j = 0; j < N; ++j) {
      if (l < plan.chunk(j).end && plan.chunk(j).begin < r) ++expected;
    }
    CHECK(static_cast<Index>(clips.size()) == expected);
  }
}
