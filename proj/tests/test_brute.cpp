#include <doctest.h>

#include "bkdt/brute.hpp"
#include "oracle.hpp"

using namespace bkdt;

namespace {

Device make_device(Index n, Index d, Index m, Index k, Index chunks) {
  const std::size_t chunk = static_cast<std::size_t>(ChunkPlan(n, chunks).max_chunk_size()) * point_bytes(d);
  return Device(DeviceSpec{}, chunk, static_cast<std::size_t>(std::max<Index>(m, 1)) * query_bytes(d, k));
}

}  // namespace

TEST_CASE("brute_knn small examples") {
  PointMatrix refs(3, 2);
  refs << 0, 0, 1, 0, 5, 5;
  PointMatrix q(1, 2);
  q << 0.9f, 0;
  const auto r = brute_knn(refs, q, SearchParams{1});
  REQUIRE(r[0].size() == 1);
  CHECK(r[0][0].index == 1);
  CHECK(r[0][0].sq_dist == doctest::Approx(0.01f));
  CHECK(r[0][0].sq_dist == oracle::sqdist(refs.row(1).data(), q.row(0).data(), 2));

  PointMatrix same = refs.row(2);
  const auto s = brute_knn(refs, same, SearchParams{1});
  CHECK(s[0][0].index == 2);
  CHECK(s[0][0].sq_dist == 0.0f);
}

TEST_CASE("brute_knn matches the sort-all-distances oracle") {
  const PointMatrix refs = oracle::uniform(200, 5, 1);
  const PointMatrix q = oracle::uniform(50, 5, 2);
  CHECK(oracle::same(brute_knn(refs, q, SearchParams{10}), oracle::knn_all(refs, q, 10)));
}

TEST_CASE("brute_knn with heavy ties matches the oracle") {
  const PointMatrix refs = oracle::lattice(300, 3, 4, 5);
  const PointMatrix q = oracle::lattice(40, 3, 4, 6);
  CHECK(oracle::same(brute_knn(refs, q, SearchParams{20}), oracle::knn_all(refs, q, 20)));
}

TEST_CASE("brute_knn is independent of worker count and counts distances") {
  const PointMatrix refs = oracle::uniform(300, 4, 3);
  const PointMatrix q = oracle::uniform(70, 4, 4);
  std::int64_t count = 0;
  const auto a = brute_knn(refs, q, SearchParams{7}, 1, &count);
  CHECK(count == 300 * 70);
  CHECK(a == brute_knn(refs, q, SearchParams{7}, 5));
}

TEST_CASE("brute_knn errors") {
  const PointMatrix refs = oracle::uniform(5, 3, 1);
  CHECK_THROWS_AS(brute_knn(refs, oracle::uniform(2, 3, 2), SearchParams{6}), std::invalid_argument);
  CHECK_THROWS_AS(brute_knn(refs, oracle::uniform(2, 4, 2), SearchParams{1}), std::invalid_argument);
}

TEST_CASE("brute_knn in double precision") {
  Points<double> refs(3, 1);
  refs << 0.0, 1.0, 3.0;
  Points<double> q(1, 1);
  q << 2.1;
  const auto r = brute_knn(refs, q, SearchParams{2});
  CHECK(r[0][0].index == 2);
  CHECK(r[0][1].index == 1);
}

TEST_CASE("brute_knn_chunked with N=1 equals brute_knn") {
  const PointMatrix refs = oracle::uniform(150, 3, 8);
  const PointMatrix q = oracle::uniform(30, 3, 9);
  Device dev = make_device(150, 3, 30, 5, 1);
  CHECK(brute_knn_chunked(refs, q, SearchParams{5}, dev, ChunkPlan(150, 1)) ==
        brute_knn(refs, q, SearchParams{5}));
  CHECK(dev.hazard_count() == 0);
}

TEST_CASE("brute_knn_chunked with N=4 equals brute_knn") {
  const PointMatrix refs = oracle::uniform(1000, 10, 10);
  const PointMatrix q = oracle::uniform(100, 10, 11);
  Device dev = make_device(1000, 10, 100, 10, 4);
  const auto got = brute_knn_chunked(refs, q, SearchParams{10}, dev, ChunkPlan(1000, 4));
  CHECK(got == brute_knn(refs, q, SearchParams{10}));
  CHECK(oracle::same(got, oracle::knn_all(refs, q, 10)));
  CHECK(dev.distance_evaluations() == 1000 * 100);
  CHECK(dev.hazard_count() == 0);
}

TEST_CASE("brute_knn_chunked across N and with small query blocks") {
  const PointMatrix refs = oracle::lattice(97, 2, 5, 12);
  const PointMatrix q = oracle::lattice(23, 2, 5, 13);
  const auto expect = brute_knn(refs, q, SearchParams{6});
  for (Index N : {1, 2, 3, 7, 97}) {
    const std::size_t chunk = static_cast<std::size_t>(ChunkPlan(97, N).max_chunk_size()) * point_bytes(2);
    Device dev(DeviceSpec{}, chunk, 4 * query_bytes(2, 6));  // four queries per block
    CHECK(brute_knn_chunked(refs, q, SearchParams{6}, dev, ChunkPlan(97, N)) == expect);
    CHECK(dev.hazard_count() == 0);
  }
}

TEST_CASE("brute_knn_chunked empty query set and configuration errors") {
  const PointMatrix refs = oracle::uniform(50, 3, 1);
  Device dev = make_device(50, 3, 1, 3, 2);
  CHECK(brute_knn_chunked(refs, PointMatrix(0, 3), SearchParams{3}, dev, ChunkPlan(50, 2)).empty());
  // Chunk larger than the buffer.
  CHECK_THROWS_AS(brute_knn_chunked(refs, oracle::uniform(1, 3, 2), SearchParams{3}, dev, ChunkPlan(50, 1)),
                  ConfigError);
  // Query block too small for even one query.
  Device tiny(DeviceSpec{}, 50 * point_bytes(3), 1);
  CHECK_THROWS_AS(brute_knn_chunked(refs, oracle::uniform(1, 3, 2), SearchParams{3}, tiny, ChunkPlan(50, 1)),
                  ConfigError);
}
