#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bkdt {

using Index = Eigen::Index;

/// Dense n x d point set, one point per row. Row-major so that a point is a
/// contiguous run of d scalars, which is also the layout streamed to devices.
template <typename Scalar>
using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using PointMatrix = Points<float>;

template <typename Scalar>
using PointsMap = Eigen::Map<const Points<Scalar>>;

template <typename Scalar>
using RowMap = Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>;

/// Throws std::invalid_argument unless every coefficient is finite and the
/// set has at least `min_rows` points of dimension >= 1.
template <typename Derived>
void validate_points(const Eigen::MatrixBase<Derived>& points, Index min_rows = 1,
                     const char* what = "point set") {
  if (points.cols() < 1) {
    throw std::invalid_argument(std::string(what) + ": dimensionality must be >= 1");
  }
  if (points.rows() < min_rows) {
    throw std::invalid_argument(std::string(what) + ": expected at least " +
                                std::to_string(min_rows) + " points, got " +
                                std::to_string(points.rows()));
  }
  if (!points.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": contains non-finite values");
  }
}

/// Squared Euclidean distance accumulated strictly left to right over the
/// coordinates, in the scalar type of the operands. Every search path in the
/// library goes through this function so results are bit-identical.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar sq_euclidean(const Eigen::MatrixBase<DerivedA>& a,
                                       const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  static_assert(std::is_same_v<Scalar, typename DerivedB::Scalar>,
                "sq_euclidean: operands must share a scalar type");
  eigen_assert(a.size() == b.size() && "sq_euclidean: dimension mismatch");
  Scalar acc(0);
  const Index d = a.size();
  for (Index j = 0; j < d; ++j) {
    const Scalar diff = a.coeff(j) - b.coeff(j);
    acc += diff * diff;
  }
  return acc;
}

template <typename Scalar>
struct Neighbor {
  Index index;
  Scalar sq_dist;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Total order used for every k-best decision: distance first, then the
/// smaller reference index.
template <typename Scalar>
constexpr bool neighbor_less(const Neighbor<Scalar>& a, const Neighbor<Scalar>& b) {
  return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
}

/// The k best candidates seen so far, kept sorted under neighbor_less.
///
/// Insertion is O(k) in the worst case, which beats a heap for the small k
/// this library targets and keeps the entries ordered at all times.
template <typename Scalar>
class NeighborList {
 public:
  using Entry = Neighbor<Scalar>;

  NeighborList() = default;
  explicit NeighborList(Index k) : k_(k) {
    if (k < 1) throw std::invalid_argument("NeighborList: k must be >= 1");
    entries_.reserve(static_cast<std::size_t>(k) + 1);
  }

  Index k() const { return k_; }
  Index size() const { return static_cast<Index>(entries_.size()); }
  bool empty() const { return entries_.empty(); }
  bool full() const { return size() == k_; }

  /// Current k-th smallest distance, +inf while fewer than k candidates.
  Scalar worst() const {
    return full() ? entries_.back().sq_dist : std::numeric_limits<Scalar>::infinity();
  }

  std::span<const Entry> entries() const { return entries_; }
  const Entry& operator[](Index i) const { return entries_[static_cast<std::size_t>(i)]; }

  /// Returns true if the candidate entered the list.
  bool insert(Index index, Scalar sq_dist) {
    const Entry cand{index, sq_dist};
    if (full() && !neighbor_less(cand, entries_.back())) return false;
    auto pos = std::upper_bound(entries_.begin(), entries_.end(), cand, neighbor_less<Scalar>);
    entries_.insert(pos, cand);
    if (size() > k_) entries_.pop_back();
    return true;
  }

  void clear() { entries_.clear(); }

  friend bool operator==(const NeighborList&, const NeighborList&) = default;

 private:
  Index k_ = 0;
  std::vector<Entry> entries_;
};

struct SearchParams {
  Index k = 10;
};

inline void validate_search(Index num_refs, Index ref_dim, Index query_dim,
                            const SearchParams& params) {
  if (ref_dim != query_dim) {
    throw std::invalid_argument("dimension mismatch: references have d=" + std::to_string(ref_dim) +
                                ", queries have d=" + std::to_string(query_dim));
  }
  if (params.k < 1 || params.k > num_refs) {
    throw std::invalid_argument("k must satisfy 1 <= k <= n (k=" + std::to_string(params.k) +
                                ", n=" + std::to_string(num_refs) + ")");
  }
}

template <typename Scalar>
using NeighborTable = std::vector<NeighborList<Scalar>>;

}  // namespace bkdt
