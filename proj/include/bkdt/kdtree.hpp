#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "bkdt/core.hpp"
#include "bkdt/parallel.hpp"

namespace bkdt {

namespace detail {

/// Median split of perm[0, s): afterwards positions [0, s/2) hold the s/2
/// smallest points under (coordinate[dim], point index) and the returned split
/// value is the coordinate of the point landing at position s/2. Equal
/// coordinates therefore go right, and the halves are exactly floor/ceil.
/// Expected linear time.
template <typename Scalar>
Scalar median_split(const Points<Scalar>& points, std::span<Index> perm, Index dim) {
  const auto mid = perm.begin() + static_cast<std::ptrdiff_t>(perm.size() / 2);
  std::nth_element(perm.begin(), mid, perm.end(), [&](Index a, Index b) {
    const Scalar ca = points(a, dim);
    const Scalar cb = points(b, dim);
    return ca < cb || (ca == cb && a < b);
  });
  return points(*mid, dim);
}

}  // namespace detail

/// Classic k-d tree over a rearranged copy of the reference points.
///
/// The split dimension at depth i is i mod d; a node's subset of size s is
/// split into floor(s/2) points on the left and the rest on the right. Leaves
/// are numbered left to right and own contiguous ranges of `points()`.
template <typename Scalar>
class KdTree {
 public:
  struct Node {
    Index split_dim = -1;
    Scalar split_value{};
    std::int32_t left = -1;
    std::int32_t right = -1;
    Index leaf = -1;  // leaf id, or -1 for internal nodes
    Index begin = 0;
    Index end = 0;

    bool is_leaf() const { return leaf >= 0; }
  };

  struct LeafRange {
    Index begin;
    Index end;
  };

  /// Recursion stops once a subset has at most leaf_size points.
  static KdTree build(const Points<Scalar>& refs, Index leaf_size = 32) {
    if (leaf_size < 1) throw std::invalid_argument("KdTree: leaf_size must be >= 1");
    return KdTree(refs, leaf_size, -1);
  }

  /// Complete tree of the given height (2^height leaves); the shape the top
  /// tree of a buffer k-d tree uses.
  static KdTree build_with_height(const Points<Scalar>& refs, int height) {
    if (height < 0 || height > 30 || (Index{1} << height) > refs.rows()) {
      throw std::invalid_argument("KdTree: need 0 <= height and 2^height <= n");
    }
    return KdTree(refs, 0, height);
  }

  Index size() const { return points_.rows(); }
  Index dim() const { return points_.cols(); }
  Index leaf_size() const { return leaf_size_; }
  Index num_leaves() const { return static_cast<Index>(leaves_.size()); }
  std::span<const Node> nodes() const { return nodes_; }
  std::span<const LeafRange> leaves() const { return leaves_; }
  const Points<Scalar>& points() const { return points_; }
  std::span<const Index> original_index() const { return original_index_; }

  /// Exact k-NN of q. If visited is non-null the ids of scanned leaves are
  /// appended in scan order. With prune == false every leaf is scanned.
  template <typename Derived>
  NeighborList<Scalar> query(const Eigen::MatrixBase<Derived>& q, const SearchParams& params,
                             std::vector<Index>* visited = nullptr, bool prune = true) const {
    if (q.size() != dim()) throw std::invalid_argument("KdTree::query: dimension mismatch");
    if (params.k < 1 || params.k > size()) throw std::invalid_argument("KdTree::query: bad k");
    NeighborList<Scalar> result(params.k);
    search(0, q, result, visited, prune);
    return result;
  }

 private:
  KdTree(const Points<Scalar>& refs, Index leaf_size, int height) : leaf_size_(leaf_size) {
    validate_points(refs, 1, "reference set");
    std::vector<Index> perm(static_cast<std::size_t>(refs.rows()));
    std::iota(perm.begin(), perm.end(), Index{0});
    build_node(refs, perm, 0, refs.rows(), 0, height);
    points_.resize(refs.rows(), refs.cols());
    for (Index i = 0; i < refs.rows(); ++i) points_.row(i) = refs.row(perm[i]);
    original_index_ = std::move(perm);
  }

  std::int32_t build_node(const Points<Scalar>& refs, std::vector<Index>& perm, Index begin,
                          Index end, int depth, int height) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({});
    const Index s = end - begin;
    const bool stop = height >= 0 ? depth == height : s <= leaf_size_;
    if (stop) {
      nodes_[id].leaf = num_leaves();
      nodes_[id].begin = begin;
      nodes_[id].end = end;
      leaves_.push_back({begin, end});
      return id;
    }
    const Index dim = depth % refs.cols();
    const Scalar split = detail::median_split(
        refs, std::span<Index>(perm.data() + begin, static_cast<std::size_t>(s)), dim);
    const Index mid = begin + s / 2;
    const std::int32_t left = build_node(refs, perm, begin, mid, depth + 1, height);
    const std::int32_t right = build_node(refs, perm, mid, end, depth + 1, height);
    Node& node = nodes_[id];
    node.split_dim = dim;
    node.split_value = split;
    node.left = left;
    node.right = right;
    node.begin = begin;
    node.end = end;
    return id;
  }

  template <typename Derived>
  void search(std::int32_t id, const Eigen::MatrixBase<Derived>& q, NeighborList<Scalar>& result,
              std::vector<Index>* visited, bool prune) const {
    const Node& node = nodes_[id];
    if (node.is_leaf()) {
      if (visited) visited->push_back(node.leaf);
      for (Index pos = node.begin; pos < node.end; ++pos) {
        result.insert(original_index_[pos], sq_euclidean(q, points_.row(pos)));
      }
      return;
    }
    const Scalar diff = q.coeff(node.split_dim) - node.split_value;
    const bool go_left = q.coeff(node.split_dim) < node.split_value;
    search(go_left ? node.left : node.right, q, result, visited, prune);
    // Far side is skipped only when its hyperplane is strictly farther than
    // the current k-th candidate; ties are scanned.
    if (!prune || !result.full() || diff * diff <= result.worst()) {
      search(go_left ? node.right : node.left, q, result, visited, prune);
    }
  }

  Index leaf_size_;
  std::vector<Node> nodes_;
  std::vector<LeafRange> leaves_;
  Points<Scalar> points_;
  std::vector<Index> original_index_;
};

template <typename Scalar>
KdTree<Scalar> build_kdtree(const Points<Scalar>& refs, Index leaf_size = 32) {
  return KdTree<Scalar>::build(refs, leaf_size);
}

/// One thread per query in flight; output is independent of `threads`.
template <typename Scalar>
NeighborTable<Scalar> query_kdtree_parallel(const KdTree<Scalar>& tree,
                                            const Points<Scalar>& queries,
                                            const SearchParams& params, int threads) {
  validate_search(tree.size(), tree.dim(), queries.cols(), params);
  validate_points(queries, 0, "query set");
  NeighborTable<Scalar> out(static_cast<std::size_t>(queries.rows()));
  parallel_for(queries.rows(), threads,
               [&](Index i) { out[static_cast<std::size_t>(i)] = tree.query(queries.row(i), params); });
  return out;
}

}  // namespace bkdt
