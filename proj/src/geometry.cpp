#include "hmgp/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace hmgp {

double Box::diameter() const {
  const double dx = hi[0] - lo[0];
  const double dy = hi[1] - lo[1];
  return std::sqrt(dx * dx + dy * dy);
}

double Box::distance(const Box& a, const Box& b) {
  double s = 0.0;
  for (int d = 0; d < 2; ++d) {
    const double gap = std::max({0.0, b.lo[d] - a.hi[d], a.lo[d] - b.hi[d]});
    s += gap * gap;
  }
  return std::sqrt(s);
}

namespace {

Box bounding_box(std::span<const Location> points, std::span<const int> idx) {
  Box b;
  b.lo[0] = b.hi[0] = points[idx[0]].x;
  b.lo[1] = b.hi[1] = points[idx[0]].y;
  for (int i : idx) {
    b.lo[0] = std::min(b.lo[0], points[i].x);
    b.hi[0] = std::max(b.hi[0], points[i].x);
    b.lo[1] = std::min(b.lo[1], points[i].y);
    b.hi[1] = std::max(b.hi[1], points[i].y);
  }
  return b;
}

}  // namespace

ClusterTree::ClusterTree(std::span<const Location> points, int leaf_size)
    : leaf_size_(leaf_size) {
  if (points.empty()) throw std::invalid_argument("empty dataset");
  if (leaf_size < 1) throw std::invalid_argument("leaf_size must be >= 1");
  for (const Location& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw std::invalid_argument("invalid location");
  }
  perm_.resize(points.size());
  std::iota(perm_.begin(), perm_.end(), 0);
  root_ = build(points, 0, static_cast<int>(points.size()));
  inv_perm_.resize(perm_.size());
  for (size_t k = 0; k < perm_.size(); ++k) inv_perm_[perm_[k]] = static_cast<int>(k);
}

std::unique_ptr<Cluster> ClusterTree::build(std::span<const Location> points, int begin,
                                            int end) {
  auto node = std::make_unique<Cluster>();
  node->begin = begin;
  node->end = end;
  node->box = bounding_box(points, std::span<const int>(perm_).subspan(begin, end - begin));
  if (end - begin <= leaf_size_) return node;

  const int axis = (node->box.hi[0] - node->box.lo[0] >= node->box.hi[1] - node->box.lo[1])
                       ? 0
                       : 1;
  // Median split along the longest axis; ties resolved by original index so
  // the tree is independent of the input permutation of equal coordinates.
  std::sort(perm_.begin() + begin, perm_.begin() + end, [&](int a, int b) {
    const double ca = axis == 0 ? points[a].x : points[a].y;
    const double cb = axis == 0 ? points[b].x : points[b].y;
    return ca != cb ? ca < cb : a < b;
  });
  const int mid = begin + (end - begin) / 2;
  node->left = build(points, begin, mid);
  node->right = build(points, mid, end);
  return node;
}

std::vector<const Cluster*> ClusterTree::leaves() const {
  std::vector<const Cluster*> out;
  std::vector<const Cluster*> stack{root_.get()};
  while (!stack.empty()) {
    const Cluster* c = stack.back();
    stack.pop_back();
    if (c->is_leaf()) {
      out.push_back(c);
    } else {
      stack.push_back(c->right.get());
      stack.push_back(c->left.get());
    }
  }
  return out;
}

ClusterTree build_cluster_tree(std::span<const Location> locations, int leaf_size) {
  return ClusterTree(locations, leaf_size);
}

BlockClusterTree::BlockClusterTree(const ClusterTree& rows, const ClusterTree& cols,
                                   double eta)
    : rows_(&rows), cols_(&cols), eta_(eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  root_ = build(rows.root(), cols.root());
  std::vector<const Node*> stack{root_.get()};
  while (!stack.empty()) {
    const Node* b = stack.back();
    stack.pop_back();
    if (b->is_leaf()) {
      leaves_.push_back(b);
      (b->tag == Node::Tag::Admissible ? admissible_count_ : dense_count_)++;
    } else {
      for (auto it = b->children.rbegin(); it != b->children.rend(); ++it)
        stack.push_back(it->get());
    }
  }
}

std::unique_ptr<BlockClusterTree::Node> BlockClusterTree::build(const Cluster& row,
                                                                const Cluster& col) {
  auto node = std::make_unique<Node>();
  node->row = &row;
  node->col = &col;

  const double dist = Box::distance(row.box, col.box);
  const double min_diam = std::min(row.box.diameter(), col.box.diameter());
  // Touching boxes (dist == 0) are never admissible, whatever eta.
  if (dist > 0.0 && min_diam <= eta_ * dist) {
    node->tag = Node::Tag::Admissible;
    return node;
  }
  if (row.is_leaf() && col.is_leaf()) {
    node->tag = Node::Tag::Dense;
    return node;
  }
  node->tag = Node::Tag::Split;
  const Cluster* row_parts[2] = {&row, nullptr};
  const Cluster* col_parts[2] = {&col, nullptr};
  int nr = 1, nc = 1;
  if (!row.is_leaf()) {
    row_parts[0] = row.left.get();
    row_parts[1] = row.right.get();
    nr = 2;
  }
  if (!col.is_leaf()) {
    col_parts[0] = col.left.get();
    col_parts[1] = col.right.get();
    nc = 2;
  }
  node->children.reserve(static_cast<size_t>(nr) * nc);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nc; ++j) node->children.push_back(build(*row_parts[i], *col_parts[j]));
  return node;
}

BlockClusterTree build_block_tree(const ClusterTree& rows, const ClusterTree& cols,
                                  double eta) {
  return BlockClusterTree(rows, cols, eta);
}

}  // namespace hmgp
