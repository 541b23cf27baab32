#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <vector>

namespace hmgp {

// Scattered observation site in the plane.
struct Location {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Location& a, const Location& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

// Axis-aligned bounding box.
struct Box {
  double lo[2] = {0.0, 0.0};
  double hi[2] = {0.0, 0.0};

  double diameter() const;
  static double distance(const Box& a, const Box& b);
};

// Node of the geometric cluster tree. `begin`/`end` index a half-open range
// of the tree permutation; children partition the parent's range exactly.
struct Cluster {
  int begin = 0;
  int end = 0;
  Box box;
  std::unique_ptr<Cluster> left;
  std::unique_ptr<Cluster> right;

  int size() const { return end - begin; }
  bool is_leaf() const { return left == nullptr; }
};

class ClusterTree {
 public:
  ClusterTree(std::span<const Location> points, int leaf_size);

  const Cluster& root() const { return *root_; }
  int size() const { return static_cast<int>(perm_.size()); }
  int leaf_size() const { return leaf_size_; }

  // tree position -> original index
  const std::vector<int>& perm() const { return perm_; }
  // original index -> tree position
  const std::vector<int>& inverse_perm() const { return inv_perm_; }

  std::vector<const Cluster*> leaves() const;

 private:
  std::unique_ptr<Cluster> build(std::span<const Location> points, int begin, int end);

  std::unique_ptr<Cluster> root_;
  std::vector<int> perm_;
  std::vector<int> inv_perm_;
  int leaf_size_ = 0;
};

ClusterTree build_cluster_tree(std::span<const Location> locations, int leaf_size = 32);

// Partition of the row x column index product into admissible (far-field,
// low-rank compressible) and dense (near-field) blocks.
class BlockClusterTree {
 public:
  struct Node {
    enum class Tag { Admissible, Dense, Split };
    const Cluster* row = nullptr;
    const Cluster* col = nullptr;
    Tag tag = Tag::Dense;
    std::vector<std::unique_ptr<Node>> children;  // row-major over child pairs

    bool is_leaf() const { return tag != Tag::Split; }
  };

  BlockClusterTree(const ClusterTree& rows, const ClusterTree& cols, double eta);

  const Node& root() const { return *root_; }
  const ClusterTree& rows() const { return *rows_; }
  const ClusterTree& cols() const { return *cols_; }
  double eta() const { return eta_; }
  bool square_symmetric() const { return rows_ == cols_; }

  const std::vector<const Node*>& leaves() const { return leaves_; }
  int admissible_count() const { return admissible_count_; }
  int dense_count() const { return dense_count_; }

 private:
  std::unique_ptr<Node> build(const Cluster& row, const Cluster& col);

  std::unique_ptr<Node> root_;
  const ClusterTree* rows_;
  const ClusterTree* cols_;
  double eta_;
  std::vector<const Node*> leaves_;
  int admissible_count_ = 0;
  int dense_count_ = 0;
};

BlockClusterTree build_block_tree(const ClusterTree& rows, const ClusterTree& cols,
                                  double eta = 2.0);

}  // namespace hmgp
