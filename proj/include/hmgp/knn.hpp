#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "hmgp/geometry.hpp"

namespace hmgp {

// Exact k-nearest-neighbor index (median-split k-d tree, bucket size 16).
// Ties at the k-th distance resolve toward the smaller original index.
class KdTree {
 public:
  explicit KdTree(std::span<const Location> points, int leaf_size = 16);

  // Indices of the k nearest points, ordered by (distance, index).
  std::vector<int> query(const Location& q, int k) const;

  int size() const { return tree_->size(); }

 private:
  std::span<const Location> pts_;
  std::unique_ptr<ClusterTree> tree_;
};

// Unweighted mean of the k nearest training values at each query point.
Eigen::VectorXd knn_predict(std::span<const Location> train, const Eigen::VectorXd& values,
                            std::span<const Location> queries, int k);

struct SelectKResult {
  int k = 1;
  std::vector<int> candidates;     // deduplicated, ascending
  std::vector<double> cv_rmse;     // aligned with candidates
};

// Monte-Carlo cross-validation over repeated 1:9 validation:train splits;
// returns the candidate with the smallest mean RMSE (smallest k on ties).
SelectKResult select_k(std::span<const Location> train, const Eigen::VectorXd& values,
                       std::span<const int> candidate_ks, int splits, std::uint64_t seed);

}  // namespace hmgp
