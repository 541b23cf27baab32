#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>

#include "hmgp/covkernel.hpp"
#include "hmgp/geometry.hpp"
#include "hmgp/hblock.hpp"

namespace hmgp {

// Either a fixed per-block rank or a fixed per-block accuracy drives the
// adaptive cross approximation of admissible blocks.
struct RankControl {
  enum class Mode { FixedAccuracy, FixedRank };
  Mode mode = Mode::FixedAccuracy;
  double eps = 1e-6;
  int rank = 16;
  int max_rank = 256;

  static RankControl fixed_accuracy(double eps) {
    RankControl rc;
    rc.mode = Mode::FixedAccuracy;
    rc.eps = eps;
    return rc;
  }
  static RankControl fixed_rank(int k) {
    RankControl rc;
    rc.mode = Mode::FixedRank;
    rc.rank = k;
    return rc;
  }
};

class HMatrix;
class HFactor;
enum class FactorForm;
HFactor factorize(const HMatrix&, double, FactorForm);

class HMatrix {
 public:
  int rows() const { return rows_->size(); }
  int cols() const { return cols_->size(); }
  bool symmetric() const { return symmetric_; }
  const ClusterTree& row_tree() const { return *rows_; }
  const ClusterTree& col_tree() const { return *cols_; }
  const HBlock& root() const { return *root_; }
  const RankControl& rank_control() const { return rc_; }

  // y = C~ x in original index order.
  Eigen::VectorXd matvec(const Eigen::VectorXd& x) const;

  // Entry-wise reconstruction in original index order. Guarded to n <= 4096.
  Eigen::MatrixXd to_dense() const;

  struct Storage {
    std::size_t bytes = 0;
    double ratio = 0.0;  // bytes / (rows * cols * sizeof(double))
  };
  Storage storage() const;

  double max_diagonal() const;
  int max_leaf_rank() const;

 private:
  friend HMatrix assemble(const BlockClusterTree&, std::span<const Location>,
                          const MaternParams&, const RankControl&, int);
  friend HMatrix from_dense(const Eigen::MatrixXd&);
  friend class HFactor;
  friend HFactor factorize(const HMatrix&, double, FactorForm);

  std::unique_ptr<HBlock> root_;
  std::vector<HBlock*> leaves_;
  const ClusterTree* rows_ = nullptr;
  const ClusterTree* cols_ = nullptr;
  std::shared_ptr<const ClusterTree> owned_tree_;  // set when self-contained
  RankControl rc_;
  bool symmetric_ = false;
};

// Assemble the H-approximation of the Matern covariance matrix over the given
// block partition: dense blocks entry-wise, admissible blocks by partially
// pivoted ACA that only ever samples individual entries. For a square tree
// pair only the lower triangle is stored; the upper part is implied.
HMatrix assemble(const BlockClusterTree& block_tree, std::span<const Location> locations,
                 const MaternParams& params, const RankControl& rc, int threads = 1);

// Single-leaf H-matrix wrapping an explicit dense matrix (small problems,
// factorization tests, identity inputs).
HMatrix from_dense(const Eigen::MatrixXd& m);

namespace detail {
// Partially pivoted ACA on an m x n block given an entry generator.
// Returns U (m x r), V (n x r) with block ~= U V^T.
struct AcaResult {
  Eigen::MatrixXd U, V;
};
AcaResult aca(int m, int n, const std::function<double(int, int)>& entry,
              const RankControl& rc);
}  // namespace detail

}  // namespace hmgp
