#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "hmgp/geometry.hpp"

namespace hmgp {

enum class BlockKind { Branch, Dense, LowRank };

// Recursive block of an H-matrix over a (row cluster, col cluster) pair.
// Branch children are stored row-major over the child-cluster grid; a child
// slot may be null (upper-triangle blocks of symmetric matrices are not
// stored, the lower mirror carries the data).
struct HBlock {
  BlockKind kind = BlockKind::Branch;
  const Cluster* row = nullptr;
  const Cluster* col = nullptr;

  Eigen::MatrixXd dense;    // Dense payload
  Eigen::MatrixXd U, V;     // LowRank payload, block ~= U * V^T
  int compact_cols = 0;     // rank at the last recompression (see add_low_rank)
  std::vector<std::unique_ptr<HBlock>> children;

  int nrows() const { return row->size(); }
  int ncols() const { return col->size(); }
  int rank() const { return static_cast<int>(U.cols()); }

  int child_rows() const { return row->is_leaf() ? 1 : 2; }
  int child_cols() const { return col->is_leaf() ? 1 : 2; }
  HBlock* child(int i, int j) { return children[i * child_cols() + j].get(); }
  const HBlock* child(int i, int j) const { return children[i * child_cols() + j].get(); }

  const Cluster* row_part(int i) const {
    return row->is_leaf() ? row : (i == 0 ? row->left.get() : row->right.get());
  }
  const Cluster* col_part(int j) const {
    return col->is_leaf() ? col : (j == 0 ? col->left.get() : col->right.get());
  }

  std::unique_ptr<HBlock> clone() const;
  std::size_t payload_bytes() const;
};

namespace hblk {

// y += alpha * B * x (tree-local coordinates: x spans B's column range,
// y spans B's row range).
void apply(const HBlock& b, const Eigen::Ref<const Eigen::MatrixXd>& x,
           Eigen::Ref<Eigen::MatrixXd> y, double alpha = 1.0);
// y += alpha * B^T * x
void apply_transposed(const HBlock& b, const Eigen::Ref<const Eigen::MatrixXd>& x,
                      Eigen::Ref<Eigen::MatrixXd> y, double alpha = 1.0);

// B * X materialized (X has B->ncols rows).
Eigen::MatrixXd multiply(const HBlock& b, const Eigen::Ref<const Eigen::MatrixXd>& x);

// Truncated join: (U V^T) <- trunc(U V^T + alpha P Q^T) with relative
// two-norm tolerance eps. Handles empty factors.
void join_truncate(Eigen::MatrixXd& U, Eigen::MatrixXd& V, const Eigen::MatrixXd& P,
                   const Eigen::MatrixXd& Q, double alpha, double eps);

// C += alpha * P * Q^T where P's rows live at absolute tree rows
// [row0, row0 + P.rows()) and Q's at [col0, col0 + Q.rows()). Low-rank
// targets accumulate the new columns and recompress at eps once the rank
// grows past a watermark (amortized); U V^T is exact in between, just
// overcomplete.
void add_low_rank(HBlock& c, const Eigen::Ref<const Eigen::MatrixXd>& p,
                  const Eigen::Ref<const Eigen::MatrixXd>& q, double alpha, int row0,
                  int col0, double eps);

// Force a pending low-rank accumulation down to its eps-truncated form.
void compress_low_rank(HBlock& c, double eps);

}  // namespace hblk

}  // namespace hmgp
