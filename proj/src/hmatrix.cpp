#include "hmgp/hmatrix.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace hmgp {

namespace detail {

AcaResult aca(int m, int n, const std::function<double(int, int)>& entry,
              const RankControl& rc) {
  int max_terms = std::min({m, n, rc.max_rank});
  if (rc.mode == RankControl::Mode::FixedRank) max_terms = std::min(max_terms, rc.rank);

  std::vector<char> row_used(m, 0), col_used(n, 0);
  std::vector<Eigen::VectorXd> us, vs;
  double fro2 = 0.0;      // running ||U V^T||_F^2
  double scale0 = 0.0;    // magnitude of the first pivot, sets the zero threshold
  int i_piv = 0;
  int next_fresh_row = 1;

  Eigen::VectorXd r(n), u(m);
  while (static_cast<int>(us.size()) < max_terms) {
    for (int j = 0; j < n; ++j) r(j) = entry(i_piv, j);
    for (size_t k = 0; k < us.size(); ++k) r.noalias() -= us[k](i_piv) * vs[k];

    int j_piv = -1;
    double best = -1.0;
    for (int j = 0; j < n; ++j) {
      if (col_used[j]) continue;
      const double a = std::abs(r(j));
      if (a > best) {
        best = a;
        j_piv = j;
      }
    }
    if (j_piv < 0) break;

    if (best <= 1e-15 * scale0 || best == 0.0) {
      // Residual row numerically zero: retire it and probe the next one.
      row_used[i_piv] = 1;
      int next = -1;
      while (next_fresh_row < m) {
        if (!row_used[next_fresh_row]) {
          next = next_fresh_row;
          break;
        }
        ++next_fresh_row;
      }
      if (next < 0) break;
      i_piv = next;
      continue;
    }
    if (scale0 == 0.0) scale0 = best;

    const double piv = r(j_piv);
    Eigen::VectorXd v = r / piv;
    for (int i = 0; i < m; ++i) u(i) = entry(i, j_piv);
    for (size_t k = 0; k < us.size(); ++k) u.noalias() -= vs[k](j_piv) * us[k];

    row_used[i_piv] = 1;
    col_used[j_piv] = 1;

    const double u2 = u.squaredNorm();
    const double v2 = v.squaredNorm();
    double cross = 0.0;
    for (size_t k = 0; k < us.size(); ++k) cross += us[k].dot(u) * vs[k].dot(v);
    fro2 += 2.0 * cross + u2 * v2;

    us.push_back(u);
    vs.push_back(v);

    if (rc.mode == RankControl::Mode::FixedAccuracy && u2 * v2 <= rc.eps * rc.eps * fro2)
      break;

    int i_next = -1;
    best = -1.0;
    for (int i = 0; i < m; ++i) {
      if (row_used[i]) continue;
      const double a = std::abs(u(i));
      if (a > best) {
        best = a;
        i_next = i;
      }
    }
    if (i_next < 0) break;
    i_piv = i_next;
  }

  AcaResult out;
  const int rank = static_cast<int>(us.size());
  out.U.resize(m, rank);
  out.V.resize(n, rank);
  for (int k = 0; k < rank; ++k) {
    out.U.col(k) = us[k];
    out.V.col(k) = vs[k];
  }
  return out;
}

}  // namespace detail

namespace {

std::unique_ptr<HBlock> build_payload_tree(const BlockClusterTree::Node& node,
                                           bool symmetric, std::vector<HBlock*>& leaves) {
  auto b = std::make_unique<HBlock>();
  b->row = node.row;
  b->col = node.col;
  switch (node.tag) {
    case BlockClusterTree::Node::Tag::Dense:
      b->kind = BlockKind::Dense;
      leaves.push_back(b.get());
      break;
    case BlockClusterTree::Node::Tag::Admissible:
      b->kind = BlockKind::LowRank;
      b->U.resize(b->nrows(), 0);
      b->V.resize(b->ncols(), 0);
      leaves.push_back(b.get());
      break;
    case BlockClusterTree::Node::Tag::Split: {
      b->kind = BlockKind::Branch;
      const int nr = b->child_rows();
      const int nc = b->child_cols();
      b->children.resize(static_cast<size_t>(nr) * nc);
      for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nc; ++j) {
          if (symmetric && node.row == node.col && j > i) continue;  // mirror implied
          b->children[i * nc + j] =
              build_payload_tree(*node.children[i * nc + j], symmetric, leaves);
        }
      break;
    }
  }
  return b;
}

void fill_leaf(HBlock& leaf, const KernelEvaluator& kernel, const std::vector<int>& rperm,
               const std::vector<int>& cperm, const RankControl& rc) {
  const int m = leaf.nrows();
  const int n = leaf.ncols();
  const int r0 = leaf.row->begin;
  const int c0 = leaf.col->begin;
  if (leaf.kind == BlockKind::Dense) {
    leaf.dense.resize(m, n);
    for (int j = 0; j < n; ++j) {
      const int cj = cperm[c0 + j];
      for (int i = 0; i < m; ++i) leaf.dense(i, j) = kernel(rperm[r0 + i], cj);
    }
    return;
  }
  auto entry = [&](int i, int j) { return kernel(rperm[r0 + i], cperm[c0 + j]); };
  detail::AcaResult res = detail::aca(m, n, entry, rc);
  leaf.U = std::move(res.U);
  leaf.V = std::move(res.V);
  if (rc.mode == RankControl::Mode::FixedAccuracy && leaf.rank() > 16)
    hblk::join_truncate(leaf.U, leaf.V, Eigen::MatrixXd(m, 0), Eigen::MatrixXd(n, 0), 1.0,
                        rc.eps);
  leaf.compact_cols = leaf.rank();
  // A low-rank form that stores more than the dense block is pointless.
  if (static_cast<long>(m + n) * leaf.rank() >= static_cast<long>(m) * n) {
    leaf.dense.noalias() = leaf.U * leaf.V.transpose();
    leaf.kind = BlockKind::Dense;
    leaf.U.resize(0, 0);
    leaf.V.resize(0, 0);
  }
}

}  // namespace

HMatrix assemble(const BlockClusterTree& block_tree, std::span<const Location> locations,
                 const MaternParams& params, const RankControl& rc, int threads) {
  params.validate();
  if (rc.mode == RankControl::Mode::FixedAccuracy && !(rc.eps > 0.0))
    throw std::invalid_argument("assemble: eps must be positive");
  if (rc.mode == RankControl::Mode::FixedRank && rc.rank < 1)
    throw std::invalid_argument("assemble: fixed rank must be >= 1");

  HMatrix h;
  h.rows_ = &block_tree.rows();
  h.cols_ = &block_tree.cols();
  h.rc_ = rc;
  h.symmetric_ = block_tree.square_symmetric();
  h.root_ = build_payload_tree(block_tree.root(), h.symmetric_, h.leaves_);

  const KernelEvaluator kernel(locations, params);
  const std::vector<int>& rperm = h.rows_->perm();
  const std::vector<int>& cperm = h.cols_->perm();

  int nthreads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  nthreads = std::max(1, std::min<int>(nthreads, static_cast<int>(h.leaves_.size())));
  if (nthreads == 1) {
    for (HBlock* leaf : h.leaves_) fill_leaf(*leaf, kernel, rperm, cperm, rc);
    return h;
  }

  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    try {
      while (true) {
        const size_t idx = next.fetch_add(1);
        if (idx >= h.leaves_.size()) return;
        fill_leaf(*h.leaves_[idx], kernel, rperm, cperm, rc);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return h;
}

HMatrix from_dense(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw std::invalid_argument("from_dense: need a nonempty square matrix");
  const int n = static_cast<int>(m.rows());
  std::vector<Location> line(n);
  for (int i = 0; i < n; ++i) line[i] = {static_cast<double>(i) / n, 0.0};
  HMatrix h;
  h.owned_tree_ = std::make_shared<ClusterTree>(line, n);
  h.rows_ = h.owned_tree_.get();
  h.cols_ = h.owned_tree_.get();
  h.symmetric_ = m.isApprox(m.transpose());
  auto root = std::make_unique<HBlock>();
  root->kind = BlockKind::Dense;
  root->row = &h.owned_tree_->root();
  root->col = root->row;
  root->dense = m;
  h.leaves_.push_back(root.get());
  h.root_ = std::move(root);
  return h;
}

Eigen::VectorXd HMatrix::matvec(const Eigen::VectorXd& x) const {
  if (x.size() != cols()) throw std::invalid_argument("matvec: dimension mismatch");
  const std::vector<int>& rperm = rows_->perm();
  const std::vector<int>& cperm = cols_->perm();
  Eigen::VectorXd xt(cols());
  for (int k = 0; k < cols(); ++k) xt(k) = x(cperm[k]);
  Eigen::VectorXd yt = Eigen::VectorXd::Zero(rows());
  for (const HBlock* leaf : leaves_) {
    const auto xseg = xt.segment(leaf->col->begin, leaf->ncols());
    auto yseg = yt.segment(leaf->row->begin, leaf->nrows());
    if (leaf->kind == BlockKind::Dense) {
      yseg.noalias() += leaf->dense * xseg;
    } else if (leaf->rank() > 0) {
      yseg.noalias() += leaf->U * (leaf->V.transpose() * xseg);
    }
    if (symmetric_ && leaf->row != leaf->col) {
      const auto xr = xt.segment(leaf->row->begin, leaf->nrows());
      auto yc = yt.segment(leaf->col->begin, leaf->ncols());
      if (leaf->kind == BlockKind::Dense) {
        yc.noalias() += leaf->dense.transpose() * xr;
      } else if (leaf->rank() > 0) {
        yc.noalias() += leaf->V * (leaf->U.transpose() * xr);
      }
    }
  }
  Eigen::VectorXd y(rows());
  for (int k = 0; k < rows(); ++k) y(rperm[k]) = yt(k);
  return y;
}

Eigen::MatrixXd HMatrix::to_dense() const {
  if (rows() > 4096 || cols() > 4096)
    throw std::invalid_argument("to_dense: refused beyond n = 4096");
  const std::vector<int>& rperm = rows_->perm();
  const std::vector<int>& cperm = cols_->perm();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows(), cols());
  for (const HBlock* leaf : leaves_) {
    Eigen::MatrixXd block;
    if (leaf->kind == BlockKind::Dense)
      block = leaf->dense;
    else
      block = leaf->U * leaf->V.transpose();
    for (int j = 0; j < leaf->ncols(); ++j) {
      const int cj = cperm[leaf->col->begin + j];
      for (int i = 0; i < leaf->nrows(); ++i) {
        const int ri = rperm[leaf->row->begin + i];
        out(ri, cj) = block(i, j);
        if (symmetric_ && leaf->row != leaf->col) out(cj, ri) = block(i, j);
      }
    }
  }
  return out;
}

HMatrix::Storage HMatrix::storage() const {
  Storage s;
  for (const HBlock* leaf : leaves_) s.bytes += leaf->payload_bytes();
  s.ratio = static_cast<double>(s.bytes) /
            (static_cast<double>(rows()) * static_cast<double>(cols()) * sizeof(double));
  return s;
}

double HMatrix::max_diagonal() const {
  double m = 0.0;
  for (const HBlock* leaf : leaves_) {
    if (leaf->row != leaf->col || leaf->kind != BlockKind::Dense) continue;
    m = std::max(m, leaf->dense.diagonal().maxCoeff());
  }
  return m;
}

int HMatrix::max_leaf_rank() const {
  int r = 0;
  for (const HBlock* leaf : leaves_)
    if (leaf->kind == BlockKind::LowRank) r = std::max(r, leaf->rank());
  return r;
}

}  // namespace hmgp
