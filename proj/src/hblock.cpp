#include "hmgp/hblock.hpp"

#include <Eigen/Dense>
#include <cassert>

#ifdef HMGP_HAVE_LAPACKE
#include <lapacke.h>
#include <mutex>

// The recompression cores are small; OpenBLAS worker threads only add
// handoff latency there. Resolved weakly so reference BLAS links too.
extern "C" void openblas_set_num_threads(int) __attribute__((weak));
#endif

namespace hmgp {

std::unique_ptr<HBlock> HBlock::clone() const {
  auto out = std::make_unique<HBlock>();
  out->kind = kind;
  out->row = row;
  out->col = col;
  out->dense = dense;
  out->U = U;
  out->V = V;
  out->children.reserve(children.size());
  for (const auto& c : children) out->children.push_back(c ? c->clone() : nullptr);
  return out;
}

std::size_t HBlock::payload_bytes() const {
  switch (kind) {
    case BlockKind::Dense:
      return sizeof(double) * dense.size();
    case BlockKind::LowRank:
      return sizeof(double) * (U.size() + V.size());
    default:
      return 0;
  }
}

namespace hblk {

// Null children are treated as structural zeros; symmetric H-matrices route
// their mirror contributions explicitly and never call apply() on pruned
// diagonal blocks.
void apply(const HBlock& b, const Eigen::Ref<const Eigen::MatrixXd>& x,
           Eigen::Ref<Eigen::MatrixXd> y, double alpha) {
  switch (b.kind) {
    case BlockKind::Dense:
      y.noalias() += alpha * (b.dense * x);
      return;
    case BlockKind::LowRank:
      if (b.rank() > 0) y.noalias() += alpha * (b.U * (b.V.transpose() * x));
      return;
    case BlockKind::Branch:
      for (int i = 0; i < b.child_rows(); ++i)
        for (int j = 0; j < b.child_cols(); ++j) {
          const HBlock* c = b.child(i, j);
          if (!c) continue;
          apply(*c, x.middleRows(c->col->begin - b.col->begin, c->ncols()),
                y.middleRows(c->row->begin - b.row->begin, c->nrows()), alpha);
        }
      return;
  }
}

void apply_transposed(const HBlock& b, const Eigen::Ref<const Eigen::MatrixXd>& x,
                      Eigen::Ref<Eigen::MatrixXd> y, double alpha) {
  switch (b.kind) {
    case BlockKind::Dense:
      y.noalias() += alpha * (b.dense.transpose() * x);
      return;
    case BlockKind::LowRank:
      if (b.rank() > 0) y.noalias() += alpha * (b.V * (b.U.transpose() * x));
      return;
    case BlockKind::Branch:
      for (int i = 0; i < b.child_rows(); ++i)
        for (int j = 0; j < b.child_cols(); ++j) {
          const HBlock* c = b.child(i, j);
          if (!c) continue;
          apply_transposed(*c, x.middleRows(c->row->begin - b.row->begin, c->nrows()),
                           y.middleRows(c->col->begin - b.col->begin, c->ncols()), alpha);
        }
      return;
  }
}

Eigen::MatrixXd multiply(const HBlock& b, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(b.nrows(), x.cols());
  apply(b, x, y, 1.0);
  return y;
}

namespace {

// Thin SVD of a small core matrix; dgesdd where available, Jacobi otherwise.
void core_svd(Eigen::MatrixXd& core, Eigen::MatrixXd& u, Eigen::VectorXd& s,
              Eigen::MatrixXd& v) {
#ifdef HMGP_HAVE_LAPACKE
  static std::once_flag blas_threads_once;
  std::call_once(blas_threads_once, [] {
    if (openblas_set_num_threads) openblas_set_num_threads(1);
  });
  const int mm = static_cast<int>(core.rows());
  const int nn = static_cast<int>(core.cols());
  const int k = std::min(mm, nn);
  if (k > 16) {
    u.resize(mm, k);
    s.resize(k);
    Eigen::MatrixXd vt(k, nn);
    const int info = LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'S', mm, nn, core.data(), mm,
                                    s.data(), u.data(), mm, vt.data(), k);
    if (info == 0) {
      v = vt.transpose();
      return;
    }
  }
#endif
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
  u = svd.matrixU();
  s = svd.singularValues();
  v = svd.matrixV();
}

}  // namespace

void join_truncate(Eigen::MatrixXd& U, Eigen::MatrixXd& V, const Eigen::MatrixXd& P,
                   const Eigen::MatrixXd& Q, double alpha, double eps) {
  const int m = static_cast<int>(U.rows());
  const int n = static_cast<int>(V.rows());
  const int r1 = static_cast<int>(U.cols());
  const int r2 = static_cast<int>(P.cols());
  const int r = r1 + r2;
  if (r == 0) return;

  Eigen::MatrixXd uj(m, r), vj(n, r);
  uj.leftCols(r1) = U;
  uj.rightCols(r2) = alpha * P;
  vj.leftCols(r1) = V;
  vj.rightCols(r2) = Q;

  const int ku = std::min(m, r);
  const int kv = std::min(n, r);
  Eigen::HouseholderQR<Eigen::MatrixXd> qru(uj), qrv(vj);
  Eigen::MatrixXd ru = qru.matrixQR().topRows(ku).triangularView<Eigen::Upper>();
  Eigen::MatrixXd rv = qrv.matrixQR().topRows(kv).triangularView<Eigen::Upper>();
  Eigen::MatrixXd core = ru * rv.transpose();
  Eigen::MatrixXd svd_u, svd_v;
  Eigen::VectorXd sv;
  core_svd(core, svd_u, sv, svd_v);
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  int keep = 0;
  while (keep < sv.size() && sv(keep) > eps * smax && sv(keep) > 0.0) ++keep;

  // Apply the Householder sequences to the kept columns only.
  Eigen::MatrixXd eu = Eigen::MatrixXd::Zero(m, keep);
  eu.topRows(ku) = svd_u.leftCols(keep) * sv.head(keep).asDiagonal();
  U = qru.householderQ() * eu;
  Eigen::MatrixXd ev = Eigen::MatrixXd::Zero(n, keep);
  ev.topRows(kv) = svd_v.leftCols(keep);
  V = qrv.householderQ() * ev;
}

void compress_low_rank(HBlock& c, double eps) {
  if (c.kind != BlockKind::LowRank) return;
  if (c.U.cols() > 0)
    join_truncate(c.U, c.V, Eigen::MatrixXd(c.nrows(), 0), Eigen::MatrixXd(c.ncols(), 0),
                  1.0, eps);
  c.compact_cols = static_cast<int>(c.U.cols());
}

void add_low_rank(HBlock& c, const Eigen::Ref<const Eigen::MatrixXd>& p,
                  const Eigen::Ref<const Eigen::MatrixXd>& q, double alpha, int row0,
                  int col0, double eps) {
  if (p.cols() == 0) return;
  const int pr = static_cast<int>(p.rows());
  const int qr = static_cast<int>(q.rows());
  switch (c.kind) {
    case BlockKind::Dense:
      c.dense.block(row0 - c.row->begin, col0 - c.col->begin, pr, qr).noalias() +=
          alpha * (p * q.transpose());
      return;
    case BlockKind::LowRank: {
      const int r0 = static_cast<int>(c.U.cols());
      const int add = static_cast<int>(p.cols());
      c.U.conservativeResize(Eigen::NoChange, r0 + add);
      c.V.conservativeResize(Eigen::NoChange, r0 + add);
      if (pr == c.nrows()) {
        c.U.rightCols(add) = alpha * p;
      } else {
        c.U.rightCols(add).setZero();
        c.U.block(row0 - c.row->begin, r0, pr, add) = alpha * p;
      }
      if (qr == c.ncols()) {
        c.V.rightCols(add) = q;
      } else {
        c.V.rightCols(add).setZero();
        c.V.block(col0 - c.col->begin, r0, qr, add) = q;
      }
      if (c.U.cols() > c.compact_cols + 16) compress_low_rank(c, eps);
      return;
    }
    case BlockKind::Branch:
      for (int i = 0; i < c.child_rows(); ++i)
        for (int j = 0; j < c.child_cols(); ++j) {
          HBlock* ch = c.child(i, j);
          if (!ch) continue;
          const int rb = std::max(row0, ch->row->begin);
          const int re = std::min(row0 + pr, ch->row->end);
          const int cb = std::max(col0, ch->col->begin);
          const int ce = std::min(col0 + qr, ch->col->end);
          if (rb >= re || cb >= ce) continue;
          add_low_rank(*ch, p.middleRows(rb - row0, re - rb),
                       q.middleRows(cb - col0, ce - cb), alpha, rb, cb, eps);
        }
      return;
  }
}

}  // namespace hblk

}  // namespace hmgp
