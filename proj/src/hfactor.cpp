#include "hmgp/hfactor.hpp"

#include <Eigen/Dense>
#include <cassert>
#include <cmath>

namespace hmgp {

namespace {

struct Ctx {
  FactorForm form;
  double eps;
  double clamp_tol;  // 1e-14 * max diagonal of the input
  Eigen::VectorXd* d;
  FactorInfo* info;
  const ClusterTree* tree;

  bool ldl() const { return form == FactorForm::Ldl; }
};

void dense_cholesky_leaf(HBlock& a, Ctx& ctx) {
  Eigen::MatrixXd& m = a.dense;
  const int nn = a.nrows();
  const int base = a.row->begin;
  for (int j = 0; j < nn; ++j) {
    double s = m(j, j);
    for (int k = 0; k < j; ++k) s -= m(j, k) * m(j, k);
    ctx.info->min_pivot = std::min(ctx.info->min_pivot, s);
    if (!(s > 0.0))
      throw FactorError("matrix not numerically SPD; increase nugget tau2",
                        ctx.tree->perm()[base + j], s);
    const double ljj = std::sqrt(s);
    m(j, j) = ljj;
    for (int i = j + 1; i < nn; ++i) {
      double v = m(i, j);
      for (int k = 0; k < j; ++k) v -= m(i, k) * m(j, k);
      m(i, j) = v / ljj;
    }
  }
  m.triangularView<Eigen::StrictlyUpper>().setZero();
}

void dense_ldl_leaf(HBlock& a, Ctx& ctx) {
  Eigen::MatrixXd& m = a.dense;
  Eigen::VectorXd& d = *ctx.d;
  const int nn = a.nrows();
  const int base = a.row->begin;
  for (int j = 0; j < nn; ++j) {
    double s = m(j, j);
    for (int k = 0; k < j; ++k) s -= m(j, k) * m(j, k) * d(base + k);
    ctx.info->min_pivot = std::min(ctx.info->min_pivot, s);
    if (s == 0.0)
      throw FactorError("matrix not numerically SPD; increase nugget tau2",
                        ctx.tree->perm()[base + j], s);
    if (s < 0.0) {
      if (-s <= ctx.clamp_tol) {
        s = ctx.clamp_tol;
        ++ctx.info->clamped;
      } else {
        ++ctx.info->negative;
      }
    }
    d(base + j) = s;
    m(j, j) = 1.0;
    for (int i = j + 1; i < nn; ++i) {
      double v = m(i, j);
      for (int k = 0; k < j; ++k) v -= m(i, k) * m(j, k) * d(base + k);
      m(i, j) = v / s;
    }
  }
  m.triangularView<Eigen::StrictlyUpper>().setZero();
}

// Forward solve L M = M on the H-structure (M spans l's range).
void solve_lower_multi(const HBlock& l, Eigen::Ref<Eigen::MatrixXd> m) {
  if (l.kind == BlockKind::Dense) {
    l.dense.triangularView<Eigen::Lower>().solveInPlace(m);
    return;
  }
  const int n1 = l.child(0, 0)->nrows();
  auto m1 = m.topRows(n1);
  auto m2 = m.bottomRows(m.rows() - n1);
  solve_lower_multi(*l.child(0, 0), m1);
  hblk::apply(*l.child(1, 0), m1, m2, -1.0);
  solve_lower_multi(*l.child(1, 1), m2);
}

// Backward solve L^T M = M.
void solve_upper_multi(const HBlock& l, Eigen::Ref<Eigen::MatrixXd> m) {
  if (l.kind == BlockKind::Dense) {
    l.dense.triangularView<Eigen::Lower>().transpose().solveInPlace(m);
    return;
  }
  const int n1 = l.child(0, 0)->nrows();
  auto m1 = m.topRows(n1);
  auto m2 = m.bottomRows(m.rows() - n1);
  solve_upper_multi(*l.child(1, 1), m2);
  hblk::apply_transposed(*l.child(1, 0), m2, m1, -1.0);
  solve_upper_multi(*l.child(0, 0), m1);
}

void sub_product(HBlock& c, const HBlock& a, const HBlock& b, Ctx& ctx);

// Dense panel against a structured factor: x <- x L^{-T} (D^{-1}). Needed for
// admissible blocks that assembly coarsened to dense storage.
void trsm_dense_block(Eigen::Ref<Eigen::MatrixXd> x, const HBlock& l, Ctx& ctx) {
  if (l.kind == BlockKind::Dense) {
    l.dense.triangularView<Eigen::Lower>().transpose().solveInPlace<Eigen::OnTheRight>(x);
    if (ctx.ldl())
      x.array().rowwise() /= ctx.d->segment(l.row->begin, l.nrows()).transpose().array();
    return;
  }
  const int n1 = l.child(0, 0)->nrows();
  auto x1 = x.leftCols(n1);
  auto x2 = x.rightCols(x.cols() - n1);
  trsm_dense_block(x1, *l.child(0, 0), ctx);
  Eigen::MatrixXd wt = x1.transpose();
  if (ctx.ldl())
    wt.array().colwise() *= ctx.d->segment(l.child(0, 0)->row->begin, n1).array();
  x2 -= hblk::multiply(*l.child(1, 0), wt).transpose();
  trsm_dense_block(x2, *l.child(1, 1), ctx);
}

struct LrPair {
  Eigen::MatrixXd p, q;  // product ~= p q^T
};

Eigen::MatrixXd scaled_v(const HBlock& blk, const Ctx& ctx) {
  Eigen::MatrixXd v = blk.V;
  if (ctx.ldl()) v.array().colwise() *= ctx.d->segment(blk.col->begin, blk.ncols()).array();
  return v;
}

// A diag(d_K) B^T as an eps-truncated low-rank pair, built bottom-up so the
// work happens at the children's scale instead of the target's.
LrPair product_low_rank(const HBlock& a, const HBlock& b, Ctx& ctx) {
  if (a.kind == BlockKind::LowRank) return {a.U, hblk::multiply(b, scaled_v(a, ctx))};
  if (b.kind == BlockKind::LowRank) return {hblk::multiply(a, scaled_v(b, ctx)), b.U};
  if (a.kind == BlockKind::Dense) {
    Eigen::MatrixXd p = a.dense;
    if (ctx.ldl())
      p.array().rowwise() *= ctx.d->segment(a.col->begin, a.ncols()).transpose().array();
    if (b.kind == BlockKind::Dense) return {std::move(p), b.dense};
    return {std::move(p), hblk::multiply(b, Eigen::MatrixXd::Identity(b.ncols(), b.ncols()))};
  }
  if (b.kind == BlockKind::Dense) {
    Eigen::MatrixXd x = b.dense.transpose();
    if (ctx.ldl()) x.array().colwise() *= ctx.d->segment(b.col->begin, b.ncols()).array();
    return {hblk::multiply(a, x), Eigen::MatrixXd::Identity(b.nrows(), b.nrows())};
  }
  // both branch: accumulate child products per (ii, jj), then embed
  const int mr = a.nrows();
  const int nr = b.nrows();
  std::vector<LrPair> parts;
  std::vector<std::pair<int, int>> offs;
  int total = 0;
  for (int ii = 0; ii < a.child_rows(); ++ii)
    for (int jj = 0; jj < b.child_rows(); ++jj) {
      const HBlock* a0 = a.child(ii, 0);
      const HBlock* b0 = b.child(jj, 0);
      LrPair acc{Eigen::MatrixXd(a0->nrows(), 0), Eigen::MatrixXd(b0->nrows(), 0)};
      for (int kk = 0; kk < a.child_cols(); ++kk) {
        const LrPair t = product_low_rank(*a.child(ii, kk), *b.child(jj, kk), ctx);
        const int r0 = static_cast<int>(acc.p.cols());
        const int add = static_cast<int>(t.p.cols());
        acc.p.conservativeResize(Eigen::NoChange, r0 + add);
        acc.q.conservativeResize(Eigen::NoChange, r0 + add);
        acc.p.rightCols(add) = t.p;
        acc.q.rightCols(add) = t.q;
        if (acc.p.cols() > 48)
          hblk::join_truncate(acc.p, acc.q, Eigen::MatrixXd(acc.p.rows(), 0),
                              Eigen::MatrixXd(acc.q.rows(), 0), 1.0, ctx.eps);
      }
      total += static_cast<int>(acc.p.cols());
      offs.emplace_back(a0->row->begin - a.row->begin, b0->row->begin - b.row->begin);
      parts.push_back(std::move(acc));
    }
  LrPair out{Eigen::MatrixXd::Zero(mr, total), Eigen::MatrixXd::Zero(nr, total)};
  int col = 0;
  for (size_t i = 0; i < parts.size(); ++i) {
    const int r = static_cast<int>(parts[i].p.cols());
    out.p.block(offs[i].first, col, parts[i].p.rows(), r) = parts[i].p;
    out.q.block(offs[i].second, col, parts[i].q.rows(), r) = parts[i].q;
    col += r;
  }
  if (total > 0)
    hblk::join_truncate(out.p, out.q, Eigen::MatrixXd(mr, 0), Eigen::MatrixXd(nr, 0), 1.0,
                        ctx.eps);
  return out;
}

// X <- X L^{-T} (and X <- X D^{-1} in LDL form), X over (s x t), L over (t x t).
void trsm_lower_t(HBlock& x, const HBlock& l, Ctx& ctx) {
  if (l.kind == BlockKind::Dense) {
    const int t0 = l.row->begin;
    const int tn = l.nrows();
    if (x.kind == BlockKind::LowRank) {
      hblk::compress_low_rank(x, ctx.eps);
      if (x.rank() > 0) {
        l.dense.triangularView<Eigen::Lower>().solveInPlace(x.V);
        if (ctx.ldl()) x.V.array().colwise() /= ctx.d->segment(t0, tn).array();
      }
    } else if (x.kind == BlockKind::Dense) {
      l.dense.triangularView<Eigen::Lower>().transpose().solveInPlace<Eigen::OnTheRight>(
          x.dense);
      if (ctx.ldl())
        x.dense.array().rowwise() /= ctx.d->segment(t0, tn).transpose().array();
    } else {
      for (int i = 0; i < x.child_rows(); ++i) trsm_lower_t(*x.child(i, 0), l, ctx);
    }
    return;
  }
  if (x.kind == BlockKind::LowRank) {
    hblk::compress_low_rank(x, ctx.eps);  // finish pending accumulation first
    if (x.rank() > 0) {
      solve_lower_multi(l, x.V);
      if (ctx.ldl())
        x.V.array().colwise() /= ctx.d->segment(l.row->begin, l.nrows()).array();
    }
    return;
  }
  if (x.kind == BlockKind::Dense) {  // coarsened admissible block
    trsm_dense_block(x.dense, l, ctx);
    return;
  }
  for (int i = 0; i < x.child_rows(); ++i) {
    trsm_lower_t(*x.child(i, 0), *l.child(0, 0), ctx);
    sub_product(*x.child(i, 1), *x.child(i, 0), *l.child(1, 0), ctx);
    trsm_lower_t(*x.child(i, 1), *l.child(1, 1), ctx);
  }
}

// C -= A diag(d_K) B^T with A over (I x K), B over (J x K); the diagonal
// scaling applies in LDL form only (d over K is already factored).
void sub_product(HBlock& c, const HBlock& a, const HBlock& b, Ctx& ctx) {
  if (a.kind == BlockKind::LowRank) {
    if (a.rank() == 0) return;
    Eigen::MatrixXd va = a.V;
    if (ctx.ldl()) va.array().colwise() *= ctx.d->segment(a.col->begin, a.ncols()).array();
    const Eigen::MatrixXd w = hblk::multiply(b, va);
    hblk::add_low_rank(c, a.U, w, -1.0, a.row->begin, b.row->begin, ctx.eps);
    return;
  }
  if (b.kind == BlockKind::LowRank) {
    if (b.rank() == 0) return;
    Eigen::MatrixXd vb = b.V;
    if (ctx.ldl()) vb.array().colwise() *= ctx.d->segment(b.col->begin, b.ncols()).array();
    const Eigen::MatrixXd w = hblk::multiply(a, vb);
    hblk::add_low_rank(c, w, b.U, -1.0, a.row->begin, b.row->begin, ctx.eps);
    return;
  }
  if (a.kind == BlockKind::Dense) {
    Eigen::MatrixXd p = a.dense;
    if (ctx.ldl())
      p.array().rowwise() *= ctx.d->segment(a.col->begin, a.ncols()).transpose().array();
    const Eigen::MatrixXd q =
        hblk::multiply(b, Eigen::MatrixXd::Identity(b.ncols(), b.ncols()));
    hblk::add_low_rank(c, p, q, -1.0, a.row->begin, b.row->begin, ctx.eps);
    return;
  }
  if (b.kind == BlockKind::Dense) {
    Eigen::MatrixXd x = b.dense.transpose();
    if (ctx.ldl()) x.array().colwise() *= ctx.d->segment(b.col->begin, b.ncols()).array();
    const Eigen::MatrixXd w = hblk::multiply(a, x);
    hblk::add_low_rank(c, w, Eigen::MatrixXd::Identity(b.nrows(), b.nrows()), -1.0,
                       a.row->begin, b.row->begin, ctx.eps);
    return;
  }
  // Both operands branch; their K grids are aligned by construction.
  if (c.kind == BlockKind::Branch) {
    for (int kk = 0; kk < a.child_cols(); ++kk)
      for (int ii = 0; ii < a.child_rows(); ++ii)
        for (int jj = 0; jj < b.child_rows(); ++jj) {
          HBlock* target = c.child(ii, jj);
          if (!target) continue;  // implied upper mirror
          sub_product(*target, *a.child(ii, kk), *b.child(jj, kk), ctx);
        }
    return;
  }
  // Leaf target: build the whole product at the operands' scale, add once.
  const LrPair pr = product_low_rank(a, b, ctx);
  if (pr.p.cols() > 0)
    hblk::add_low_rank(c, pr.p, pr.q, -1.0, a.row->begin, b.row->begin, ctx.eps);
}

void factor_diag(HBlock& a, Ctx& ctx) {
  if (a.kind == BlockKind::Dense) {
    if (ctx.ldl())
      dense_ldl_leaf(a, ctx);
    else
      dense_cholesky_leaf(a, ctx);
    return;
  }
  assert(a.kind == BlockKind::Branch && a.row == a.col);
  factor_diag(*a.child(0, 0), ctx);
  trsm_lower_t(*a.child(1, 0), *a.child(0, 0), ctx);
  sub_product(*a.child(1, 1), *a.child(1, 0), *a.child(1, 0), ctx);
  factor_diag(*a.child(1, 1), ctx);
}

void collect_diag(const HBlock& b, Eigen::VectorXd& d) {
  if (b.kind == BlockKind::Dense) {
    if (b.row == b.col) d.segment(b.row->begin, b.nrows()) = b.dense.diagonal();
    return;
  }
  if (b.kind != BlockKind::Branch) return;
  for (const auto& c : b.children)
    if (c && c->row == c->col) collect_diag(*c, d);
}

void collect_leaves(const HBlock& b, std::vector<const HBlock*>& out) {
  if (b.kind != BlockKind::Branch) {
    out.push_back(&b);
    return;
  }
  for (const auto& c : b.children)
    if (c) collect_leaves(*c, out);
}

void compress_all(HBlock& b, double eps) {
  if (b.kind == BlockKind::LowRank) {
    hblk::compress_low_rank(b, eps);
    return;
  }
  for (auto& c : b.children)
    if (c) compress_all(*c, eps);
}

}  // namespace

HFactor factorize(const HMatrix& h, double eps_f, FactorForm form) {
  if (!h.symmetric())
    throw std::invalid_argument("factorize: requires a symmetric H-matrix");
  if (!(eps_f > 0.0)) throw std::invalid_argument("factorize: eps_f must be positive");

  HFactor f;
  f.root_ = h.root().clone();
  f.tree_ = &h.row_tree();
  f.owned_tree_ = h.owned_tree_;
  f.form_ = form;
  f.info_.eps = eps_f;

  Eigen::VectorXd d;
  if (form == FactorForm::Ldl) d.resize(h.rows());

  Ctx ctx{form,
          eps_f,
          1e-14 * h.max_diagonal(),
          form == FactorForm::Ldl ? &d : nullptr,
          &f.info_,
          f.tree_};
  factor_diag(*f.root_, ctx);
  compress_all(*f.root_, eps_f);

  if (form == FactorForm::Ldl) {
    f.diag_ = std::move(d);
  } else {
    f.diag_.resize(h.rows());
    collect_diag(*f.root_, f.diag_);
  }
  return f;
}

Eigen::VectorXd HFactor::solve_lower(const Eigen::VectorXd& b) const {
  if (b.size() != size()) throw std::invalid_argument("solve_lower: dimension mismatch");
  const std::vector<int>& perm = tree_->perm();
  Eigen::MatrixXd vt(size(), 1);
  for (int k = 0; k < size(); ++k) vt(k, 0) = b(perm[k]);
  solve_lower_multi(*root_, vt);
  Eigen::VectorXd v(size());
  for (int k = 0; k < size(); ++k) v(perm[k]) = vt(k, 0);
  return v;
}

Eigen::VectorXd HFactor::solve_factored(const Eigen::VectorXd& b) const {
  if (b.size() != size()) throw std::invalid_argument("solve_factored: dimension mismatch");
  const std::vector<int>& perm = tree_->perm();
  Eigen::MatrixXd vt(size(), 1);
  for (int k = 0; k < size(); ++k) vt(k, 0) = b(perm[k]);
  solve_lower_multi(*root_, vt);
  if (form_ == FactorForm::Ldl) vt.col(0).array() /= diag_.array();
  solve_upper_multi(*root_, vt);
  Eigen::VectorXd x(size());
  for (int k = 0; k < size(); ++k) x(perm[k]) = vt(k, 0);
  return x;
}

double HFactor::quad_form(const Eigen::VectorXd& b) const {
  if (b.size() != size()) throw std::invalid_argument("quad_form: dimension mismatch");
  const std::vector<int>& perm = tree_->perm();
  Eigen::MatrixXd vt(size(), 1);
  for (int k = 0; k < size(); ++k) vt(k, 0) = b(perm[k]);
  solve_lower_multi(*root_, vt);
  if (form_ == FactorForm::Cholesky) return vt.col(0).squaredNorm();
  return (vt.col(0).array().square() / diag_.array()).sum();
}

double HFactor::log_det() const {
  if (form_ == FactorForm::Cholesky) return 2.0 * diag_.array().log().sum();
  if ((diag_.array() <= 0.0).any()) throw std::domain_error("indefinite factor");
  return diag_.array().log().sum();
}

Eigen::VectorXd HFactor::diagonal() const {
  const std::vector<int>& perm = tree_->perm();
  Eigen::VectorXd out(size());
  for (int k = 0; k < size(); ++k) out(perm[k]) = diag_(k);
  return out;
}

std::size_t HFactor::storage_bytes() const {
  std::vector<const HBlock*> leaves;
  collect_leaves(*root_, leaves);
  std::size_t bytes = 0;
  for (const HBlock* l : leaves) bytes += l->payload_bytes();
  if (form_ == FactorForm::Ldl) bytes += sizeof(double) * diag_.size();
  return bytes;
}

Eigen::MatrixXd HFactor::lower_dense() const {
  if (size() > 4096) throw std::invalid_argument("lower_dense: refused beyond n = 4096");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(size(), size());
  std::vector<const HBlock*> leaves;
  collect_leaves(*root_, leaves);
  for (const HBlock* l : leaves) {
    Eigen::MatrixXd block;
    if (l->kind == BlockKind::Dense)
      block = l->dense;
    else
      block = l->U * l->V.transpose();
    out.block(l->row->begin, l->col->begin, l->nrows(), l->ncols()) = block;
  }
  return out;
}

Eigen::MatrixXd HFactor::reconstruct() const {
  const Eigen::MatrixXd ld = lower_dense();
  Eigen::MatrixXd mt;
  if (form_ == FactorForm::Ldl)
    mt = ld * diag_.asDiagonal() * ld.transpose();
  else
    mt = ld * ld.transpose();
  const std::vector<int>& perm = tree_->perm();
  Eigen::MatrixXd out(size(), size());
  for (int j = 0; j < size(); ++j)
    for (int i = 0; i < size(); ++i) out(perm[i], perm[j]) = mt(i, j);
  return out;
}

}  // namespace hmgp
