#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "hmgp/hmatrix.hpp"
#include "hmgp/simgen.hpp"
#include "test_support.hpp"

using namespace hmgp;

namespace {

struct Problem {
  std::vector<Location> pts;
  ClusterTree tree;
  BlockClusterTree blocks;

  Problem(int n, std::uint64_t seed, int leaf_size = 32, double eta = 2.0)
      : pts(random_locations(n, seed)),
        tree(pts, leaf_size),
        blocks(tree, tree, eta) {}
};

}  // namespace

TEST_CASE("ACA reproduces a constant block at rank 1") {
  auto entry = [](int, int) { return 3.25; };
  const auto res = detail::aca(20, 17, entry, RankControl::fixed_accuracy(1e-8));
  REQUIRE(res.U.cols() == 1);
  const Eigen::MatrixXd rec = res.U * res.V.transpose();
  CHECK((rec.array() - 3.25).abs().maxCoeff() < 1e-13);
}

TEST_CASE("ACA on a zero block terminates at rank 0") {
  auto entry = [](int, int) { return 0.0; };
  const auto res = detail::aca(8, 8, entry, RankControl::fixed_accuracy(1e-8));
  CHECK(res.U.cols() == 0);
}

TEST_CASE("assembled H-matrix matches the dense covariance at eps = 1e-6") {
  Problem prob(512, 17);
  MaternParams p{1.0, 0.2, 0.5, 0.0};
  const HMatrix h = assemble(prob.blocks, prob.pts, p, RankControl::fixed_accuracy(1e-6));
  const Eigen::MatrixXd c = cov_dense(prob.pts, p);
  const double err = (c - h.to_dense()).norm() / c.norm();
  CHECK(err <= 1e-5);
  CHECK(h.storage().bytes <= 512 * 512 * sizeof(double));
}

TEST_CASE("fixed-rank error is non-increasing in the rank") {
  Problem prob(512, 21);
  MaternParams p{1.0, 0.2, 0.5, 0.0};
  const Eigen::MatrixXd c = cov_dense(prob.pts, p);
  const HMatrix h4 = assemble(prob.blocks, prob.pts, p, RankControl::fixed_rank(4));
  const HMatrix h16 = assemble(prob.blocks, prob.pts, p, RankControl::fixed_rank(16));
  const double e4 = (c - h4.to_dense()).norm();
  const double e16 = (c - h16.to_dense()).norm();
  CHECK(e16 <= e4);
}

TEST_CASE("matvec agrees with the dense product") {
  Problem prob(512, 5);
  MaternParams p{1.3, 0.15, 1.5, 0.01};
  const HMatrix h = assemble(prob.blocks, prob.pts, p, RankControl::fixed_accuracy(1e-6));

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(512);
  CHECK(h.matvec(zero).norm() == 0.0);

  const Eigen::MatrixXd c = cov_dense(prob.pts, p);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(512);
  const Eigen::VectorXd want = c * ones;
  CHECK((h.matvec(ones) - want).norm() / want.norm() <= 1e-5);

  Eigen::VectorXd x(3);
  CHECK_THROWS_AS(h.matvec(x), std::invalid_argument);
}

TEST_CASE("single dense leaf behaves exactly") {
  Eigen::MatrixXd m(3, 3);
  m << 4, 1, 0, 1, 5, 2, 0, 2, 6;
  const HMatrix h = from_dense(m);
  CHECK(h.symmetric());
  Eigen::VectorXd x(3);
  x << 1, -2, 0.5;
  CHECK((h.matvec(x) - m * x).norm() == 0.0);
  CHECK((h.to_dense() - m).norm() == 0.0);
  CHECK(h.storage().ratio == 1.0);
}

TEST_CASE("to_dense of a 1x1 assembly returns sigma2 + tau2") {
  std::vector<Location> pts{{0.4, 0.6}};
  ClusterTree tree(pts, 32);
  BlockClusterTree blocks(tree, tree, 2.0);
  MaternParams p{1.2, 0.1, 0.5, 0.3};
  const HMatrix h = assemble(blocks, pts, p, RankControl::fixed_accuracy(1e-6));
  CHECK(h.to_dense()(0, 0) == doctest::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("full fixed rank reproduces the matrix exactly") {
  Problem prob(128, 9, 16);
  MaternParams p{2.0, 0.3, 1.5, 0.1};
  const HMatrix h = assemble(prob.blocks, prob.pts, p, RankControl::fixed_rank(128));
  const Eigen::MatrixXd c = cov_dense(prob.pts, p);
  CHECK((c - h.to_dense()).norm() / c.norm() <= 1e-12);
}

TEST_CASE("assembled matrix is exactly symmetric") {
  Problem prob(300, 33, 16);
  MaternParams p{1.0, 0.05, 0.5, 0.0};
  const HMatrix h = assemble(prob.blocks, prob.pts, p, RankControl::fixed_accuracy(1e-4));
  const Eigen::MatrixXd d = h.to_dense();
  CHECK((d - d.transpose()).norm() == 0.0);
}

TEST_CASE("per-block spectral error stays within 10x the prescribed accuracy") {
  Problem prob(512, 27);
  MaternParams p{1.0, 0.1, 0.6, 0.0};
  const double eps = 1e-5;
  const HMatrix h = assemble(prob.blocks, prob.pts, p, RankControl::fixed_accuracy(eps));
  const KernelEvaluator kernel(prob.pts, p);
  const auto& perm = prob.tree.perm();

  std::vector<const HBlock*> stack{&h.root()};
  while (!stack.empty()) {
    const HBlock* b = stack.back();
    stack.pop_back();
    if (b->kind == BlockKind::Branch) {
      for (const auto& ch : b->children)
        if (ch) stack.push_back(ch.get());
      continue;
    }
    if (b->kind != BlockKind::LowRank) continue;
    Eigen::MatrixXd exact(b->nrows(), b->ncols());
    for (int j = 0; j < b->ncols(); ++j)
      for (int i = 0; i < b->nrows(); ++i)
        exact(i, j) = kernel(perm[b->row->begin + i], perm[b->col->begin + j]);
    const Eigen::MatrixXd diff = exact - b->U * b->V.transpose();
    const double denom = oracle::spectral_norm(exact);
    if (denom > 0.0) CHECK(oracle::spectral_norm(diff) <= 10.0 * eps * denom);
  }
}

TEST_CASE("assembly commutes with relabeling the locations") {
  const auto pts = random_locations(200, 55);
  std::vector<int> shuffle(200);
  std::iota(shuffle.begin(), shuffle.end(), 0);
  std::mt19937_64 rng(3);
  for (int i = 199; i > 0; --i) std::swap(shuffle[i], shuffle[rng() % (i + 1)]);
  std::vector<Location> shuffled(200);
  for (int i = 0; i < 200; ++i) shuffled[i] = pts[shuffle[i]];

  MaternParams p{1.0, 0.2, 1.5, 0.0};
  ClusterTree t1(pts, 16), t2(shuffled, 16);
  BlockClusterTree b1(t1, t1, 2.0), b2(t2, t2, 2.0);
  const Eigen::MatrixXd d1 =
      assemble(b1, pts, p, RankControl::fixed_accuracy(1e-10)).to_dense();
  const Eigen::MatrixXd d2 =
      assemble(b2, shuffled, p, RankControl::fixed_accuracy(1e-10)).to_dense();
  for (int i = 0; i < 200; ++i)
    for (int j = 0; j < 200; ++j)
      CHECK(d2(i, j) == doctest::Approx(d1(shuffle[i], shuffle[j])).epsilon(1e-9));
}

TEST_CASE("parallel assembly matches single-threaded bit for bit") {
  Problem prob(400, 77, 16);
  MaternParams p{1.0, 0.08, 0.5, 0.0};
  const HMatrix h1 = assemble(prob.blocks, prob.pts, p, RankControl::fixed_accuracy(1e-6), 1);
  const HMatrix h2 = assemble(prob.blocks, prob.pts, p, RankControl::fixed_accuracy(1e-6), 4);
  CHECK((h1.to_dense() - h2.to_dense()).norm() == 0.0);
}

TEST_CASE("storage accounting never exceeds dense") {
  for (std::uint64_t seed : {1ull, 2ull}) {
    Problem prob(600, seed, 32);
    MaternParams p{1.0, 0.1, 0.5, 0.0};
    const HMatrix h = assemble(prob.blocks, prob.pts, p, RankControl::fixed_accuracy(1e-6));
    CHECK(h.storage().bytes <= sizeof(double) * 600 * 600);
    CHECK(h.storage().ratio <= 1.0);
  }
}
