#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "hmgp/knn.hpp"
#include "hmgp/simgen.hpp"
#include "test_support.hpp"

using namespace hmgp;

TEST_CASE("k = 1 query on a training point returns that point") {
  const auto pts = random_locations(500, 11);
  const KdTree index(pts);
  for (int i = 0; i < 500; i += 37) {
    const auto nn = index.query(pts[i], 1);
    CHECK(nn.size() == 1);
    CHECK(nn[0] == i);
  }
}

TEST_CASE("equidistant neighbors average exactly") {
  std::vector<Location> pts{{0.1, 0.0}, {-0.1, 0.0}, {0.0, 0.1}, {0.0, -0.1}};
  Eigen::VectorXd vals(4);
  vals << 1, 2, 3, 4;
  std::vector<Location> q{{0.0, 0.0}};
  const Eigen::VectorXd pred = knn_predict(pts, vals, q, 4);
  CHECK(pred(0) == 2.5);
}

TEST_CASE("kNN predictions are bit-equal to the brute-force oracle") {
  for (std::uint64_t seed : {1ull, 2ull}) {
    const auto train = random_locations(2000, seed);
    const auto queries = random_locations(200, seed + 100);
    Eigen::VectorXd vals(2000);
    std::mt19937_64 rng(seed + 7);
    for (int i = 0; i < 2000; ++i) vals(i) = standard_normal(rng);
    for (int k : {1, 3, 7, 20}) {
      const Eigen::VectorXd got = knn_predict(train, vals, queries, k);
      for (size_t qi = 0; qi < queries.size(); ++qi) {
        const auto nn = oracle::brute_force_knn(train, queries[qi], k);
        double s = 0.0;
        for (int idx : nn) s += vals(idx);
        CHECK(got(qi) == s / k);
      }
    }
  }
}

TEST_CASE("ties at the k-th distance resolve to the smaller index") {
  std::vector<Location> pts{{0.2, 0.0}, {-0.2, 0.0}, {0.5, 0.0}};
  const KdTree index(pts);
  const auto nn = index.query({0.0, 0.0}, 1);
  CHECK(nn[0] == 0);  // indices 0 and 1 tie; smaller wins
  const auto nn2 = index.query({0.0, 0.0}, 2);
  CHECK(nn2[0] == 0);
  CHECK(nn2[1] == 1);
}

TEST_CASE("shuffling training rows leaves predictions unchanged") {
  const auto train = random_locations(800, 21);
  Eigen::VectorXd vals(800);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 800; ++i) vals(i) = standard_normal(rng);

  std::vector<int> order(800);
  std::iota(order.begin(), order.end(), 0);
  for (int i = 799; i > 0; --i)
    std::swap(order[i], order[rng() % static_cast<std::uint64_t>(i + 1)]);
  std::vector<Location> shuffled(800);
  Eigen::VectorXd shuffled_vals(800);
  for (int i = 0; i < 800; ++i) {
    shuffled[i] = train[order[i]];
    shuffled_vals(i) = vals(order[i]);
  }

  const auto queries = random_locations(64, 77);
  const Eigen::VectorXd a = knn_predict(train, vals, queries, 5);
  const Eigen::VectorXd b = knn_predict(shuffled, shuffled_vals, queries, 5);
  CHECK((a - b).norm() == 0.0);
}

TEST_CASE("k = n_train reduces to the global mean") {
  const auto train = random_locations(300, 5);
  Eigen::VectorXd vals(300);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 300; ++i) vals(i) = standard_normal(rng);
  const auto queries = random_locations(10, 6);
  const Eigen::VectorXd pred = knn_predict(train, vals, queries, 300);
  const double mean = vals.mean();
  for (int i = 0; i < 10; ++i) CHECK(pred(i) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("constant training data selects k = 1") {
  const auto train = random_locations(200, 4);
  const Eigen::VectorXd vals = Eigen::VectorXd::Constant(200, 3.25);
  std::vector<int> ks(20);
  std::iota(ks.begin(), ks.end(), 1);
  const SelectKResult res = select_k(train, vals, ks, 10, 1);
  CHECK(res.k == 1);
  for (double r : res.cv_rmse) CHECK(r == 0.0);
}

TEST_CASE("select_k prefers small k on a smooth field and improves on larger k") {
  const auto train = random_locations(1000, 15);
  MaternParams p{1.0, 0.5, 2.5, 0.0};
  const Eigen::VectorXd vals = sample_grf(train, p, 8);
  std::vector<int> ks(20);
  std::iota(ks.begin(), ks.end(), 1);
  const SelectKResult res = select_k(train, vals, ks, 25, 3);
  CHECK(res.k >= 1);
  CHECK(res.k <= 20);
  CHECK(res.cv_rmse[res.k - 1] <= res.cv_rmse.back());
}

TEST_CASE("input validation") {
  const auto train = random_locations(10, 1);
  const Eigen::VectorXd vals = Eigen::VectorXd::Ones(10);
  const auto queries = random_locations(2, 2);
  CHECK_THROWS_AS(knn_predict(train, vals, queries, 0), std::invalid_argument);
  CHECK_THROWS_AS(knn_predict(train, vals, queries, 11), std::invalid_argument);
  CHECK_THROWS_AS(knn_predict({}, {}, queries, 1), std::invalid_argument);
  const std::vector<int> ks{40};
  CHECK_THROWS_AS(select_k(train, vals, ks, 5, 1), std::invalid_argument);
}
