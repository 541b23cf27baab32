#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "hmgp/krige.hpp"
#include "hmgp/metrics.hpp"
#include "hmgp/simgen.hpp"
#include "test_support.hpp"

using namespace hmgp;

TEST_CASE("prediction at training locations interpolates when tau2 = 0") {
  const auto pts = random_locations(512, 6);
  MaternParams p{1.0, 0.05, 0.5, 0.0};
  const Eigen::VectorXd z = sample_grf(pts, p, 9);
  HConfig cfg;
  cfg.rank = RankControl::fixed_accuracy(1e-12);
  const PredictionResult res = predict(pts, z, pts, p, cfg);
  CHECK((res.z2_hat - z).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("empty prediction set gives an empty result") {
  const auto pts = random_locations(32, 1);
  const Eigen::VectorXd z = Eigen::VectorXd::Ones(32);
  const PredictionResult res = predict(pts, z, {}, {1.0, 0.1, 0.5, 0.0}, {});
  CHECK(res.z2_hat.size() == 0);
}

TEST_CASE("H prediction matches the dense oracle") {
  const auto all = random_locations(576, 10);
  const std::vector<Location> train(all.begin(), all.begin() + 512);
  const std::vector<Location> test(all.begin() + 512, all.end());
  MaternParams p{1.5, 0.1, 1.5, 1e-4};
  const Eigen::VectorXd z = sample_grf(all, p, 44).head(512);

  HConfig cfg;
  cfg.rank = RankControl::fixed_accuracy(1e-6);
  const Eigen::VectorXd got = predict(train, z, test, p, cfg).z2_hat;
  const Eigen::VectorXd want = oracle::dense_predict(train, z, test, p);
  CHECK((got - want).norm() / want.norm() <= 1e-4);
}

TEST_CASE("prediction error trend improves with eps") {
  const auto all = random_locations(400, 3);
  const std::vector<Location> train(all.begin(), all.begin() + 360);
  const std::vector<Location> test(all.begin() + 360, all.end());
  MaternParams p{1.0, 0.1, 0.6, 1e-6};
  const Eigen::VectorXd z = sample_grf(all, p, 8).head(360);
  const Eigen::VectorXd want = oracle::dense_predict(train, z, test, p);
  double err[3];
  const double epss[3] = {1e-2, 1e-4, 1e-6};
  for (int i = 0; i < 3; ++i) {
    HConfig cfg;
    cfg.rank = RankControl::fixed_accuracy(epss[i]);
    err[i] = (predict(train, z, test, p, cfg).z2_hat - want).norm();
  }
  CHECK(err[2] <= err[0]);
}

TEST_CASE("predict is linear in the observations") {
  const auto all = random_locations(300, 5);
  const std::vector<Location> train(all.begin(), all.begin() + 256);
  const std::vector<Location> test(all.begin() + 256, all.end());
  MaternParams p{1.0, 0.1, 1.5, 1e-2};
  std::mt19937_64 rng(7);
  Eigen::VectorXd z1(256), z2(256);
  for (int i = 0; i < 256; ++i) {
    z1(i) = standard_normal(rng);
    z2(i) = standard_normal(rng);
  }
  const double a = 1.7, b = -0.4;
  const Eigen::VectorXd mixed = predict(train, a * z1 + b * z2, test, p, {}).z2_hat;
  const Eigen::VectorXd combo =
      a * predict(train, z1, test, p, {}).z2_hat + b * predict(train, z2, test, p, {}).z2_hat;
  CHECK((mixed - combo).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("kriging variance: coincident, far away, and bounds") {
  const auto train = random_locations(256, 9);
  MaternParams p{2.0, 0.1, 1.5, 0.0};
  std::vector<Location> test{train[17], {123.0, -55.0}};
  const Eigen::VectorXd var = kriging_variance_dense(train, test, p);
  CHECK(std::abs(var(0)) <= 1e-10);              // interpolation point
  CHECK(var(1) == doctest::Approx(2.0).epsilon(1e-12));  // no information
  for (int i = 0; i < var.size(); ++i) {
    CHECK(var(i) >= 0.0);
    CHECK(var(i) <= 2.0 + 1e-12);
  }
}

TEST_CASE("kriging variance matches an explicit-inverse oracle at n = 128") {
  const auto all = random_locations(160, 13);
  const std::vector<Location> train(all.begin(), all.begin() + 128);
  const std::vector<Location> test(all.begin() + 128, all.end());
  MaternParams p{1.3, 0.12, 0.7, 0.05};
  const Eigen::VectorXd got = kriging_variance_dense(train, test, p);

  const Eigen::MatrixXd c11 = cov_dense(train, p);
  const Eigen::MatrixXd c11_inv = c11.inverse();
  const KernelEvaluator k(train, p);
  for (size_t i = 0; i < test.size(); ++i) {
    Eigen::VectorXd c(128);
    for (int j = 0; j < 128; ++j) c(j) = k.at_distance(distance(test[i], train[j]));
    const double want = (p.sigma2 + p.tau2) - c.dot(c11_inv * c);
    CHECK(got(i) == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("rmse hand values and errors") {
  Eigen::VectorXd a(2), b(2);
  a << 1, 1;
  b << 0, 0;
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(a, b) == 1.0);
  Eigen::VectorXd c(3), d(3);
  c << 1, 2, 3;
  d << 0, 0, 0;
  CHECK(rmse(c, d) == doctest::Approx(2.1602468994692869).epsilon(1e-14));
  CHECK_THROWS_AS(rmse(a, c), std::invalid_argument);
  Eigen::VectorXd e0;
  CHECK_THROWS_AS(rmse(e0, e0), std::invalid_argument);
}

TEST_CASE("rmse satisfies the triangle inequality") {
  std::mt19937_64 rng(2);
  Eigen::VectorXd a(50), b(50), c(50);
  for (int i = 0; i < 50; ++i) {
    a(i) = standard_normal(rng);
    b(i) = standard_normal(rng);
    c(i) = standard_normal(rng);
  }
  CHECK(rmse(a, c) <= rmse(a, b) + rmse(b, c) + 1e-14);
}

TEST_CASE("matching models give zero MLOE and MMOM") {
  const auto pts = random_locations(64, 20);
  MaternParams t{1.5, 0.1, 0.5, 0.0};
  MetricConfig cfg;
  cfg.M = 64;
  const MloeMmom m = mloe_mmom(pts, t, t, cfg);
  CHECK(std::abs(m.mloe) <= 1e-8);
  CHECK(std::abs(m.mmom) <= 1e-8);
}

TEST_CASE("closed forms match a Monte-Carlo oracle at n = 32") {
  const int n = 32;
  const auto pts = random_locations(n, 3);
  const MaternParams theta_t{1.5, 0.1, 0.5, 0.0};
  const MaternParams theta_a{1.0, 0.1, 0.5, 0.0};
  MetricConfig cfg;
  cfg.M = n;  // evaluate every location; no sampling ambiguity
  const MloeMmom got = mloe_mmom(pts, theta_t, theta_a, cfg);

  // Leave-one-out weights straight from dense inverses.
  const Eigen::MatrixXd c_t = cov_dense(pts, theta_t);
  const Eigen::MatrixXd c_a = cov_dense(pts, theta_a);
  const Eigen::MatrixXd ct_inv = c_t.inverse();
  const Eigen::MatrixXd ca_inv = c_a.inverse();
  Eigen::MatrixXd w_t(n, n), w_a(n, n);  // column j: weights with -1 at j
  for (int j = 0; j < n; ++j) {
    w_t.col(j) = -ct_inv.col(j) / ct_inv(j, j);
    w_a.col(j) = -ca_inv.col(j) / ca_inv(j, j);
  }

  // 1e5 replicates under each model, common random numbers.
  const int reps = 100000;
  const Eigen::MatrixXd l_t = Eigen::LLT<Eigen::MatrixXd>(c_t).matrixL();
  const Eigen::MatrixXd l_a = Eigen::LLT<Eigen::MatrixXd>(c_a).matrixL();
  std::mt19937_64 rng(999);
  Eigen::VectorXd acc_t_t = Eigen::VectorXd::Zero(n);  // E_t[(Zhat_t - Z)^2]
  Eigen::VectorXd acc_t_a = Eigen::VectorXd::Zero(n);  // E_t[(Zhat_a - Z)^2]
  Eigen::VectorXd acc_a_a = Eigen::VectorXd::Zero(n);  // E_a[(Zhat_a - Z)^2]
  Eigen::VectorXd g(n);
  for (int r = 0; r < reps; ++r) {
    for (int i = 0; i < n; ++i) g(i) = standard_normal(rng);
    const Eigen::VectorXd z_t = l_t * g;
    const Eigen::VectorXd z_a = l_a * g;
    acc_t_t += (w_t.transpose() * z_t).array().square().matrix();
    acc_t_a += (w_a.transpose() * z_t).array().square().matrix();
    acc_a_a += (w_a.transpose() * z_a).array().square().matrix();
  }
  double mloe_mc = 0.0, mmom_mc = 0.0;
  for (int j = 0; j < n; ++j) {
    mloe_mc += acc_t_a(j) / acc_t_t(j) - 1.0;
    mmom_mc += acc_a_a(j) / acc_t_a(j) - 1.0;
  }
  mloe_mc /= n;
  mmom_mc /= n;

  CHECK(std::abs(got.mloe - mloe_mc) <= 1e-3);
  CHECK(std::abs(got.mmom - mmom_mc) <= 1e-3);
}

TEST_CASE("metrics are invariant to relabeling the locations") {
  const auto pts = random_locations(64, 12);
  std::vector<Location> shuffled = pts;
  std::mt19937_64 rng(5);
  for (int i = 63; i > 0; --i)
    std::swap(shuffled[i], shuffled[rng() % static_cast<std::uint64_t>(i + 1)]);
  const MaternParams t{1.5, 0.08, 0.5, 0.0};
  const MaternParams a{0.9, 0.15, 1.0, 1e-3};
  MetricConfig cfg;
  cfg.M = 64;
  const MloeMmom m1 = mloe_mmom(pts, t, a, cfg);
  const MloeMmom m2 = mloe_mmom(shuffled, t, a, cfg);
  CHECK(m1.mloe == doctest::Approx(m2.mloe).epsilon(1e-10));
  CHECK(m1.mmom == doctest::Approx(m2.mmom).epsilon(1e-10));
}

TEST_CASE("pure variance misspecification leaves MLOE at zero, not MMOM") {
  const auto pts = random_locations(64, 30);
  const MaternParams t{1.5, 0.1, 0.5, 0.0};
  const MaternParams a{0.6, 0.1, 0.5, 0.0};  // only sigma2 differs
  MetricConfig cfg;
  cfg.M = 64;
  const MloeMmom m = mloe_mmom(pts, t, a, cfg);
  CHECK(std::abs(m.mloe) <= 1e-10);
  CHECK(std::abs(m.mmom) > 0.1);
}

TEST_CASE("MLOE is nonnegative for arbitrary misspecification") {
  const auto pts = random_locations(64, 40);
  const MaternParams t{1.5, 0.1, 1.0, 1e-4};
  MetricConfig cfg;
  cfg.M = 64;
  for (const MaternParams a : {MaternParams{2.0, 0.3, 0.5, 0.0},
                               MaternParams{0.5, 0.02, 2.5, 1e-2},
                               MaternParams{1.5, 0.1, 1.0, 0.5}}) {
    CHECK(mloe_mmom(pts, t, a, cfg).mloe >= -1e-10);
  }
}

TEST_CASE("metric guards") {
  const auto pts = random_locations(8, 1);
  MetricConfig cfg;
  cfg.M = 0;
  CHECK_THROWS_AS(mloe_mmom(pts, {1, 0.1, 0.5, 0}, {1, 0.1, 0.5, 0}, cfg),
                  std::invalid_argument);
  cfg.M = 4;
  cfg.dense_guard = 4;
  CHECK_THROWS_AS(mloe_mmom(pts, {1, 0.1, 0.5, 0}, {1, 0.1, 0.5, 0}, cfg),
                  std::invalid_argument);
}
