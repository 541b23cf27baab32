// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include "hmgp/dataset.hpp"
#include "hmgp/knn.hpp"
#include "hmgp/krige.hpp"
#include "hmgp/loglik.hpp"
#include "hmgp/metrics.hpp"
#include "hmgp/mle.hpp"
#include "hmgp/simgen.hpp"
#include "test_support.hpp"

using namespace hmgp;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

double fit_exponent(const std::vector<double>& ns, const std::vector<double>& ys) {
  const int n = static_cast<int>(ns.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double x = std::log(ns[i]);
    const double y = std::log(ys[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double matern_closed(double t, double s2, double nu) {
  if (nu == 0.5) return s2 * std::exp(-t);
  if (nu == 1.5) return s2 * (1.0 + t) * std::exp(-t);
  return s2 * (1.0 + t + t * t / 3.0) * std::exp(-t);  // nu = 2.5
}

// 1. Generic-Bessel Matern against the half-integer closed forms.
Outcome criterion_matern() {
  double worst = 0.0;
  for (double nu : {0.5, 1.5, 2.5}) {
    MaternParams p{1.7, 1.0, nu, 0.0};
    for (int i = 0; i <= 10000; ++i) {
      const double t = 1e-6 * std::pow(50.0 / 1e-6, i / 10000.0);
      const double want = matern_closed(t, p.sigma2, nu);
      const double got = detail::matern_generic(t, p);
      worst = std::max(worst, std::abs(got - want) / want);
    }
  }
  return {worst <= 1e-12, fmt("max rel err %.3e (tol 1e-12, 3x10^4 points)", worst)};
}

// 2. H-assembly accuracy against the dense covariance at n = 2048.
Outcome criterion_assembly() {
  const auto pts = random_locations(2048, 7);
  double worst = 0.0;
  std::string detail;
  for (double ell : {0.03, 0.2})
    for (double nu : {0.6, 1.5}) {
      MaternParams p{1.5, ell, nu, 0.0};
      ClusterTree tree(pts, 32);
      BlockClusterTree blocks(tree, tree, 2.0);
      const HMatrix h = assemble(blocks, pts, p, RankControl::fixed_accuracy(1e-6), 2);
      const Eigen::MatrixXd c = cov_dense(pts, p);
      const double err = (c - h.to_dense()).norm() / c.norm();
      worst = std::max(worst, err);
      detail += fmt("(ell=%.2f,nu=%.1f: %.2e) ", ell, nu, err);
    }
  return {worst <= 1e-5, detail + "tol 1e-5"};
}

// 3. Log-determinant through the factorization, free of extra work.
Outcome criterion_logdet() {
  const auto pts = random_locations(2048, 11);
  MaternParams p{1.5, 0.1, 1.0, 1e-4};
  HConfig cfg;
  cfg.rank = RankControl::fixed_accuracy(1e-6);
  cfg.threads = 2;
  const AssembledCov cov = assemble_covariance(pts, p, cfg);
  const Eigen::MatrixXd c = cov_dense(pts, p);
  const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(c).matrixL();
  const double want = 2.0 * l.diagonal().array().log().sum();
  double worst = 0.0;
  for (FactorForm form : {FactorForm::Ldl, FactorForm::Cholesky}) {
    const double got = factorize(cov.matrix, 1e-6, form).log_det();
    worst = std::max(worst, std::abs(got - want) / std::abs(want));
  }
  return {worst <= 1e-4, fmt("max rel err %.3e over LDL+Cholesky (tol 1e-4)", worst)};
}

// 4. Full log-likelihood vs the dense formula over random parameter draws.
Outcome criterion_loglik() {
  const auto pts = random_locations(1024, 3);
  const Eigen::VectorXd z = sample_grf(pts, {1.5, 0.1, 1.0, 1e-3}, 17);
  std::mt19937_64 rng(23);
  double worst = 0.0;
  for (int draw = 0; draw < 5; ++draw) {
    MaternParams p;
    p.sigma2 = 0.5 + 2.0 * uniform01(rng);
    p.ell = 0.03 + 0.27 * uniform01(rng);
    p.nu = 0.5 + 2.0 * uniform01(rng);
    p.tau2 = 1e-4 + 1e-2 * uniform01(rng);
    HConfig cfg;
    cfg.rank = RankControl::fixed_accuracy(1e-6);
    cfg.threads = 2;
    const double got = evaluate_loglik(pts, z, p, cfg).loglik;
    const double want = oracle::dense_loglik(pts, z, p);
    worst = std::max(worst, std::abs(got - want) / std::abs(want));
  }
  return {worst <= 1e-4, fmt("max rel err %.3e over 5 draws (tol 1e-4)", worst)};
}

// 5. Quasi-linear time and memory growth of assemble + factor.
Outcome criterion_scaling() {
  std::vector<double> ns, times, mems;
  MaternParams p{1.5, 0.0632, 1.5, 1e-2};
  for (int n : {1024, 2048, 4096, 8192}) {
    const auto pts = random_locations(n, 1);
    HConfig cfg;
    cfg.rank = RankControl::fixed_accuracy(1e-4);
    cfg.threads = 2;
    const double t0 = now_s();
    const AssembledCov cov = assemble_covariance(pts, p, cfg);
    const HFactor f = factorize(cov.matrix, 1e-4, FactorForm::Ldl);
    const double elapsed = now_s() - t0;
    ns.push_back(n);
    times.push_back(elapsed);
    mems.push_back(static_cast<double>(cov.matrix.storage().bytes));
    (void)f;
  }
  const double te = fit_exponent(ns, times);
  const double me = fit_exponent(ns, mems);
  return {te < 1.6 && me < 1.35,
          fmt("time exponent %.3f (tol 1.6), memory exponent %.3f (tol 1.35)", te, me)};
}

// 6. Full maximum-likelihood fit on a synthetic truth.
Outcome criterion_mle() {
  const auto pts = random_locations(2048, 5);
  const MaternParams truth{1.5, 0.0632, 1.5, 0.0};
  const Eigen::VectorXd z = sample_grf(pts, truth, 29);

  OptimizerConfig cfg;
  cfg.h.rank = RankControl::fixed_accuracy(1e-6);
  cfg.h.threads = 2;
  const FitReport rep = fit(pts, z, cfg);

  const double at_truth = evaluate_loglik(pts, z, truth, cfg.h).loglik;
  bool ascent = true;
  double prev = -std::numeric_limits<double>::infinity();
  for (const FitTraceEntry& t : rep.trace) {
    ascent = ascent && t.loglik >= prev;
    prev = t.loglik;
  }
  const double s2_rel = std::abs(rep.theta_hat.sigma2 - truth.sigma2) / truth.sigma2;
  const double ell_rel = std::abs(rep.theta_hat.ell - truth.ell) / truth.ell;
  const bool pass = rep.loglik_at_opt >= at_truth - 1e-3 && rep.iterations <= 400 &&
                    ascent && s2_rel <= 0.5 && ell_rel <= 0.5;
  return {pass,
          fmt("L(hat)-L(true)=%.4g (>= -1e-3), iters=%d (<=400), ascent=%d, "
              "sigma2 rel=%.2f, ell rel=%.2f (<=0.5); sigma2=%.3f ell=%.4f nu=%.2f tau2=%.2e",
              rep.loglik_at_opt - at_truth, rep.iterations, ascent ? 1 : 0, s2_rel, ell_rel,
              rep.theta_hat.sigma2, rep.theta_hat.ell, rep.theta_hat.nu,
              rep.theta_hat.tau2)};
}

// 7. Kriging against the dense oracle plus the interpolation property.
Outcome criterion_kriging() {
  const auto all = random_locations(1152, 13);
  const std::vector<Location> train(all.begin(), all.begin() + 1024);
  const std::vector<Location> test(all.begin() + 1024, all.end());
  MaternParams p{1.5, 0.1, 1.0, 1e-4};
  const Eigen::VectorXd z = sample_grf(all, p, 31).head(1024);

  HConfig cfg;
  cfg.rank = RankControl::fixed_accuracy(1e-6);
  cfg.threads = 2;
  const Eigen::VectorXd got = predict(train, z, test, p, cfg).z2_hat;
  const Eigen::VectorXd want = oracle::dense_predict(train, z, test, p);
  const double rel = (got - want).norm() / want.norm();

  MaternParams p0{1.0, 0.05, 0.5, 0.0};
  const Eigen::VectorXd z0 = sample_grf(train, p0, 37);
  HConfig tight;
  tight.rank = RankControl::fixed_accuracy(1e-12);
  tight.threads = 2;
  const Eigen::VectorXd back = predict(train, z0, train, p0, tight).z2_hat;
  const double interp = (back - z0).cwiseAbs().maxCoeff();

  return {rel <= 1e-4 && interp <= 1e-8,
          fmt("H-vs-dense rel %.3e (tol 1e-4), interpolation max err %.3e (tol 1e-8)", rel,
              interp)};
}

// 8. MLOE/MMOM closed forms: trivial case, Monte-Carlo oracle, RMSE hand cases.
Outcome criterion_metrics() {
  const auto pts = random_locations(64, 21);
  const MaternParams theta_t{1.5, 0.1, 0.5, 0.0};
  MetricConfig cfg;
  cfg.M = 64;
  const MloeMmom trivial = mloe_mmom(pts, theta_t, theta_t, cfg);

  const MaternParams theta_a{0.8, 0.14, 0.5, 0.0};
  const MloeMmom got = mloe_mmom(pts, theta_t, theta_a, cfg);

  const int n = 64;
  const Eigen::MatrixXd c_t = cov_dense(pts, theta_t);
  const Eigen::MatrixXd c_a = cov_dense(pts, theta_a);
  const Eigen::MatrixXd ct_inv = c_t.inverse();
  const Eigen::MatrixXd ca_inv = c_a.inverse();
  Eigen::MatrixXd w_a(n, n);
  for (int j = 0; j < n; ++j) w_a.col(j) = -ca_inv.col(j) / ca_inv(j, j);
  const Eigen::MatrixXd l_t = Eigen::LLT<Eigen::MatrixXd>(c_t).matrixL();
  const Eigen::MatrixXd l_a = Eigen::LLT<Eigen::MatrixXd>(c_a).matrixL();
  std::mt19937_64 rng(77);
  Eigen::VectorXd acc_t_a = Eigen::VectorXd::Zero(n), acc_a_a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g(n);
  const int reps = 100000;
  for (int r = 0; r < reps; ++r) {
    for (int i = 0; i < n; ++i) g(i) = standard_normal(rng);
    acc_t_a += (w_a.transpose() * (l_t * g)).array().square().matrix();
    acc_a_a += (w_a.transpose() * (l_a * g)).array().square().matrix();
  }
  double mmom_mc = 0.0;
  for (int j = 0; j < n; ++j) mmom_mc += acc_a_a(j) / acc_t_a(j) - 1.0;
  mmom_mc /= n;

  Eigen::VectorXd h3(3), z3(3);
  h3 << 1, 2, 3;
  z3 << 0, 0, 0;
  const bool rmse_ok = rmse(h3, h3) == 0.0 &&
                       std::abs(rmse(h3, z3) - std::sqrt(14.0 / 3.0)) < 1e-14;

  const bool pass = std::abs(trivial.mloe) <= 1e-8 && std::abs(trivial.mmom) <= 1e-8 &&
                    std::abs(got.mmom - mmom_mc) <= 1e-3 && rmse_ok;
  return {pass, fmt("trivial (%.1e, %.1e) <= 1e-8; mmom %.5f vs MC %.5f (tol 1e-3); "
                    "rmse hand cases %s",
                    trivial.mloe, trivial.mmom, got.mmom, mmom_mc,
                    rmse_ok ? "exact" : "WRONG")};
}

// 9. kNN exactness and cross-validated k.
Outcome criterion_knn() {
  bool exact = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto train = random_locations(2000, seed);
    const auto queries = random_locations(200, seed + 50);
    Eigen::VectorXd vals(2000);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 2000; ++i) vals(i) = standard_normal(rng);
    const int k = 1 + static_cast<int>(seed * 3 % 20);
    const Eigen::VectorXd got = knn_predict(train, vals, queries, k);
    for (size_t q = 0; q < queries.size() && exact; ++q) {
      const auto nn = oracle::brute_force_knn(train, queries[q], k);
      double s = 0.0;
      for (int idx : nn) s += vals(idx);
      exact = exact && got(q) == s / k;
    }
  }

  const auto train = random_locations(1500, 9);
  const Eigen::VectorXd vals = sample_grf(train, {1.0, 0.5, 2.5, 0.0}, 10);
  std::vector<int> ks(20);
  std::iota(ks.begin(), ks.end(), 1);
  const SelectKResult sel = select_k(train, vals, ks, 100, 4);
  const Eigen::VectorXd mean_pred = Eigen::VectorXd::Constant(1500, vals.mean());
  const double mean_rmse = rmse(mean_pred, vals);
  const double cv_best = sel.cv_rmse[std::distance(
      sel.candidates.begin(),
      std::find(sel.candidates.begin(), sel.candidates.end(), sel.k))];
  const bool pass = exact && sel.k >= 1 && sel.k <= 20 && cv_best < 0.9 * mean_rmse;
  return {pass, fmt("bit-exact on 5 instances: %d; k*=%d, cv %.4f < 0.9 x mean-pred %.4f",
                    exact ? 1 : 0, sel.k, cv_best, 0.9 * mean_rmse)};
}

// 10. Tukey g-and-h transform behavior.
Outcome criterion_tukey() {
  bool zero_ok = true;
  for (double g : {-1.0, 0.0, 0.5})
    for (double h : {0.0, 0.5}) {
      const Eigen::VectorXd t = tukey_gh(Eigen::VectorXd::Zero(3), {2.5, 1.5, g, h});
      for (int i = 0; i < 3; ++i) zero_ok = zero_ok && t(i) == 2.5;
    }

  double cont = 0.0;
  Eigen::VectorXd zg(101);
  for (int i = 0; i <= 100; ++i) zg(i) = -5.0 + 0.1 * i;
  for (double h : {0.0, 0.2, 0.5}) {
    const Eigen::VectorXd a = tukey_gh(zg, {0.0, 1.0, 1e-12, h});
    const Eigen::VectorXd b = tukey_gh(zg, {0.0, 1.0, 0.0, h});
    cont = std::max(cont, (a - b).cwiseAbs().maxCoeff());
  }

  bool monotone = true;
  for (double g : {-1.0, -0.4, 0.0, 0.4, 1.0})
    for (double h : {0.0, 0.25, 0.5}) {
      const Eigen::VectorXd t = tukey_gh(zg, {0.7, 2.0, g, h});
      for (int i = 1; i <= 100; ++i) monotone = monotone && t(i) > t(i - 1);
    }

  return {zero_ok && cont <= 1e-9 && monotone,
          fmt("z=0 -> xi exact: %d; g->0 gap %.2e (tol 1e-9); monotone: %d", zero_ok ? 1 : 0,
              cont, monotone ? 1 : 0)};
}

// 11. CLI pipeline determinism (byte-identical artifacts on a repeated run).
Outcome criterion_determinism() {
  const char* cli = std::getenv("HMGP_CLI");
  if (!cli) return {false, "HMGP_CLI not set (expected the hmgp binary path)"};
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "hmgp_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);

  auto run = [&](const std::string& args) {
    const std::string cmd = "cd " + dir.string() + " && " + std::string(cli) + " " + args +
                            " > /dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  auto slurp = [&](const std::string& name) {
    std::ifstream in(dir / name, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
  };

  bool ok = true;
  for (const char* tag : {"a", "b"}) {
    const std::string t = tag;
    ok = ok && run("generate --n 400 --params 1.5,0.1,0.5,0.01 --seed 99 --out ds_" + t);
    ok = ok && run("fit --train ds_" + t + "_train.csv --eps 1e-4 --max-iters 8 --out fit_" +
                   t + ".txt");
    ok = ok && run("predict --train ds_" + t + "_train.csv --test ds_" + t +
                   "_test.csv --report fit_" + t + ".txt --out pred_" + t + ".csv");
    ok = ok && run("evaluate --pred pred_" + t + ".csv --truth ds_" + t +
                   "_test.csv --out metrics_" + t + ".csv");
  }
  if (!ok) return {false, "a pipeline stage exited nonzero"};

  // seconds lines are wall-clock and excluded from the fit-report comparison
  auto strip_seconds = [](std::string s) {
    std::string out;
    std::stringstream ss(s);
    std::string line;
    while (std::getline(ss, line))
      if (line.rfind("seconds", 0) != 0) out += line + "\n";
    return out;
  };
  const bool same_data = slurp("ds_a_train.csv") == slurp("ds_b_train.csv") &&
                         slurp("ds_a_test.csv") == slurp("ds_b_test.csv");
  const bool same_fit =
      strip_seconds(slurp("fit_a.txt")) == strip_seconds(slurp("fit_b.txt"));
  const bool same_pred = slurp("pred_a.csv") == slurp("pred_b.csv");
  const bool same_metrics = slurp("metrics_a.csv") == slurp("metrics_b.csv");
  fs::remove_all(dir);
  return {same_data && same_fit && same_pred && same_metrics,
          fmt("data=%d fit=%d pred=%d metrics=%d (1 = byte-identical)", same_data, same_fit,
              same_pred, same_metrics)};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);

  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> fn;
  };
  const Entry entries[] = {
      {1, "Matern closed-form agreement", criterion_matern},
      {2, "H-assembly accuracy", criterion_assembly},
      {3, "log-determinant", criterion_logdet},
      {4, "log-likelihood", criterion_loglik},
      {5, "quasi-linear scaling", criterion_scaling},
      {6, "MLE optimizer", criterion_mle},
      {7, "kriging", criterion_kriging},
      {8, "MLOE/MMOM/RMSE", criterion_metrics},
      {9, "kNN baseline", criterion_knn},
      {10, "Tukey g-and-h", criterion_tukey},
      {11, "pipeline determinism", criterion_determinism},
  };

  int failures = 0;
  for (const Entry& e : entries) {
    if (only != 0 && e.id != only) continue;
    const double t0 = now_s();
    Outcome out;
    try {
      out = e.fn();
    } catch (const std::exception& ex) {
      out = {false, std::string("exception: ") + ex.what()};
    }
    const double dt = now_s() - t0;
    std::printf("[%s] criterion %2d: %-28s  %s  (%.1f s)\n", out.pass ? "PASS" : "FAIL",
                e.id, e.name, out.detail.c_str(), dt);
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
