#include "hmgp/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace hmgp {

double rmse(const Eigen::VectorXd& z_hat, const Eigen::VectorXd& z_true) {
  if (z_hat.size() != z_true.size()) throw std::invalid_argument("rmse: length mismatch");
  if (z_hat.size() == 0) throw std::invalid_argument("rmse: empty input");
  return std::sqrt((z_hat - z_true).squaredNorm() / static_cast<double>(z_hat.size()));
}

MloeMmom mloe_mmom(std::span<const Location> locations, const MaternParams& theta_true,
                   const MaternParams& theta_approx, const MetricConfig& cfg) {
  theta_true.validate();
  theta_approx.validate();
  const int n = static_cast<int>(locations.size());
  if (n < 2) throw std::invalid_argument("mloe_mmom: need at least 2 locations");
  if (n > cfg.dense_guard)
    throw std::invalid_argument("mloe_mmom: dense evaluation capped at n = " +
                                std::to_string(cfg.dense_guard));
  if (cfg.M < 1) throw std::invalid_argument("mloe_mmom: M must be >= 1");
  const int m = std::min(cfg.M, n);

  // Sample M distinct target locations (partial Fisher-Yates, seeded).
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  for (int i = 0; i < m; ++i) {
    const int j = i + static_cast<int>(rng() % static_cast<std::uint64_t>(n - i));
    std::swap(idx[i], idx[j]);
  }

  const Eigen::MatrixXd c_t = cov_dense(locations, theta_true);
  const Eigen::MatrixXd c_a = cov_dense(locations, theta_approx);
  Eigen::LLT<Eigen::MatrixXd> llt_t(c_t);
  Eigen::LLT<Eigen::MatrixXd> llt_a(c_a);
  if (llt_t.info() != Eigen::Success || llt_a.info() != Eigen::Success)
    throw std::runtime_error("mloe_mmom: covariance not SPD; increase nugget tau2");

  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, m);
  for (int k = 0; k < m; ++k) e(idx[k], k) = 1.0;
  const Eigen::MatrixXd g_t = llt_t.solve(e);
  Eigen::MatrixXd g_a = llt_a.solve(e);

  // Full-length weight vectors of the approximated model: w~ = -g / g_jj has
  // -1 at the target, the leave-one-out kriging weights elsewhere.
  Eigen::VectorXd ga_diag(m);
  for (int k = 0; k < m; ++k) {
    ga_diag(k) = g_a(idx[k], k);
    g_a.col(k) *= -1.0 / ga_diag(k);
  }
  const Eigen::MatrixXd ct_w = c_t * g_a;

  double mloe = 0.0, mmom = 0.0;
  for (int k = 0; k < m; ++k) {
    const int j = idx[k];
    const double err_true_true = 1.0 / g_t(j, k);              // E_t[(Zhat_t - Z)^2]
    const double err_appr_appr = 1.0 / ga_diag(k);             // E_a[(Zhat_a - Z)^2]
    const double err_true_appr = g_a.col(k).dot(ct_w.col(k));  // E_t[(Zhat_a - Z)^2]
    mloe += err_true_appr / err_true_true - 1.0;
    mmom += err_appr_appr / err_true_appr - 1.0;
  }
  return {mloe / m, mmom / m};
}

}  // namespace hmgp
