#include "hmgp/krige.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <stdexcept>

namespace hmgp {

PredictionResult predict(std::span<const Location> train, const Eigen::VectorXd& z1,
                         std::span<const Location> new_locations, const MaternParams& params,
                         const HConfig& cfg) {
  params.validate();
  if (train.empty()) throw std::invalid_argument("predict: empty training set");
  if (z1.size() != static_cast<Eigen::Index>(train.size()))
    throw std::invalid_argument("predict: |z1| != n");

  const auto t0 = std::chrono::steady_clock::now();
  PredictionResult res;
  const int m = static_cast<int>(new_locations.size());
  res.z2_hat.resize(m);
  if (m == 0) {
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  }

  const AssembledCov cov = assemble_covariance(train, params, cfg);
  const HFactor f = factorize(cov.matrix, cfg.factor_eps(), cfg.form);
  const Eigen::VectorXd w = f.solve_factored(z1);

  const KernelEvaluator kernel(train, params);
  const int n = static_cast<int>(train.size());
  constexpr int kBatch = 1024;
  Eigen::MatrixXd rows(std::min(kBatch, m), n);
  for (int b0 = 0; b0 < m; b0 += kBatch) {
    const int bn = std::min(kBatch, m - b0);
    for (int i = 0; i < bn; ++i) {
      const Location& s = new_locations[b0 + i];
      for (int j = 0; j < n; ++j) rows(i, j) = kernel.at_distance(distance(s, train[j]));
    }
    res.z2_hat.segment(b0, bn).noalias() = rows.topRows(bn) * w;
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

Eigen::VectorXd kriging_variance_dense(std::span<const Location> train,
                                       std::span<const Location> new_locations,
                                       const MaternParams& params) {
  params.validate();
  const int n = static_cast<int>(train.size());
  const int m = static_cast<int>(new_locations.size());
  if (n < 1) throw std::invalid_argument("kriging_variance_dense: empty training set");
  if (n > 4096)
    throw std::invalid_argument("kriging_variance_dense: dense path capped at n = 4096");

  Eigen::MatrixXd c11 = cov_dense(train, params);
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(c11);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("kriging_variance_dense: C11 not SPD; increase nugget tau2");

  const KernelEvaluator kernel(train, params);
  const double prior = params.sigma2 + params.tau2;
  Eigen::VectorXd out(m);
  Eigen::VectorXd c(n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j)
      c(j) = kernel.at_distance(distance(new_locations[i], train[j]));
    const Eigen::VectorXd x = llt.solve(c);
    double v = prior - c.dot(x);
    if (v < 0.0 && v > -1e-9) v = 0.0;  // rounding on interpolation points
    out(i) = v;
  }
  return out;
}

}  // namespace hmgp
