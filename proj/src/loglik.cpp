#include "hmgp/loglik.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace hmgp {

AssembledCov assemble_covariance(std::span<const Location> locations,
                                 const MaternParams& params, const HConfig& cfg) {
  AssembledCov out;
  out.tree = std::make_unique<ClusterTree>(locations, cfg.leaf_size);
  out.blocks = std::make_unique<BlockClusterTree>(*out.tree, *out.tree, cfg.eta);
  out.matrix = assemble(*out.blocks, locations, params, cfg.rank, cfg.threads);
  return out;
}

LogLikResult evaluate_loglik(std::span<const Location> locations, const Eigen::VectorXd& z,
                             const MaternParams& params, const HConfig& cfg) {
  params.validate();
  const int n = static_cast<int>(locations.size());
  if (n < 1) throw std::invalid_argument("evaluate_loglik: empty dataset");
  if (z.size() != n) throw std::invalid_argument("evaluate_loglik: |z| != n");

  const auto t0 = std::chrono::steady_clock::now();
  const AssembledCov cov = assemble_covariance(locations, params, cfg);
  const HFactor f = factorize(cov.matrix, cfg.factor_eps(), cfg.form);

  LogLikResult res;
  res.n = n;
  res.logdet = f.log_det();
  res.quad_form = f.quad_form(z);
  res.loglik = -0.5 * n * std::log(2.0 * M_PI) - 0.5 * res.logdet - 0.5 * res.quad_form;
  res.factor_status =
      f.info().clamped > 0 ? LogLikResult::Status::Clamped : LogLikResult::Status::Success;
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace hmgp
