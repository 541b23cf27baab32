#pragma once

#include <Eigen/Core>
#include <span>

#include "hmgp/pipeline.hpp"

namespace hmgp {

struct LogLikResult {
  double loglik = 0.0;
  double logdet = 0.0;
  double quad_form = 0.0;
  int n = 0;
  double seconds = 0.0;
  enum class Status { Success, Clamped } factor_status = Status::Success;
};

// Gaussian log-likelihood -n/2 log(2 pi) - 1/2 log det C~ - 1/2 z^T C~^{-1} z
// evaluated through assembly + triangular factorization. Factorization
// failures propagate as FactorError (raise the nugget).
LogLikResult evaluate_loglik(std::span<const Location> locations, const Eigen::VectorXd& z,
                             const MaternParams& params, const HConfig& cfg = {});

}  // namespace hmgp
