#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>

#include "hmgp/covkernel.hpp"

namespace hmgp {

double rmse(const Eigen::VectorXd& z_hat, const Eigen::VectorXd& z_true);

struct MetricConfig {
  int M = 1000;  // evaluation locations, clamped to n
  std::uint64_t seed = 0;
  int dense_guard = 4096;
};

struct MloeMmom {
  double mloe = 0.0;
  double mmom = 0.0;
};

// Mean loss of efficiency and mean misspecification of the MSE of the
// approximated model against the true model. Each of M sampled locations is
// predicted from the remaining n-1 by leave-one-out kriging under both
// parameter sets; the expectations come from the standard closed forms.
MloeMmom mloe_mmom(std::span<const Location> locations, const MaternParams& theta_true,
                   const MaternParams& theta_approx, const MetricConfig& cfg = {});

}  // namespace hmgp
