#pragma once

#include <Eigen/Core>
#include <span>

#include "hmgp/pipeline.hpp"

namespace hmgp {

struct PredictionResult {
  Eigen::VectorXd z2_hat;
  double seconds = 0.0;
};

// Conditional-mean prediction Z2 = C21 C11^{-1} Z1 through the H-pipeline:
// one factorization of C11, then C21 applied in streamed row batches (C21 is
// never stored whole). Cross-covariances carry no nugget, also for test
// points that coincide with training points.
PredictionResult predict(std::span<const Location> train, const Eigen::VectorXd& z1,
                         std::span<const Location> new_locations, const MaternParams& params,
                         const HConfig& cfg = {});

// Pointwise kriging variance diag(C22 - C21 C11^{-1} C12) by dense
// factorization; guarded to n <= 4096.
Eigen::VectorXd kriging_variance_dense(std::span<const Location> train,
                                       std::span<const Location> new_locations,
                                       const MaternParams& params);

}  // namespace hmgp
