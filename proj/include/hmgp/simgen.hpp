#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "hmgp/covkernel.hpp"

namespace hmgp {

// Tukey g-and-h marginal transform parameters.
struct TukeyParams {
  double xi = 0.0;
  double omega = 1.0;
  double g = 0.0;
  double h = 0.0;

  bool valid() const { return omega > 0.0 && h >= 0.0; }
};

// Inverse standard normal CDF (Wichura's AS241 rational approximations,
// double precision).
double std_normal_quantile(double p);

// Deterministic uniform / normal streams: mt19937_64 bits mapped through
// ((x >> 11) + 0.5) * 2^-53 and the quantile above, so a fixed seed yields
// the same variates on every platform.
double uniform01(std::mt19937_64& rng);
double standard_normal(std::mt19937_64& rng);

std::vector<Location> random_locations(int n, std::uint64_t seed);

// Exact Gaussian random field sample: Z = L w with the dense Cholesky factor
// of the full covariance matrix. Guarded to n <= 16384.
Eigen::VectorXd sample_grf(std::span<const Location> locations, const MaternParams& params,
                           std::uint64_t seed);

// Elementwise Tukey g-and-h transform; |g| < 1e-10 uses the analytic limit.
Eigen::VectorXd tukey_gh(const Eigen::VectorXd& z, const TukeyParams& tp);

}  // namespace hmgp
