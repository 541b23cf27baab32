#pragma once

#include <Eigen/Core>
#include <functional>
#include <span>
#include <vector>

#include "hmgp/loglik.hpp"

namespace hmgp {

// Unconstrained optimization coordinates. The exponential maps keep every
// probed parameter strictly positive:
//   sigma = 2.0 / 1.1^sigma0,  ell = 1.0 / 1.5^ell0,
//   nu    = 1.0 / 1.2^nu0,     tau = 1.0 / 2.0^tau0.
struct ReparamPoint {
  double sigma0 = 2.0;
  double ell0 = 2.0;
  double nu0 = 1.0;
  double tau0 = 15.0;

  double& operator[](int i);
  double operator[](int i) const;
};

MaternParams reparam_to_params(const ReparamPoint& p);
ReparamPoint params_to_reparam(const MaternParams& p);

struct BrentResult {
  double x = 0.0;
  double fx = 0.0;
  int evals = 0;
};

// Derivative-free scalar maximization on (lo, hi): parabolic interpolation
// with a golden-section fallback. Non-finite function values are treated as
// -inf; if every probe is -inf the search fails.
BrentResult brent_max_1d(const std::function<double(double)>& f, double lo, double hi,
                         double xtol, int max_evals);

struct OptimizerConfig {
  ReparamPoint initial{};      // (2, 2, 1, 15)
  double threshold = 1e-4;     // stop when a full sweep improves L by less
  int max_iters = 400;         // total 1-d optimizations
  double bracket_halfwidth = 8.0;
  int max_bracket_expansions = 3;
  double brent_xtol = 1e-3;
  int brent_max_evals = 32;
  HConfig h{};
};

struct FitTraceEntry {
  int iteration = 0;
  int coordinate = 0;  // 0..3 = sigma0, ell0, nu0, tau0
  ReparamPoint point;
  double loglik = 0.0;
};

struct FitReport {
  MaternParams theta_hat;
  ReparamPoint reparam_hat;
  double loglik_at_opt = 0.0;
  int iterations = 0;
  bool converged = false;
  double final_sweep_delta = 0.0;
  double seconds = 0.0;
  std::vector<FitTraceEntry> trace;
};

// Cyclic coordinate ascent over (sigma0, ell0, nu0, tau0), one Brent
// maximization per coordinate, each counted against max_iters.
FitReport fit(std::span<const Location> locations, const Eigen::VectorXd& z,
              const OptimizerConfig& cfg = {});

}  // namespace hmgp
